//! Correlation, least squares and the binning/stability summaries built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum-volume ladder for stability curves.
pub const DEFAULT_THRESHOLDS: [u64; 8] = [1, 3, 10, 30, 100, 300, 1000, 3000];

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 observations, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Student t via the regularized incomplete beta function

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

pub fn significance_code(p_value: f64) -> Result<&'static str> {
    if !(0.0..=1.0).contains(&p_value) {
        return Err(Error::InvalidParameter(format!("p-value {p_value} outside [0, 1]")));
    }
    Ok(if p_value < 0.001 {
        "**"
    } else if p_value < 0.01 {
        "*"
    } else if p_value < 0.05 {
        "."
    } else {
        ""
    })
}

pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> Result<f64> {
    if n <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "adjusted R² needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    Ok(1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0))
}

// ---------------------------------------------------------------------------
// Ordinary least squares

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub significance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub intercept: Coefficient,
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub p: usize,
    pub residual_df: usize,
    pub sigma: f64,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Intercept first, then regressors.
    pub fn estimates(&self) -> Vec<f64> {
        std::iter::once(self.intercept.estimate)
            .chain(self.coefficients.iter().map(|c| c.estimate))
            .collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        std::iter::once(self.intercept.std_error)
            .chain(self.coefficients.iter().map(|c| c.std_error))
            .collect()
    }
}

/// Relative size below which a QR pivot is treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Fits `y = α + Xβ` by Householder QR. `design` holds one row per
/// observation; an intercept column is always added.
#[allow(clippy::needless_range_loop)]
pub fn ols_fit<S: AsRef<str>>(design: &[Vec<f64>], y: &[f64], names: &[S]) -> Result<RegressionResult> {
    let n = y.len();
    let p = names.len();
    if design.len() != n {
        return Err(Error::LengthMismatch(design.len(), n));
    }
    if let Some(row) = design.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch(row.len(), p));
    }
    if n <= p + 1 {
        return Err(Error::InsufficientData(format!(
            "regression needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let m = p + 1;
    let column_name = |j: usize| -> String {
        if j == 0 {
            "intercept".into()
        } else {
            names[j - 1].as_ref().to_string()
        }
    };
    // Column-major copy of [1 | X].
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            if j == 0 {
                vec![1.0; n]
            } else {
                design.iter().map(|r| r[j - 1]).collect()
            }
        })
        .collect();
    let col_norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut qty = y.to_vec();

    for k in 0..m {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOLERANCE * col_norms[k].max(f64::MIN_POSITIVE) || col_norms[k] == 0.0 {
            let earlier: Vec<String> = (0..k).map(column_name).collect();
            return Err(Error::Collinear(format!(
                "column `{}` is a linear combination of [{}]",
                column_name(k),
                earlier.join(", ")
            )));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        a[k][k] = alpha;
        for x in &mut a[k][k + 1..] {
            *x = 0.0;
        }
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut qty[k..]);
    }

    // Back substitution for R β = Qᵀy.
    let r = |i: usize, j: usize| a[j][i];
    let mut beta = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| r(i, j) * beta[j]).sum();
        beta[i] = (qty[i] - s) / r(i, i);
    }
    // R⁻¹, upper triangular.
    let mut rinv = vec![vec![0.0; m]; m];
    for j in 0..m {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    if sst == 0.0 {
        return Err(Error::DegenerateMetric("regression target is constant".into()));
    }
    let sse: f64 = design
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit = beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>();
            (yi - fit) * (yi - fit)
        })
        .sum();
    let residual_df = n - m;
    let sigma2 = sse / residual_df as f64;
    let df = residual_df as f64;
    let r2 = 1.0 - sse / sst;
    let adj = adjusted_r2(r2, n, p)?;

    let mut coefs = (0..m).map(|j| {
        let var: f64 = rinv[j][j..].iter().map(|v| v * v).sum::<f64>() * sigma2;
        let se = var.sqrt();
        let t = if se > 0.0 {
            beta[j] / se
        } else if beta[j] == 0.0 {
            0.0
        } else {
            beta[j].signum() * f64::INFINITY
        };
        let p_value = t_two_sided_p(t, df);
        Coefficient {
            name: column_name(j),
            estimate: beta[j],
            std_error: se,
            t_stat: t,
            p_value,
            significance: significance_code(p_value).unwrap_or("").to_string(),
        }
    });
    let intercept = coefs.next().expect("intercept");
    Ok(RegressionResult {
        intercept,
        coefficients: coefs.collect(),
        r2,
        adj_r2: adj,
        n,
        p,
        residual_df,
        sigma: sigma2.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Quantile bins and stability curves

/// Linear-interpolation quantile of ascending `sorted` data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub label: String,
    /// Metric range covered by the bin: `(lower, upper]`, the first bin closed.
    pub metric_lower: f64,
    pub metric_upper: f64,
    pub count: usize,
    pub median: Option<f64>,
    pub p2: Option<f64>,
    pub p98: Option<f64>,
}

/// Groups `(metric, target)` pairs into `k` equal-frequency metric bins and
/// summarizes each bin's targets by median and 2nd/98th percentiles.
pub fn quantile_bin(pairs: &[(f64, f64)], k: usize) -> Result<Vec<BinSummary>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {k}")));
    }
    let mut metrics: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    metrics.sort_by(f64::total_cmp);
    let mut distinct = metrics.clone();
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} distinct metric values for {k} bins",
            distinct.len()
        )));
    }
    let cuts: Vec<f64> = (1..k).map(|j| quantile(&metrics, j as f64 / k as f64)).collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for &(m, t) in pairs {
        let bin = cuts.iter().filter(|&&c| m > c).count();
        members[bin].push(t);
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(i, mut targets)| {
            targets.sort_by(f64::total_cmp);
            let stat = |q: f64| (!targets.is_empty()).then(|| quantile(&targets, q));
            BinSummary {
                label: format!("Q{}", i + 1),
                metric_lower: if i == 0 { metrics[0] } else { cuts[i - 1] },
                metric_upper: if i == k - 1 { metrics[metrics.len() - 1] } else { cuts[i] },
                count: targets.len(),
                median: stat(0.5),
                p2: stat(0.02),
                p98: stat(0.98),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub threshold: u64,
    pub r: Option<f64>,
    pub n_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StabilityCurve {
    pub points: Vec<StabilityPoint>,
}

impl StabilityCurve {
    pub fn defined(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.r.map(|r| (p.threshold, r)))
    }
}

/// Correlation over `(metric, target, volume)` rows restricted to
/// `volume >= T`, for each threshold `T` (thresholds are sorted first).
pub fn stability_curve(rows: &[(f64, f64, u64)], thresholds: &[u64]) -> StabilityCurve {
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_unstable();
    thresholds.dedup();
    let points = thresholds
        .into_iter()
        .map(|t| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.2 >= t).map(|r| (r.0, r.1)).unzip();
            StabilityPoint {
                threshold: t,
                n_segments: x.len(),
                r: pearson(&x, &y).ok(),
            }
        })
        .collect();
    StabilityCurve { points }
}
