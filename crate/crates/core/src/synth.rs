//! Synthetic cities with planted metric/score correlations.
//!
//! Segments sit one per lattice cell, far enough apart that every photo and
//! venue lands on the segment it was generated for. Segment-level latent
//! signals are built to have an exact in-sample correlation with the
//! realised target scores; the planted value is then inflated to undo the
//! expected attenuation from binomial sampling, so the pipeline-measured
//! correlation lands on the requested one.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SegmentFeatures, DEFAULT_CAR_KEYWORDS, DEFAULT_WALK_KEYWORDS};
use crate::geo::{GeoPoint, PlanarPoint, Polyline, Projection};
use crate::model::{
    photo_to_json, venue_to_json, write_streets, Gender, MachineTag, PartialRatings, PhotoRecord, StreetSegment,
    VenueCategory, VenueRecord,
};
use crate::score::{overall_walkability, CategoryRatings};

const CELL_MARGIN_M: f64 = 40.0;
const MIN_CELL_M: f64 = 150.0;
const MIN_SEGMENT_M: f64 = 30.0;
const PHOTO_OFFSET_M: f64 = 15.0;
const VENUE_OFFSET_M: f64 = 8.0;
const NIGHT_BASE: f64 = 0.35;
const MALE_BASE: f64 = 0.7;
const TAG_BASE: f64 = 0.2;
const SAFETY_WALKABILITY_R: f64 = 0.22;
const MAX_PLANTED: f64 = 0.999;
const NEUTRAL_TAGS: [&str; 8] = ["london", "sky", "people", "building", "red", "bus", "shop", "river"];

// Venue category logits per unit of standardized (safety, walkability).
const VENUE_LOGITS: [(f64, f64); 9] = [
    (0.2, 0.4),
    (0.1, 0.2),
    (0.3, 0.5),
    (0.6, 0.3),
    (-0.2, 0.6),
    (0.4, -0.3),
    (0.3, 0.4),
    (0.0, 0.0),
    (0.2, -0.2),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_segments: usize,
    /// Side of the square study area; sized from `n_segments` when unset.
    pub extent_m: Option<f64>,
    pub photos_median: f64,
    /// Log-scale spread of photos per segment.
    pub photos_sigma: f64,
    pub rho_night: f64,
    pub rho_gender: f64,
    pub rho_tags: f64,
    /// Age is planted without attenuation correction.
    pub rho_age: f64,
    /// Binomial noise sd over signal sd per unit count; larger is noisier.
    pub noise_slope: f64,
    pub gender_known: f64,
    pub age_known: f64,
    pub tags_per_photo: f64,
    pub unclassified: f64,
    pub venues_per_segment: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    /// Taken from the top-level config seed, never from the `[synth]` table.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_segments: 500,
            extent_m: None,
            photos_median: 150.0,
            photos_sigma: 0.5,
            rho_night: 0.6,
            rho_gender: 0.58,
            rho_tags: 0.89,
            rho_age: 0.32,
            noise_slope: 6.0,
            gender_known: 0.55,
            age_known: 0.6,
            tags_per_photo: 4.0,
            unclassified: 0.05,
            venues_per_segment: 6.0,
            origin_lon: -0.1276,
            origin_lat: 51.5072,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn grid_side(&self) -> usize {
        (self.n_segments as f64).sqrt().ceil() as usize
    }

    pub fn extent(&self) -> f64 {
        self.extent_m.unwrap_or(200.0 * self.grid_side() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_segments < 10 {
            return bad(format!("n-segments must be at least 10, got {}", self.n_segments));
        }
        for (name, r) in [
            ("rho-night", self.rho_night),
            ("rho-gender", self.rho_gender),
            ("rho-tags", self.rho_tags),
            ("rho-age", self.rho_age),
        ] {
            if r.is_nan() || r.abs() >= 1.0 {
                return bad(format!("{name} must be in (-1, 1), got {r}"));
            }
        }
        let cell = self.extent() / self.grid_side() as f64;
        if cell.is_nan() || cell < MIN_CELL_M {
            return bad(format!("extent leaves {cell:.1} m per segment, need {MIN_CELL_M}"));
        }
        if !(self.photos_median >= 1.0 && self.photos_sigma >= 0.0 && self.noise_slope > 0.0) {
            return bad("photos-median >= 1, photos-sigma >= 0 and noise-slope > 0 required".into());
        }
        for (name, q) in [
            ("gender-known", self.gender_known),
            ("age-known", self.age_known),
            ("unclassified", self.unclassified),
        ] {
            if !(0.0..=1.0).contains(&q) {
                return bad(format!("{name} must be in [0, 1], got {q}"));
            }
        }
        if !(self.tags_per_photo >= 0.0 && self.venues_per_segment >= 0.0) {
            return bad("tags-per-photo and venues-per-segment must be >= 0".into());
        }
        GeoPoint::new(self.origin_lon, self.origin_lat).map(|_| ())
    }
}

/// Planted latent correlations after attenuation correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Planted {
    pub night: f64,
    pub gender: f64,
    pub tags: f64,
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub streets: Vec<StreetSegment>,
    pub photos: Vec<PhotoRecord>,
    pub venues: Vec<VenueRecord>,
    pub planted: Planted,
}

impl SynthCity {
    pub fn streets_geojson(&self) -> Result<String> {
        Ok(write_streets(&self.streets)? + "\n")
    }

    pub fn photos_jsonl(&self) -> String {
        jsonl(self.photos.iter().map(photo_to_json))
    }

    pub fn venues_jsonl(&self) -> String {
        jsonl(self.venues.iter().map(venue_to_json))
    }

    /// Writes `streets.geojson`, `photos.jsonl` and `venues.jsonl`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, body) in [
            ("streets.geojson", self.streets_geojson()?),
            ("photos.jsonl", self.photos_jsonl()),
            ("venues.jsonl", self.venues_jsonl()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        }
        Ok(())
    }
}

fn jsonl(lines: impl Iterator<Item = String>) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - m) / sd).collect()
}

/// Standard normal noise orthogonal to the (standardized) `u`.
fn orthogonal_noise(rng: &mut ChaCha8Rng, u: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = u.iter().map(|_| rng.sample(StandardNormal)).collect();
    let e = standardize(&raw);
    let n = u.len() as f64;
    let beta = e.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / n;
    standardize(&e.iter().zip(u).map(|(a, b)| a - beta * b).collect::<Vec<_>>())
}

fn latent(u: &[f64], e: &[f64], rho: f64) -> Vec<f64> {
    let c = (1.0 - rho * rho).sqrt();
    u.iter().zip(e).map(|(a, b)| rho * a + c * b).collect()
}

/// Finds the latent correlation whose predicted observed correlation is `rho`.
fn plant(u: &[f64], e: &[f64], rho: f64, predict: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut r = rho;
    for _ in 0..12 {
        let g = predict(&latent(u, e, r));
        if g.abs() < 1e-12 {
            break;
        }
        r = (r * rho / g).clamp(-MAX_PLANTED, MAX_PLANTED);
    }
    (r, latent(u, e, r))
}

fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    (sxx / n, syy / n, sxy / n)
}

fn prob(p: f64) -> f64 {
    p.clamp(0.01, 0.99)
}

/// Predicted corr(observed fraction, u) for fractions over `denoms` trials.
fn predict_fraction(x: &[f64], u: &[f64], denoms: &[u64], base: f64, amp: f64) -> f64 {
    let (mut p, mut uu, mut noise) = (Vec::new(), Vec::new(), 0.0);
    for i in 0..x.len() {
        if denoms[i] > 0 {
            let pi = prob(base + amp * x[i]);
            noise += pi * (1.0 - pi) / denoms[i] as f64;
            p.push(pi);
            uu.push(u[i]);
        }
    }
    if p.len() < 2 {
        return 0.0;
    }
    noise /= p.len() as f64;
    let (vp, vu, cpu) = moments(&p, &uu);
    cpu / (vu.sqrt() * (vp + noise).sqrt())
}

/// Predicted corr(z(walk) - z(car), u) under multinomial tag sampling.
fn predict_tags(x: &[f64], u: &[f64], totals: &[u64], amp: f64) -> f64 {
    let (mut w, mut c, mut uu) = (Vec::new(), Vec::new(), Vec::new());
    let (mut nw, mut nc, mut nwc) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        if totals[i] > 0 {
            let t = totals[i] as f64;
            let (pw, pc) = (prob(TAG_BASE + amp * x[i]), prob(TAG_BASE - amp * x[i]));
            nw += pw * (1.0 - pw) / t;
            nc += pc * (1.0 - pc) / t;
            nwc -= pw * pc / t;
            w.push(pw);
            c.push(pc);
            uu.push(u[i]);
        }
    }
    if w.len() < 2 {
        return 0.0;
    }
    let m = w.len() as f64;
    let (vw, vu, cwu) = moments(&w, &uu);
    let (vc, _, ccu) = moments(&c, &uu);
    let (_, _, cwc) = moments(&w, &c);
    let sw = (vw + nw / m).sqrt();
    let sc = (vc + nc / m).sqrt();
    let cov_obs = cwc + nwc / m;
    let var_z = 2.0 - 2.0 * cov_obs / (sw * sc);
    (cwu / sw - ccu / sc) / (vu.sqrt() * var_z.sqrt())
}

fn segment_line(rng: &mut ChaCha8Rng, cx: f64, cy: f64, cell: f64) -> Vec<PlanarPoint> {
    let lo = CELL_MARGIN_M;
    let hi = cell - CELL_MARGIN_M;
    loop {
        let a = PlanarPoint::new(cx + rng.random_range(lo..hi), cy + rng.random_range(lo..hi));
        let b = PlanarPoint::new(cx + rng.random_range(lo..hi), cy + rng.random_range(lo..hi));
        if a.distance(b) < MIN_SEGMENT_M {
            continue;
        }
        let jitter = 0.1 * a.distance(b);
        let mid = PlanarPoint::new(
            ((a.x + b.x) / 2.0 + rng.random_range(-jitter..=jitter)).clamp(cx + lo, cx + hi),
            ((a.y + b.y) / 2.0 + rng.random_range(-jitter..=jitter)).clamp(cy + lo, cy + hi),
        );
        return vec![a, mid, b];
    }
}

/// Random point within `offset` meters of the polyline.
fn near(rng: &mut ChaCha8Rng, line: &Polyline, offset: f64) -> PlanarPoint {
    let len = line.length();
    let s = rng.random_range(0.0..=len);
    let base = line.point_at(s);
    let a = line.point_at((s - 0.5).max(0.0));
    let b = line.point_at((s + 0.5).min(len));
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let norm = dx.hypot(dy);
    let d = rng.random_range(-offset..=offset);
    PlanarPoint::new(base.x - dy / norm * d, base.y + dx / norm * d)
}

fn ratings(rng: &mut ChaCha8Rng, safety: f64, walk: f64) -> Result<CategoryRatings> {
    let others = (8.0 * walk - safety) / 7.0;
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let mut v = [0.0; 8];
    for (j, r) in v.iter_mut().enumerate() {
        *r = if j == 5 { safety } else { (others + noise.sample(rng)).clamp(1.2, 5.0) };
    }
    CategoryRatings::new(v)
}

struct Site {
    line: Polyline,
    photos: u64,
    classified: Vec<bool>,
    /// (gender known, age known) per owner.
    owners: Vec<(bool, bool)>,
    gendered: u64,
    tags: Vec<u64>,
}

/// Generates a synthetic city; identical specs give identical cities.
pub fn synth_city(spec: &SynthSpec) -> Result<SynthCity> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_segments;
    let side = spec.grid_side();
    let cell = spec.extent() / side as f64;
    let half = spec.extent() / 2.0;
    let proj = Projection::new(GeoPoint::new(spec.origin_lon, spec.origin_lat)?)?;

    // Geometry and scores.
    let truncated = |rng: &mut ChaCha8Rng| loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            return z;
        }
    };
    let mut lines = Vec::with_capacity(n);
    let mut safety = Vec::with_capacity(n);
    let mut rating_sets = Vec::with_capacity(n);
    for k in 0..n {
        let (gx, gy) = ((k % side) as f64, (k / side) as f64);
        let pts = segment_line(&mut rng, gx * cell - half, gy * cell - half, cell);
        lines.push(Polyline::from_dedup(pts)?);
        let zs = truncated(&mut rng);
        let zw = SAFETY_WALKABILITY_R * zs + (1.0 - SAFETY_WALKABILITY_R.powi(2)).sqrt() * truncated(&mut rng);
        let s = 2.75 + 0.75 * zs;
        let w = (3.0 + 0.6 * zw).clamp(1.2, 5.0);
        safety.push(s);
        rating_sets.push(ratings(&mut rng, s, w)?);
    }
    let walkability: Vec<f64> = rating_sets.iter().map(overall_walkability).collect();
    let us = standardize(&safety);
    let uw = standardize(&walkability);

    // Sampling frame: counts drawn before any signal so attenuation is known.
    let volume = LogNormal::new(spec.photos_median.ln(), spec.photos_sigma).expect("valid lognormal");
    let tags_dist = (spec.tags_per_photo > 0.0).then(|| Poisson::new(spec.tags_per_photo).expect("valid poisson"));
    let mut sites = Vec::with_capacity(n);
    for line in lines {
        let photos = volume.sample(&mut rng).round().max(1.0) as u64;
        let classified: Vec<bool> = (0..photos).map(|_| rng.random::<f64>() >= spec.unclassified).collect();
        let n_owners = ((photos as f64 / 1.5).round() as u64).max(1);
        let mut gendered = 0;
        let owners = (0..n_owners)
            .map(|_| {
                let g = rng.random::<f64>() < spec.gender_known;
                gendered += u64::from(g);
                (g, rng.random::<f64>() < spec.age_known)
            })
            .collect();
        let tags = (0..photos)
            .map(|_| tags_dist.map_or(0, |d| d.sample(&mut rng) as u64))
            .collect();
        sites.push(Site {
            line,
            photos,
            classified,
            owners,
            gendered,
            tags,
        });
    }

    let amp = |base: f64| (base * (1.0 - base)).sqrt() / spec.noise_slope;
    let night_denoms: Vec<u64> = sites.iter().map(|s| s.classified.iter().filter(|&&c| c).count() as u64).collect();
    let gender_denoms: Vec<u64> = sites.iter().map(|s| s.gendered).collect();
    let tag_totals: Vec<u64> = sites.iter().map(|s| s.tags.iter().sum()).collect();

    let e = orthogonal_noise(&mut rng, &us);
    let (rho_night, x_night) = plant(&us, &e, spec.rho_night, |x| {
        predict_fraction(x, &us, &night_denoms, NIGHT_BASE, amp(NIGHT_BASE))
    });
    let e = orthogonal_noise(&mut rng, &us);
    let (rho_gender, x_gender) = plant(&us, &e, spec.rho_gender, |x| {
        predict_fraction(x, &us, &gender_denoms, MALE_BASE, amp(MALE_BASE))
    });
    let e = orthogonal_noise(&mut rng, &uw);
    let (rho_tags, x_tags) = plant(&uw, &e, spec.rho_tags, |x| predict_tags(x, &uw, &tag_totals, amp(TAG_BASE)));
    let e = orthogonal_noise(&mut rng, &us);
    let x_age = latent(&us, &e, spec.rho_age);

    // Draw the observations.
    let car_kw = DEFAULT_CAR_KEYWORDS;
    let walk_kw = DEFAULT_WALK_KEYWORDS;
    let mut photos = Vec::new();
    let mut venues = Vec::new();
    let mut streets = Vec::with_capacity(n);
    let (mut owner_seq, mut venue_seq) = (0usize, 0usize);
    for (k, site) in sites.into_iter().enumerate() {
        let seg_id = format!("s{k:05}");
        let p_night = prob(NIGHT_BASE + amp(NIGHT_BASE) * x_night[k]);
        let p_male = prob(MALE_BASE + amp(MALE_BASE) * x_gender[k]);
        let p_walk = prob(TAG_BASE + amp(TAG_BASE) * x_tags[k]);
        let p_car = prob(TAG_BASE - amp(TAG_BASE) * x_tags[k]);

        let owners: Vec<(String, Option<Gender>, Option<u32>)> = site
            .owners
            .iter()
            .map(|&(g, a)| {
                let gender = g.then(|| if rng.random::<f64>() < p_male { Gender::Male } else { Gender::Female });
                let age = a.then(|| {
                    let z: f64 = rng.sample(StandardNormal);
                    (38.0 + 6.0 * x_age[k] + 8.0 * z).round().clamp(16.0, 85.0) as u32
                });
                owner_seq += 1;
                (format!("u{owner_seq:07}"), gender, age)
            })
            .collect();

        for j in 0..site.photos as usize {
            let (owner, gender, age) = &owners[j % owners.len()];
            let machine_tags = if site.classified[j] {
                let conf = 0.96 + 0.039 * rng.random::<f64>();
                let label = if rng.random::<f64>() < p_night { "night" } else { "street" };
                vec![MachineTag {
                    label: label.into(),
                    confidence: conf,
                }]
            } else {
                let label = if rng.random::<bool>() { "night" } else { "street" };
                vec![MachineTag {
                    label: label.into(),
                    confidence: 0.4 + 0.5 * rng.random::<f64>(),
                }]
            };
            let user_tags = (0..site.tags[j])
                .map(|_| {
                    let r = rng.random::<f64>();
                    let t = if r < p_walk {
                        walk_kw[rng.random_range(0..walk_kw.len())]
                    } else if r < p_walk + p_car {
                        car_kw[rng.random_range(0..car_kw.len())]
                    } else {
                        NEUTRAL_TAGS[rng.random_range(0..NEUTRAL_TAGS.len())]
                    };
                    t.to_string()
                })
                .collect();
            let location = proj.unproject(near(&mut rng, &site.line, PHOTO_OFFSET_M));
            photos.push(PhotoRecord {
                id: format!("p{:08}", photos.len()),
                location,
                owner_id: owner.clone(),
                gender: *gender,
                age: *age,
                user_tags,
                machine_tags,
                views: None,
                favorites: None,
                comments: None,
            });
        }

        let logits: Vec<f64> = VENUE_LOGITS.iter().map(|(a, b)| a * us[k] + b * uw[k]).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let n_venues = if spec.venues_per_segment > 0.0 {
            Poisson::new(spec.venues_per_segment).expect("valid poisson").sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..n_venues {
            let mut r = rng.random::<f64>() * total;
            let mut cat = VenueCategory::ALL[8];
            for (c, w) in VenueCategory::ALL.iter().zip(&weights) {
                if r < *w {
                    cat = *c;
                    break;
                }
                r -= w;
            }
            venues.push(VenueRecord {
                id: format!("v{venue_seq:07}"),
                location: proj.unproject(near(&mut rng, &site.line, VENUE_OFFSET_M)),
                category: cat,
            });
            venue_seq += 1;
        }

        let coords = site.line.vertices().iter().map(|&p| proj.unproject(p)).collect();
        let r = rating_sets[k].values();
        let partial: PartialRatings = std::array::from_fn(|j| Some(r[j]));
        streets.push(StreetSegment {
            id: seg_id,
            coords,
            walkability: Some(walkability[k]),
            safety: Some(safety[k]),
            ratings: Some(partial),
        });
    }

    Ok(SynthCity {
        streets,
        photos,
        venues,
        planted: Planted {
            night: rho_night,
            gender: rho_gender,
            tags: rho_tags,
        },
    })
}

/// Segment features with night counts whose noise shrinks with volume.
///
/// Classified-photo counts are log-uniform on `[1, 10^4]`; the night share
/// is `0.5 + X / (2 slope)` with `corr(X, safety) = rho`, so low-volume
/// segments are dominated by binomial noise. Returns features and safety
/// targets in the same order.
pub fn volume_noise_features(n: usize, rho: f64, slope: f64, seed: u64) -> (Vec<SegmentFeatures>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let u = standardize(&u);
    let e = orthogonal_noise(&mut rng, &u);
    let x = latent(&u, &e, rho);
    let amp = 0.5 / slope;
    let mut features = Vec::with_capacity(n);
    for (k, xk) in x.iter().enumerate() {
        let c = 10f64.powf(4.0 * rng.random::<f64>()).round() as u64;
        let night = Binomial::new(c, prob(0.5 + amp * xk)).expect("valid binomial").sample(&mut rng);
        features.push(SegmentFeatures {
            segment_id: format!("s{k:05}"),
            n_photos: c,
            night_count: night,
            notnight_count: c - night,
            ..Default::default()
        });
    }
    let safety = u.iter().map(|z| 2.75 + 0.75 * z).collect();
    (features, safety)
}
