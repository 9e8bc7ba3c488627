//! Per-segment aggregates and the paired z-score metrics built from them.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_night, normalize_tag, Gender, NightClass, PhotoRecord, VenueCategory, VenueRecord};

pub const DEFAULT_WALK_KEYWORDS: [&str; 16] = [
    "sidewalk",
    "footway",
    "street light",
    "clean street",
    "pedestrian",
    "bench",
    "resting",
    "tree",
    "greenery",
    "art",
    "architecture",
    "historical",
    "bike",
    "private",
    "hill",
    "social",
];

pub const DEFAULT_CAR_KEYWORDS: [&str; 2] = ["car", "cars"];

/// A σ at or below this is treated as a constant fraction.
const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordLists {
    walk: BTreeSet<String>,
    car: BTreeSet<String>,
}

#[derive(Deserialize)]
struct KeywordFile {
    walk: Vec<String>,
    car: Vec<String>,
}

impl Default for KeywordLists {
    fn default() -> Self {
        Self::new(DEFAULT_WALK_KEYWORDS, DEFAULT_CAR_KEYWORDS).expect("built-in lists are valid")
    }
}

impl KeywordLists {
    pub fn new<W, C>(walk: W, car: C) -> Result<Self>
    where
        W: IntoIterator,
        W::Item: AsRef<str>,
        C: IntoIterator,
        C::Item: AsRef<str>,
    {
        let norm = |it: &mut dyn Iterator<Item = String>| -> BTreeSet<String> { it.filter(|s| !s.is_empty()).collect() };
        let walk = norm(&mut walk.into_iter().map(|s| normalize_tag(s.as_ref())));
        let car = norm(&mut car.into_iter().map(|s| normalize_tag(s.as_ref())));
        if walk.is_empty() || car.is_empty() {
            return Err(Error::Validation("keyword lists must be non-empty".into()));
        }
        Ok(Self { walk, car })
    }

    /// Reads a TOML file with `walk = [...]` and `car = [...]` arrays.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let parsed: KeywordFile =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::new(parsed.walk, parsed.car)
    }

    pub fn walk(&self) -> &BTreeSet<String> {
        &self.walk
    }

    pub fn car(&self) -> &BTreeSet<String> {
        &self.car
    }
}

/// Counts of walk-keyword and car-keyword matches among `tags`.
pub fn match_tag_counts<S: AsRef<str>>(tags: &[S], lists: &KeywordLists) -> (u64, u64) {
    let mut walk = 0;
    let mut car = 0;
    for t in tags {
        let t = normalize_tag(t.as_ref());
        if lists.walk.contains(&t) {
            walk += 1;
        } else if lists.car.contains(&t) {
            car += 1;
        }
    }
    (walk, car)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub segment_id: String,
    pub n_photos: u64,
    pub night_count: u64,
    pub notnight_count: u64,
    /// Distinct owners, any gender.
    pub n_users: u64,
    pub male_users: u64,
    pub female_users: u64,
    /// One age per distinct owner with a known age, ascending.
    pub ages: Vec<u32>,
    pub tag_total: u64,
    pub walk_tag_count: u64,
    pub car_tag_count: u64,
    pub venue_counts: [u64; 9],
}

impl SegmentFeatures {
    pub fn classified_photos(&self) -> u64 {
        self.night_count + self.notnight_count
    }

    pub fn gendered_users(&self) -> u64 {
        self.male_users + self.female_users
    }

    pub fn n_venues(&self) -> u64 {
        self.venue_counts.iter().sum()
    }
}

/// Which segments each photo and venue was matched to, by segment position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub photos: Vec<Vec<usize>>,
    pub venues: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct AggregateOptions<'a> {
    pub keywords: &'a KeywordLists,
    pub night_confidence: f64,
}

#[derive(Default)]
struct Partial {
    counts: Vec<[u64; 6]>,
    male: Vec<(u32, u32)>,
    female: Vec<(u32, u32)>,
    users: Vec<(u32, u32)>,
    ages: Vec<(u32, u32, u32)>,
}

const N_PHOTOS: usize = 0;
const NIGHT: usize = 1;
const NOTNIGHT: usize = 2;
const TAGS: usize = 3;
const WALK: usize = 4;
const CAR: usize = 5;

impl Partial {
    fn new(n_segments: usize) -> Self {
        Self {
            counts: vec![[0; 6]; n_segments],
            ..Self::default()
        }
    }

    fn add_photo(&mut self, photo: &PhotoRecord, owner: u32, segs: &[usize], opts: &AggregateOptions<'_>) {
        if segs.is_empty() {
            return;
        }
        let class = classify_night(photo, opts.night_confidence);
        let (walk, car) = match_tag_counts(&photo.user_tags, opts.keywords);
        let tags = photo.user_tags.len() as u64;
        for &s in segs {
            let c = &mut self.counts[s];
            c[N_PHOTOS] += 1;
            match class {
                NightClass::Night => c[NIGHT] += 1,
                NightClass::NotNight => c[NOTNIGHT] += 1,
                NightClass::Unclassified => {}
            }
            c[TAGS] += tags;
            c[WALK] += walk;
            c[CAR] += car;
            let s = s as u32;
            self.users.push((s, owner));
            match photo.gender {
                Some(Gender::Male) => self.male.push((s, owner)),
                Some(Gender::Female) => self.female.push((s, owner)),
                None => {}
            }
            if let Some(age) = photo.age {
                self.ages.push((s, owner, age));
            }
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for k in 0..6 {
                a[k] += b[k];
            }
        }
        self.male.extend(other.male);
        self.female.extend(other.female);
        self.users.extend(other.users);
        self.ages.extend(other.ages);
        self
    }
}

fn distinct_per_segment(mut pairs: Vec<(u32, u32)>, n: usize) -> Vec<u64> {
    pairs.par_sort_unstable();
    pairs.dedup();
    let mut out = vec![0; n];
    for (s, _) in pairs {
        out[s as usize] += 1;
    }
    out
}

fn validate_assignment(n_segments: usize, photos: &[PhotoRecord], venues: &[VenueRecord], a: &Assignment) -> Result<()> {
    if a.photos.len() != photos.len() {
        return Err(Error::DanglingReference(format!(
            "{} photo assignments for {} photos",
            a.photos.len(),
            photos.len()
        )));
    }
    if a.venues.len() != venues.len() {
        return Err(Error::DanglingReference(format!(
            "{} venue assignments for {} venues",
            a.venues.len(),
            venues.len()
        )));
    }
    for (i, segs) in a.photos.iter().enumerate() {
        if let Some(&s) = segs.iter().find(|&&s| s >= n_segments) {
            return Err(Error::DanglingReference(format!(
                "photo `{}` assigned to unknown segment #{s}",
                photos[i].id
            )));
        }
    }
    if let Some((i, &s)) = a.venues.iter().enumerate().find(|(_, &s)| s >= n_segments) {
        return Err(Error::DanglingReference(format!(
            "venue `{}` assigned to unknown segment #{s}",
            venues[i].id
        )));
    }
    Ok(())
}

fn intern_owners(photos: &[PhotoRecord]) -> Vec<u32> {
    let mut ids: HashMap<&str, u32> = HashMap::with_capacity(photos.len() / 4 + 1);
    photos
        .iter()
        .map(|p| {
            let next = ids.len() as u32;
            *ids.entry(p.owner_id.as_str()).or_insert(next)
        })
        .collect()
}

/// Aggregates matched photos and venues into one row per segment.
pub fn aggregate<S: AsRef<str>>(
    segment_ids: &[S],
    photos: &[PhotoRecord],
    venues: &[VenueRecord],
    assignment: &Assignment,
    opts: &AggregateOptions<'_>,
) -> Result<Vec<SegmentFeatures>> {
    aggregate_impl(segment_ids, photos, venues, assignment, opts, false)
}

/// Same as [`aggregate`], with photos partitioned across the rayon pool.
pub fn aggregate_parallel<S: AsRef<str>>(
    segment_ids: &[S],
    photos: &[PhotoRecord],
    venues: &[VenueRecord],
    assignment: &Assignment,
    opts: &AggregateOptions<'_>,
) -> Result<Vec<SegmentFeatures>> {
    aggregate_impl(segment_ids, photos, venues, assignment, opts, true)
}

fn aggregate_impl<S: AsRef<str>>(
    segment_ids: &[S],
    photos: &[PhotoRecord],
    venues: &[VenueRecord],
    assignment: &Assignment,
    opts: &AggregateOptions<'_>,
    parallel: bool,
) -> Result<Vec<SegmentFeatures>> {
    let n = segment_ids.len();
    validate_assignment(n, photos, venues, assignment)?;
    let owners = intern_owners(photos);
    let fold = |range: std::ops::Range<usize>| {
        let mut part = Partial::new(n);
        for i in range {
            part.add_photo(&photos[i], owners[i], &assignment.photos[i], opts);
        }
        part
    };
    let total = if parallel {
        let chunk = (photos.len() / (4 * rayon::current_num_threads()).max(1)).max(4096);
        let ranges: Vec<_> = (0..photos.len())
            .step_by(chunk)
            .map(|s| s..(s + chunk).min(photos.len()))
            .collect();
        ranges
            .into_par_iter()
            .map(fold)
            .reduce(|| Partial::new(n), Partial::merge)
    } else {
        fold(0..photos.len())
    };

    let Partial {
        counts,
        male,
        female,
        users,
        mut ages,
    } = total;
    let male = distinct_per_segment(male, n);
    let female = distinct_per_segment(female, n);
    let users = distinct_per_segment(users, n);
    // Keep the smallest reported age per owner and segment.
    ages.par_sort_unstable();
    ages.dedup_by_key(|(s, o, _)| (*s, *o));
    let mut age_lists: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (s, _, age) in ages {
        age_lists[s as usize].push(age);
    }

    let mut venue_counts = vec![[0u64; 9]; n];
    for (v, &s) in venues.iter().zip(&assignment.venues) {
        venue_counts[s][v.category.index()] += 1;
    }

    Ok(segment_ids
        .iter()
        .enumerate()
        .zip(age_lists)
        .map(|((i, id), mut ages)| {
            ages.sort_unstable();
            let c = counts[i];
            SegmentFeatures {
                segment_id: id.as_ref().to_string(),
                n_photos: c[N_PHOTOS],
                night_count: c[NIGHT],
                notnight_count: c[NOTNIGHT],
                n_users: users[i],
                male_users: male[i],
                female_users: female[i],
                ages,
                tag_total: c[TAGS],
                walk_tag_count: c[WALK],
                car_tag_count: c[CAR],
                venue_counts: venue_counts[i],
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Paired fractions and z-scores

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FractionKind {
    /// Night vs. not-night share of classified photos.
    Night,
    /// Male vs. female share of gendered distinct users.
    Gender,
    /// Walk-keyword vs. car-keyword share of all user tags.
    Tags,
}

impl FractionKind {
    pub fn metric_name(self) -> &'static str {
        match self {
            FractionKind::Night => "photo_at_night",
            FractionKind::Gender => "manhood",
            FractionKind::Tags => "zwalkability",
        }
    }

    fn fraction_names(self) -> (&'static str, &'static str) {
        match self {
            FractionKind::Night => ("night fraction", "not-night fraction"),
            FractionKind::Gender => ("male fraction", "female fraction"),
            FractionKind::Tags => ("walk-tag fraction", "car-tag fraction"),
        }
    }

    /// Data volume behind the fraction pair of a segment.
    pub fn volume(self, f: &SegmentFeatures) -> u64 {
        match self {
            FractionKind::Night => f.classified_photos(),
            FractionKind::Gender => f.gendered_users(),
            FractionKind::Tags => f.tag_total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionPair {
    pub index: usize,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FractionPairs {
    pub pairs: Vec<FractionPair>,
    /// Segments dropped for a zero denominator.
    pub excluded: Vec<usize>,
}

pub fn fraction_pairs(features: &[SegmentFeatures], kind: FractionKind) -> FractionPairs {
    let mut out = FractionPairs::default();
    for (i, f) in features.iter().enumerate() {
        let (a, b, denom) = match kind {
            FractionKind::Night => (f.night_count, f.notnight_count, f.classified_photos()),
            FractionKind::Gender => (f.male_users, f.female_users, f.gendered_users()),
            FractionKind::Tags => (f.walk_tag_count, f.car_tag_count, f.tag_total),
        };
        if denom == 0 {
            out.excluded.push(i);
        } else {
            let d = denom as f64;
            out.pairs.push(FractionPair {
                index: i,
                a: a as f64 / d,
                b: b as f64 / d,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZMetricParams {
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZEntry {
    pub index: usize,
    pub z_a: f64,
    pub z_b: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZMetric {
    pub params: ZMetricParams,
    pub entries: Vec<ZEntry>,
}

fn population(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `z(a) - z(b)` per segment, using population statistics over `pairs`.
pub fn z_pair_metric(pairs: &[FractionPair], kind: FractionKind) -> Result<ZMetric> {
    let name = kind.metric_name();
    if pairs.len() < 2 {
        return Err(Error::DegenerateMetric(format!(
            "{name}: {} segment(s) with data, need at least 2",
            pairs.len()
        )));
    }
    let (mean_a, std_a) = population(pairs.iter().map(|p| p.a));
    let (mean_b, std_b) = population(pairs.iter().map(|p| p.b));
    let (name_a, name_b) = kind.fraction_names();
    for (s, n) in [(std_a, name_a), (std_b, name_b)] {
        if s <= DEGENERATE_STD {
            return Err(Error::DegenerateMetric(format!("{name}: {n} is constant across segments")));
        }
    }
    let entries = pairs
        .iter()
        .map(|p| {
            let z_a = (p.a - mean_a) / std_a;
            let z_b = (p.b - mean_b) / std_b;
            ZEntry {
                index: p.index,
                z_a,
                z_b,
                score: z_a - z_b,
            }
        })
        .collect();
    Ok(ZMetric {
        params: ZMetricParams {
            mean_a,
            std_a,
            mean_b,
            std_b,
        },
        entries,
    })
}

/// Mean owner age per segment, over segments with at least one known age.
pub fn mean_age(features: &[SegmentFeatures]) -> Vec<(usize, f64)> {
    features
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.ages.is_empty())
        .map(|(i, f)| (i, f.ages.iter().map(|&a| f64::from(a)).sum::<f64>() / f.ages.len() as f64))
        .collect()
}

/// Venue category shares per segment, over segments with at least one venue.
pub fn category_fractions(features: &[SegmentFeatures]) -> Vec<(usize, [f64; 9])> {
    features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.n_venues() > 0)
        .map(|(i, f)| {
            let total = f.n_venues() as f64;
            let mut out = [0.0; 9];
            for (o, &c) in out.iter_mut().zip(&f.venue_counts) {
                *o = c as f64 / total;
            }
            (i, out)
        })
        .collect()
}

pub fn category_name(i: usize) -> &'static str {
    VenueCategory::ALL[i].as_str()
}
