//! Input records and their on-disk formats.
//!
//! Streets come from a GeoJSON `FeatureCollection` of `LineString`s, photos
//! and venues from JSON Lines dumps. Streets are always parsed strictly;
//! the line-oriented parsers can either abort on the first bad line or skip
//! and count bad lines.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Polyline, Projection};
use crate::score::RATING_NAMES;

pub const DEFAULT_NIGHT_CONFIDENCE: f64 = 0.95;
pub const NIGHT_LABEL: &str = "night";

/// Optional per-category ratings, in [`RATING_NAMES`] order.
pub type PartialRatings = [Option<f64>; 8];

#[derive(Debug, Clone, PartialEq)]
pub struct StreetSegment {
    pub id: String,
    pub coords: Vec<GeoPoint>,
    pub walkability: Option<f64>,
    pub safety: Option<f64>,
    pub ratings: Option<PartialRatings>,
}

impl StreetSegment {
    pub fn project(&self, proj: &Projection) -> Result<Polyline> {
        let pts = self
            .coords
            .iter()
            .map(|&c| proj.project(c))
            .collect::<Result<Vec<_>>>()?;
        Polyline::from_dedup(pts).map_err(|e| Error::Geometry(format!("segment `{}`: {e}", self.id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineTag {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotoRecord {
    pub id: String,
    pub location: GeoPoint,
    pub owner_id: String,
    pub gender: Option<Gender>,
    pub age: Option<u32>,
    pub user_tags: Vec<String>,
    pub machine_tags: Vec<MachineTag>,
    pub views: Option<u64>,
    pub favorites: Option<u64>,
    pub comments: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VenueCategory {
    Arts,
    College,
    Food,
    Nightlife,
    Outdoors,
    Residential,
    Shopping,
    Travel,
    Work,
}

impl VenueCategory {
    pub const ALL: [VenueCategory; 9] = [
        VenueCategory::Arts,
        VenueCategory::College,
        VenueCategory::Food,
        VenueCategory::Nightlife,
        VenueCategory::Outdoors,
        VenueCategory::Residential,
        VenueCategory::Shopping,
        VenueCategory::Travel,
        VenueCategory::Work,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VenueCategory::Arts => "arts",
            VenueCategory::College => "college",
            VenueCategory::Food => "food",
            VenueCategory::Nightlife => "nightlife",
            VenueCategory::Outdoors => "outdoors",
            VenueCategory::Residential => "residential",
            VenueCategory::Shopping => "shopping",
            VenueCategory::Travel => "travel",
            VenueCategory::Work => "work",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VenueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VenueCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        let cat = match key.as_str() {
            "arts" | "arts & entertainment" => VenueCategory::Arts,
            "college" | "college & education" | "college & university" => VenueCategory::College,
            "food" => VenueCategory::Food,
            "nightlife" | "nightlife spot" => VenueCategory::Nightlife,
            "outdoors" | "outdoors & recreation" => VenueCategory::Outdoors,
            "residential" | "residence" => VenueCategory::Residential,
            "shopping" | "shops" | "shop & service" => VenueCategory::Shopping,
            "travel" | "travel & transport" => VenueCategory::Travel,
            "work" | "professional & other places" => VenueCategory::Work,
            _ => return Err(Error::Validation(format!("unknown venue category `{s}`"))),
        };
        Ok(cat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VenueRecord {
    pub id: String,
    pub location: GeoPoint,
    pub category: VenueCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NightClass {
    Night,
    NotNight,
    Unclassified,
}

/// Night/day class from machine tags whose confidence exceeds `threshold`.
pub fn classify_night(photo: &PhotoRecord, threshold: f64) -> NightClass {
    classify_machine_tags(&photo.machine_tags, threshold)
}

pub fn classify_machine_tags(tags: &[MachineTag], threshold: f64) -> NightClass {
    let mut confident = false;
    for tag in tags.iter().filter(|t| t.confidence > threshold) {
        if tag.label.eq_ignore_ascii_case(NIGHT_LABEL) {
            return NightClass::Night;
        }
        confident = true;
    }
    if confident {
        NightClass::NotNight
    } else {
        NightClass::Unclassified
    }
}

/// Lowercases and strips all whitespace.
pub fn normalize_tag(tag: &str) -> String {
    tag.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

// ---------------------------------------------------------------------------
// Streets

fn score_in(value: f64, lo: f64, hi: f64, what: &str, id: &str) -> Result<f64> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::Validation(format!(
            "segment `{id}`: {what} {value} outside [{lo}, {hi}]"
        )));
    }
    Ok(value)
}

fn optional_number(props: &Map<String, Value>, key: &str, id: &str) -> Result<Option<f64>> {
    match props.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::Validation(format!("segment `{id}`: `{key}` is not a number"))),
    }
}

fn parse_ratings(props: &Map<String, Value>, id: &str) -> Result<Option<PartialRatings>> {
    let nested = props.get("ratings").and_then(Value::as_object);
    let mut ratings: PartialRatings = [None; 8];
    let mut any = false;
    for (slot, name) in ratings.iter_mut().zip(RATING_NAMES) {
        let flat = format!("ratings.{name}");
        let value = match nested {
            Some(obj) => optional_number(obj, name, id)?,
            None => None,
        };
        let value = match value {
            Some(v) => Some(v),
            None => optional_number(props, &flat, id)?,
        };
        if let Some(v) = value {
            *slot = Some(score_in(v, 0.0, 5.0, &flat, id)?);
            any = true;
        }
    }
    Ok(any.then_some(ratings))
}

fn parse_feature(feature: &Value, index: usize) -> Result<StreetSegment> {
    let geometry_err = |msg: &str| Error::Geometry(format!("feature {index}: {msg}"));
    let props = feature
        .get("properties")
        .and_then(Value::as_object)
        .cloned()
        .unwrap_or_default();
    let id = match props.get("id").or_else(|| feature.get("id")) {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(Error::Validation(format!("feature {index}: missing string `id`"))),
    };
    let geometry = feature
        .get("geometry")
        .ok_or_else(|| geometry_err("missing geometry"))?;
    if geometry.get("type").and_then(Value::as_str) != Some("LineString") {
        return Err(geometry_err("geometry is not a LineString"));
    }
    let coords = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| geometry_err("missing coordinates"))?;
    let mut points = Vec::with_capacity(coords.len());
    for c in coords {
        let pair = c.as_array().filter(|a| a.len() >= 2);
        let (lon, lat) = match pair.map(|a| (a[0].as_f64(), a[1].as_f64())) {
            Some((Some(lon), Some(lat))) => (lon, lat),
            _ => return Err(geometry_err("malformed coordinate")),
        };
        points.push(GeoPoint::new(lon, lat)?);
    }
    points.dedup();
    if points.len() < 2 {
        return Err(Error::Geometry(format!(
            "segment `{id}`: LineString needs at least 2 distinct points"
        )));
    }
    let walkability = optional_number(&props, "walkability", &id)?
        .map(|v| score_in(v, 1.0, 5.0, "walkability", &id))
        .transpose()?;
    let safety = optional_number(&props, "safety", &id)?
        .map(|v| score_in(v, 0.5, 5.0, "safety", &id))
        .transpose()?;
    let ratings = parse_ratings(&props, &id)?;
    Ok(StreetSegment {
        id,
        coords: points,
        walkability,
        safety,
        ratings,
    })
}

/// Parses a GeoJSON `FeatureCollection` of `LineString` streets.
pub fn parse_streets(document: &str) -> Result<Vec<StreetSegment>> {
    let doc: Value = serde_json::from_str(document)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Validation("streets document is not a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Validation("FeatureCollection without `features`".into()))?;
    let mut seen = HashSet::with_capacity(features.len());
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let seg = parse_feature(f, i)?;
        if !seen.insert(seg.id.clone()) {
            return Err(Error::DuplicateId(seg.id));
        }
        out.push(seg);
    }
    Ok(out)
}

fn ratings_json(r: &PartialRatings) -> Value {
    let mut m = Map::new();
    for (name, v) in RATING_NAMES.iter().zip(r) {
        if let Some(v) = v {
            m.insert((*name).to_string(), (*v).into());
        }
    }
    Value::Object(m)
}

/// GeoJSON feature for a segment; `extra` properties are appended after the
/// input ones.
pub fn street_feature(seg: &StreetSegment, extra: Map<String, Value>) -> Value {
    let mut props = Map::new();
    props.insert("id".into(), seg.id.clone().into());
    if let Some(w) = seg.walkability {
        props.insert("walkability".into(), w.into());
    }
    if let Some(s) = seg.safety {
        props.insert("safety".into(), s.into());
    }
    if let Some(r) = &seg.ratings {
        props.insert("ratings".into(), ratings_json(r));
    }
    props.extend(extra);
    let coords: Vec<Value> = seg
        .coords
        .iter()
        .map(|c| Value::Array(vec![c.lon.into(), c.lat.into()]))
        .collect();
    serde_json::json!({
        "type": "Feature",
        "properties": props,
        "geometry": { "type": "LineString", "coordinates": coords },
    })
}

pub fn write_streets(segments: &[StreetSegment]) -> Result<String> {
    let features: Vec<Value> = segments.iter().map(|s| street_feature(s, Map::new())).collect();
    Ok(serde_json::to_string(&serde_json::json!({
        "type": "FeatureCollection",
        "features": features,
    }))?)
}

// ---------------------------------------------------------------------------
// Photos and venues

#[derive(Debug, Serialize, Deserialize)]
struct PhotoLine {
    id: String,
    lon: f64,
    lat: f64,
    owner_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    age: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    user_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    machine_tags: Vec<MachineTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    views: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    favorites: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comments: Option<u64>,
}

impl TryFrom<PhotoLine> for PhotoRecord {
    type Error = Error;

    fn try_from(line: PhotoLine) -> Result<Self> {
        let gender = match line.gender.as_deref().map(str::to_lowercase).as_deref() {
            None | Some("") => None,
            Some("male") | Some("m") => Some(Gender::Male),
            Some("female") | Some("f") => Some(Gender::Female),
            Some(other) => return Err(Error::Validation(format!("unknown gender `{other}`"))),
        };
        let age = line
            .age
            .map(|a| {
                if (1..=130).contains(&a) {
                    Ok(a as u32)
                } else {
                    Err(Error::Validation(format!("age {a} outside [1, 130]")))
                }
            })
            .transpose()?;
        for t in &line.machine_tags {
            if !(0.0..=1.0).contains(&t.confidence) {
                return Err(Error::Validation(format!(
                    "machine tag `{}` confidence {} outside [0, 1]",
                    t.label, t.confidence
                )));
            }
        }
        Ok(PhotoRecord {
            location: GeoPoint::new(line.lon, line.lat)?,
            id: line.id,
            owner_id: line.owner_id,
            gender,
            age,
            user_tags: line.user_tags,
            machine_tags: line.machine_tags,
            views: line.views,
            favorites: line.favorites,
            comments: line.comments,
        })
    }
}

impl From<&PhotoRecord> for PhotoLine {
    fn from(p: &PhotoRecord) -> Self {
        PhotoLine {
            id: p.id.clone(),
            lon: p.location.lon,
            lat: p.location.lat,
            owner_id: p.owner_id.clone(),
            gender: p.gender.map(|g| match g {
                Gender::Male => "male".to_string(),
                Gender::Female => "female".to_string(),
            }),
            age: p.age.map(i64::from),
            user_tags: p.user_tags.clone(),
            machine_tags: p.machine_tags.clone(),
            views: p.views,
            favorites: p.favorites,
            comments: p.comments,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VenueLine {
    id: String,
    lon: f64,
    lat: f64,
    category: String,
}

impl TryFrom<VenueLine> for VenueRecord {
    type Error = Error;

    fn try_from(line: VenueLine) -> Result<Self> {
        Ok(VenueRecord {
            location: GeoPoint::new(line.lon, line.lat)?,
            category: line.category.parse()?,
            id: line.id,
        })
    }
}

fn parse_lines<L, R, I>(stream: I, strict: bool, id_of: fn(&R) -> &str) -> Result<(Vec<R>, usize)>
where
    I: BufRead,
    L: serde::de::DeserializeOwned,
    R: TryFrom<L, Error = Error>,
{
    let mut out = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut skipped = 0;
    for (n, line) in stream.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<L>(&line)
            .map_err(|e| e.to_string())
            .and_then(|l| R::try_from(l).map_err(|e| e.to_string()))
            .and_then(|r| {
                if seen.insert(id_of(&r).to_string()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate id `{}`", id_of(&r)))
                }
            });
        match parsed {
            Ok(r) => out.push(r),
            Err(message) if strict => return Err(Error::Parse { line: n + 1, message }),
            Err(_) => skipped += 1,
        }
    }
    Ok((out, skipped))
}

/// Parses photo JSON Lines; returns the records and the number of skipped lines.
pub fn parse_photos(stream: impl BufRead, strict: bool) -> Result<(Vec<PhotoRecord>, usize)> {
    parse_lines::<PhotoLine, PhotoRecord, _>(stream, strict, |p| &p.id)
}

pub fn parse_venues(stream: impl BufRead, strict: bool) -> Result<(Vec<VenueRecord>, usize)> {
    parse_lines::<VenueLine, VenueRecord, _>(stream, strict, |v| &v.id)
}

pub fn photo_to_json(photo: &PhotoRecord) -> String {
    serde_json::to_string(&PhotoLine::from(photo)).expect("photo serializes")
}

pub fn venue_to_json(venue: &VenueRecord) -> String {
    serde_json::to_string(&VenueLine {
        id: venue.id.clone(),
        lon: venue.location.lon,
        lat: venue.location.lat,
        category: venue.category.as_str().to_string(),
    })
    .expect("venue serializes")
}
