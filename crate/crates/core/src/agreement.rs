//! Overlap between independently annotated keyword lists.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::normalize_tag;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub merged: BTreeSet<String>,
    pub intersected: BTreeSet<String>,
    /// `|intersected| / |merged|`, in [0, 1].
    pub agreement: f64,
    /// `|merged| / |intersected|`, absent when the intersection is empty.
    pub merged_over_intersected: Option<f64>,
}

/// Union, intersection and overlap ratio of two or more keyword lists.
pub fn annotation_agreement<L, S>(lists: &[L]) -> Result<Agreement>
where
    L: AsRef<[S]>,
    S: AsRef<str>,
{
    if lists.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "agreement needs at least 2 lists, got {}",
            lists.len()
        )));
    }
    let sets: Vec<BTreeSet<String>> = lists
        .iter()
        .map(|l| {
            l.as_ref()
                .iter()
                .map(|s| normalize_tag(s.as_ref()))
                .filter(|s| !s.is_empty())
                .collect()
        })
        .collect();
    if let Some(i) = sets.iter().position(BTreeSet::is_empty) {
        return Err(Error::EmptyInput(format!("keyword list {} is empty", i + 1)));
    }
    let merged: BTreeSet<String> = sets.iter().flatten().cloned().collect();
    let intersected: BTreeSet<String> = sets[0]
        .iter()
        .filter(|k| sets[1..].iter().all(|s| s.contains(*k)))
        .cloned()
        .collect();
    let agreement = intersected.len() as f64 / merged.len() as f64;
    let merged_over_intersected =
        (!intersected.is_empty()).then(|| merged.len() as f64 / intersected.len() as f64);
    Ok(Agreement {
        merged,
        intersected,
        agreement,
        merged_over_intersected,
    })
}

/// Reads one keyword per line; blank lines and `#` comments are ignored.
pub fn read_keyword_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
