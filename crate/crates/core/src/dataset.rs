//! Train/validation/test assignment with duplicate removal.
//!
//! Programs are compared on their canonical text: detokenized, with every
//! identifier renamed by order of first appearance. Whole parent groups
//! share a split, chosen by a seeded hash of the parent id.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{TokenKind, TokenizedProgram};
use crate::seed;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("nothing left after deduplication")]
    EmptyAfterDedup,
    #[error("invalid split ratios {0:?}")]
    InvalidRatios([f64; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn normalized(&self) -> Result<[f64; 3], DatasetError> {
        let r = [self.train, self.validation, self.test];
        let sum: f64 = r.iter().sum();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) || sum <= 0.0 {
            return Err(DatasetError::InvalidRatios(r));
        }
        Ok(r.map(|x| x / sum))
    }
}

/// One program to place, grouped by `parent_id`.
#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub id: String,
    pub parent_id: String,
    pub program: TokenizedProgram,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub parent_id: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    /// Items dropped because a higher-priority split holds the same
    /// canonical text.
    pub pairs_removed: usize,
    pub removed_ids: Vec<String>,
    pub criterion: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
/// Stored through [`crate::store`], which adds the `format_version` field.
pub struct DatasetManifest {
    pub seed: u64,
    pub corpus_paths: Vec<String>,
    pub ratios: SplitRatios,
    pub assignments: Vec<Assignment>,
    pub dedup: DedupReport,
}

impl DatasetManifest {
    pub fn ids_in(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignments
            .iter()
            .filter(move |a| a.split == split)
            .map(|a| a.id.as_str())
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut c = BTreeMap::new();
        for a in &self.assignments {
            *c.entry(a.split).or_default() += 1;
        }
        c
    }
}

/// Detokenized text with identifiers and type names renamed `id1`, `id2`,
/// ... by first appearance.
pub fn canonical_text(program: &TokenizedProgram) -> String {
    let mut names: HashMap<&str, usize> = HashMap::new();
    let mut out = String::new();
    for line in &program.lines {
        let mut first = true;
        for t in line {
            if !first {
                out.push(' ');
            }
            first = false;
            if matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) {
                let next = names.len() + 1;
                let n = *names.entry(t.text.as_str()).or_insert(next);
                out.push_str(&format!("id{n}"));
            } else {
                out.push_str(&t.text);
            }
        }
        out.push('\n');
    }
    out
}

/// Split of one parent id under `seed`.
pub fn assign_split(seed: u64, parent_id: &str, ratios: &SplitRatios) -> Result<Split, DatasetError> {
    let r = ratios.normalized()?;
    let u = (seed::stable_hash(seed, parent_id) >> 11) as f64 / (1u64 << 53) as f64;
    Ok(if u < r[0] {
        Split::Train
    } else if u < r[0] + r[1] || r[2] == 0.0 {
        Split::Validation
    } else {
        Split::Test
    })
}

/// Assigns splits by parent and drops any item whose canonical text already
/// appears in a higher-priority split (test, then validation, then train).
pub fn dedup_split(
    items: &[DatasetItem],
    ratios: SplitRatios,
    seed: u64,
    corpus_paths: Vec<String>,
) -> Result<DatasetManifest, DatasetError> {
    let r = ratios.normalized()?;
    let placed: Vec<(Split, String)> = items
        .iter()
        .map(|it| {
            let mut split = assign_split(seed, &it.parent_id, &ratios)?;
            // zero-weight splits never receive items
            if split == Split::Validation && r[1] == 0.0 {
                split = if r[2] > 0.0 { Split::Test } else { Split::Train };
            }
            Ok((split, canonical_text(&it.program)))
        })
        .collect::<Result<_, DatasetError>>()?;

    let mut seen_above: HashSet<&str> = HashSet::new();
    let mut keep = vec![true; items.len()];
    let mut removed_ids = Vec::new();
    for split in [Split::Test, Split::Validation, Split::Train] {
        let here: Vec<usize> = (0..items.len()).filter(|&i| placed[i].0 == split).collect();
        for &i in &here {
            if seen_above.contains(placed[i].1.as_str()) {
                keep[i] = false;
                removed_ids.push(items[i].id.clone());
            }
        }
        for &i in &here {
            if keep[i] {
                seen_above.insert(placed[i].1.as_str());
            }
        }
    }
    let assignments: Vec<Assignment> = items
        .iter()
        .zip(&placed)
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((it, (split, _)), _)| Assignment {
            id: it.id.clone(),
            parent_id: it.parent_id.clone(),
            split: *split,
        })
        .collect();
    if assignments.is_empty() {
        return Err(DatasetError::EmptyAfterDedup);
    }
    Ok(DatasetManifest {
        seed,
        corpus_paths,
        ratios,
        assignments,
        dedup: DedupReport {
            pairs_removed: removed_ids.len(),
            removed_ids,
            criterion: "exact match after identifier renaming".to_string(),
        },
    })
}
