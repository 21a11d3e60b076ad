use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{FamilyRecord, Relation};
use super::negatives::generate_negatives;
use crate::error::{KinError, Result};
use crate::kinmodels::TripleSample;
use crate::seeds::substream_seed;

pub const DEFAULT_FOLDS: usize = 5;

/// Test ranges over the families of one relation, 1-based and inclusive,
/// in manifest order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FoldPlan {
    pub ranges: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlanFile {
    Single(FoldPlan),
    PerRelation(std::collections::BTreeMap<Relation, FoldPlan>),
}

impl FoldPlan {
    /// `folds` ranges of `n / folds` families each; the remainder joins the
    /// last fold.
    pub fn even(n: usize, folds: usize) -> Result<Self> {
        if folds == 0 || n < folds {
            return Err(KinError::FoldPlan(format!(
                "cannot split {n} families into {folds} folds"
            )));
        }
        let size = n / folds;
        let ranges = (0..folds)
            .map(|i| {
                let start = i * size + 1;
                let end = if i + 1 == folds { n } else { (i + 1) * size };
                (start, end)
            })
            .collect();
        Ok(Self { ranges })
    }

    /// Contiguous ranges from the `fold` field of each record, which must be
    /// set for all of them and nondecreasing.
    pub fn from_records(records: &[&FamilyRecord]) -> Result<Option<Self>> {
        if records.iter().all(|r| r.fold.is_none()) {
            return Ok(None);
        }
        let mut ranges: Vec<(usize, usize)> = Vec::new();
        let mut last = None;
        for (i, r) in records.iter().enumerate() {
            let fold = r.fold.ok_or_else(|| {
                KinError::FoldPlan(format!("family `{}` has no fold", r.family_id))
            })?;
            match last {
                Some(prev) if fold == prev => ranges.last_mut().unwrap().1 = i + 1,
                Some(prev) if fold < prev => {
                    return Err(KinError::FoldPlan(format!(
                        "family `{}` returns to fold {fold} after fold {prev}",
                        r.family_id
                    )))
                }
                _ => ranges.push((i + 1, i + 1)),
            }
            last = Some(fold);
        }
        Ok(Some(Self { ranges }))
    }

    /// Reads a plan file: either one array of `[start, end]` ranges, or an
    /// object with one such array per relation name.
    pub fn load(path: &Path, relation: Relation) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KinError::io(path, e))?;
        match serde_json::from_str::<PlanFile>(&text).map_err(|e| KinError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })? {
            PlanFile::Single(p) => Ok(p),
            PlanFile::PerRelation(mut m) => m.remove(&relation).ok_or_else(|| {
                KinError::FoldPlan(format!("plan file has no entry for {relation}"))
            }),
        }
    }

    pub fn folds(&self) -> usize {
        self.ranges.len()
    }

    /// Checks that the ranges partition `1..=n` without overlap.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(KinError::FoldPlan("no folds".into()));
        }
        let mut sorted = self.ranges.clone();
        sorted.sort_unstable();
        let mut next = 1;
        for &(s, e) in &sorted {
            if s == 0 || s > e {
                return Err(KinError::FoldPlan(format!("invalid range [{s},{e}]")));
            }
            if s < next {
                return Err(KinError::FoldPlan(format!(
                    "range [{s},{e}] overlaps another"
                )));
            }
            if s > next {
                return Err(KinError::FoldPlan(format!(
                    "families {next}..{} are in no fold",
                    s - 1
                )));
            }
            next = e + 1;
        }
        if next != n + 1 {
            return Err(KinError::FoldPlan(format!(
                "plan covers {} families, data has {n}",
                next - 1
            )));
        }
        Ok(())
    }
}

/// Train and test triples of one fold, positives followed by negatives.
#[derive(Clone, Debug)]
pub struct FoldSplit {
    /// 1-based.
    pub fold: usize,
    pub train: Vec<TripleSample>,
    pub test: Vec<TripleSample>,
}

/// Splits positive families by `plan`. Negatives are generated separately
/// inside each side so no test identity appears in a training negative.
pub fn kfold_split(
    families: &[TripleSample],
    plan: &FoldPlan,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    plan.validate(families.len())?;
    plan.ranges
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| {
            let test_pos = families[s - 1..e].to_vec();
            let train_pos: Vec<TripleSample> = families[..s - 1]
                .iter()
                .chain(&families[e..])
                .cloned()
                .collect();
            let with_negatives =
                |pos: Vec<TripleSample>, side: &str| -> Result<Vec<TripleSample>> {
                    let neg = generate_negatives(
                        &pos,
                        substream_seed(seed, &format!("fold{}/{side}", i + 1)),
                    )?;
                    Ok(pos.into_iter().chain(neg).collect())
                };
            Ok(FoldSplit {
                fold: i + 1,
                train: with_negatives(train_pos, "train")?,
                test: with_negatives(test_pos, "test")?,
            })
        })
        .collect()
}
