//! Spatially voted patch selection.
//!
//! Each triple is split into father-child and mother-child pairs. An L1
//! logistic fit on the concatenated `[parent; child]` features gives one
//! weight per feature; weight magnitudes are summed per patch into votes,
//! and every role keeps its `K` highest-voted patches.
//!
//! When negatives are re-pairings of the positives' own members (as the
//! derangement sampler produces), the positive and negative classes hold the
//! same multiset of parent and child vectors. The pair loss gradient at
//! `u = 0` is then exactly zero, so the fit returns `u = 0` and the votes are
//! degenerate. A selection is only informative when the classes differ in
//! their per-face feature distributions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};
use crate::facefeat::{FeatureVector, DESCRIPTOR_DIM, NUM_PATCHES};
use crate::kinmodels::TripleSample;
use crate::label::Label;
use crate::optim::{fit_l1_logistic, SolverConfig};

/// Feature index to patch index for one face vector laid out as contiguous
/// per-patch blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupMap {
    patch_of_feature: Vec<usize>,
    patches: usize,
    per_patch: usize,
}

impl GroupMap {
    pub fn new(patches: usize, per_patch: usize) -> Result<Self> {
        if patches == 0 || per_patch == 0 {
            return Err(KinError::param(
                "group map",
                "patches and per_patch must be positive",
            ));
        }
        Ok(Self {
            patch_of_feature: (0..patches * per_patch).map(|j| j / per_patch).collect(),
            patches,
            per_patch,
        })
    }

    /// The 49-patch, 128-dim face layout.
    pub fn face() -> Self {
        Self::new(NUM_PATCHES, DESCRIPTOR_DIM).expect("constant layout")
    }

    pub fn patches(&self) -> usize {
        self.patches
    }

    pub fn per_patch(&self) -> usize {
        self.per_patch
    }

    pub fn features(&self) -> usize {
        self.patch_of_feature.len()
    }

    pub fn patch_of(&self, feature: usize) -> usize {
        self.patch_of_feature[feature]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Votes {
    pub father: Vec<f64>,
    pub mother: Vec<f64>,
    pub child: Vec<f64>,
}

/// Selected patch indices per role (strictly increasing) and the votes that
/// produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSelection {
    pub k: usize,
    pub father: Vec<usize>,
    pub mother: Vec<usize>,
    pub child: Vec<usize>,
    pub votes: Votes,
    /// True when some role had no non-zero votes and fell back to the
    /// lowest-index patches.
    #[serde(default)]
    pub degenerate: bool,
}

impl PatchSelection {
    /// A selection built from explicit per-role lists, with no votes.
    pub fn fixed(father: Vec<usize>, mother: Vec<usize>, child: Vec<usize>) -> Result<Self> {
        let k = father.len();
        if k == 0 || mother.len() != k || child.len() != k {
            return Err(KinError::InvalidSelection(
                "per-role lists must be non-empty and of equal length".into(),
            ));
        }
        for list in [&father, &mother, &child] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(KinError::InvalidSelection(
                    "lists must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            k,
            father,
            mother,
            child,
            votes: Votes {
                father: vec![],
                mother: vec![],
                child: vec![],
            },
            degenerate: false,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// L1 logistic weights over concatenated `[parent; child]` features. The
/// first half scores parent features, the second half child features.
pub fn fit_pair_weights(
    parent_feats: &[&FeatureVector],
    child_feats: &[&FeatureVector],
    labels: &[Label],
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    if parent_feats.len() != child_feats.len() {
        return Err(KinError::DimensionMismatch(format!(
            "{} parents, {} children",
            parent_feats.len(),
            child_feats.len()
        )));
    }
    let samples: Vec<Vec<f64>> = parent_feats
        .iter()
        .zip(child_feats)
        .map(|(p, c)| [p.values(), c.values()].concat())
        .collect();
    Ok(fit_l1_logistic(&samples, labels, gamma, cfg)?.u)
}

fn accumulate(votes: &mut [f64], half: &[f64], gmap: &GroupMap) {
    for (j, w) in half.iter().enumerate() {
        votes[gmap.patch_of(j)] += w.abs();
    }
}

/// The group map of full-grid triples, whose members all carry the same
/// patch ids `0..n` with `n >= 2`.
pub fn group_map_for(triples: &[TripleSample]) -> Result<GroupMap> {
    let not_grid = || {
        KinError::InvalidSelection(
            "feature selection needs patch-structured features (at least 2 patches, ids 0..n)"
                .into(),
        )
    };
    let first = triples
        .first()
        .ok_or_else(|| KinError::param("triples", "no samples"))?;
    let patches = first.father.patch_ids().len();
    let per_patch = first.father.per_patch();
    let full = |v: &FeatureVector| {
        v.patch_ids().len() == patches
            && v.per_patch() == per_patch
            && v.patch_ids().iter().enumerate().all(|(i, &p)| i == p)
    };
    if patches < 2
        || !triples
            .iter()
            .all(|t| full(&t.father) && full(&t.mother) && full(&t.child))
    {
        return Err(not_grid());
    }
    GroupMap::new(patches, per_patch)
}

/// Per-patch votes: father from the parent half of `u_f`, mother from the
/// parent half of `u_m`, child from the child halves of both. Each feature
/// contributes `|u_j|`.
pub fn vote_patches(u_f: &DVector<f64>, u_m: &DVector<f64>, gmap: &GroupMap) -> Result<Votes> {
    let d = gmap.features();
    for (name, u) in [("u_f", u_f), ("u_m", u_m)] {
        if u.len() != 2 * d {
            return Err(KinError::DimensionMismatch(format!(
                "{name} has length {}, expected {}",
                u.len(),
                2 * d
            )));
        }
    }
    let mut father = vec![0.0; gmap.patches()];
    let mut mother = vec![0.0; gmap.patches()];
    let mut child = vec![0.0; gmap.patches()];
    accumulate(&mut father, &u_f.as_slice()[..d], gmap);
    accumulate(&mut mother, &u_m.as_slice()[..d], gmap);
    accumulate(&mut child, &u_f.as_slice()[d..], gmap);
    accumulate(&mut child, &u_m.as_slice()[d..], gmap);
    Ok(Votes {
        father,
        mother,
        child,
    })
}

/// Indices of the `k` largest votes, ties going to the lower index, returned
/// in ascending order.
pub fn select_top_k(votes: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > votes.len() {
        return Err(KinError::param(
            "K",
            format!("{k} not in 1..={}", votes.len()),
        ));
    }
    if votes.iter().any(|v| v.is_nan()) {
        return Err(KinError::NonFinite("votes".into()));
    }
    let mut order: Vec<usize> = (0..votes.len()).collect();
    order.sort_by(|&a, &b| votes[b].total_cmp(&votes[a]).then(a.cmp(&b)));
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Runs both pair fits, votes, and selects the top `k` patches per role.
pub fn fit_selection(
    triples: &[TripleSample],
    gamma: f64,
    k: usize,
    gmap: &GroupMap,
    cfg: &SolverConfig,
) -> Result<PatchSelection> {
    if k == 0 || k > gmap.patches() {
        return Err(KinError::param(
            "K",
            format!("{k} not in 1..={}", gmap.patches()),
        ));
    }
    if let Some(t) = triples.iter().find(|t| t.dim() != gmap.features()) {
        return Err(KinError::DimensionMismatch(format!(
            "triple `{}` has {} features, selection needs full {}-patch vectors ({})",
            t.family_id,
            t.dim(),
            gmap.patches(),
            gmap.features()
        )));
    }
    let labels: Vec<Label> = triples.iter().map(|t| t.label).collect();
    let fathers: Vec<&FeatureVector> = triples.iter().map(|t| &t.father).collect();
    let mothers: Vec<&FeatureVector> = triples.iter().map(|t| &t.mother).collect();
    let children: Vec<&FeatureVector> = triples.iter().map(|t| &t.child).collect();

    let (u_f, u_m) = rayon::join(
        || fit_pair_weights(&fathers, &children, &labels, gamma, cfg),
        || fit_pair_weights(&mothers, &children, &labels, gamma, cfg),
    );
    let votes = vote_patches(&u_f?, &u_m?, gmap)?;

    let mut degenerate = false;
    for (role, v) in [
        ("father", &votes.father),
        ("mother", &votes.mother),
        ("child", &votes.child),
    ] {
        if v.iter().all(|&x| x == 0.0) {
            log::warn!("all {role} votes are zero; falling back to the lowest-index {k} patches");
            degenerate = true;
        }
    }
    Ok(PatchSelection {
        k,
        father: select_top_k(&votes.father, k)?,
        mother: select_top_k(&votes.mother, k)?,
        child: select_top_k(&votes.child, k)?,
        votes,
        degenerate,
    })
}
