use rayon::prelude::*;

use super::verifier::{ModelKind, ModelParams};
use super::{
    fit_abm, fit_rsbm, fit_sbm, labels_of, predict_abm, predict_rsbm, predict_sbm, AbmModel,
    ParentRole, RsbmModel, SbmModel, TripleSample, COMBINER_REG,
};
use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::label::require_both_classes;
use crate::optim::{fit_l2_logistic, LogisticLinear, SolverConfig};
use crate::select::PatchSelection;

/// A model fit on a single patch slice of every member.
#[derive(Clone, Debug, PartialEq)]
pub enum PatchModel {
    Sbm(SbmModel),
    Abm(AbmModel),
    Rsbm(RsbmModel),
}

impl PatchModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            PatchModel::Sbm(_) => ModelKind::Sbm,
            PatchModel::Abm(_) => ModelKind::Abm,
            PatchModel::Rsbm(_) => ModelKind::Rsbm,
        }
    }

    pub fn predict(&self, f: &FeatureVector, m: &FeatureVector, c: &FeatureVector) -> Result<f64> {
        match self {
            PatchModel::Sbm(x) => predict_sbm(x, f, m, c),
            PatchModel::Abm(x) => predict_abm(x, f, m, c),
            PatchModel::Rsbm(x) => predict_rsbm(x, f, m, c),
        }
    }

    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        match self {
            PatchModel::Sbm(x) => x.predict_pair(parent, child, role),
            PatchModel::Rsbm(x) => x.predict_pair(parent, child, role),
            PatchModel::Abm(_) => Err(KinError::Unsupported(
                "pair mode needs an SBM or RSBM model".into(),
            )),
        }
    }
}

/// Per-patch models whose probabilities are fused by a logistic combiner.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEnsemble {
    pub kind: ModelKind,
    pub father_patches: Vec<usize>,
    pub mother_patches: Vec<usize>,
    pub child_patches: Vec<usize>,
    pub members: Vec<PatchModel>,
    pub combiner: LogisticLinear,
    /// Pair-mode combiners over per-patch pair probabilities; absent for ABM.
    pub pair_father: Option<LogisticLinear>,
    pub pair_mother: Option<LogisticLinear>,
}

struct Slices {
    father: FeatureVector,
    mother: FeatureVector,
    child: FeatureVector,
}

fn slice(
    f: &FeatureVector,
    m: &FeatureVector,
    c: &FeatureVector,
    (pf, pm, pc): (usize, usize, usize),
) -> Result<Slices> {
    Ok(Slices {
        father: f.select(&[pf])?,
        mother: m.select(&[pm])?,
        child: c.select(&[pc])?,
    })
}

impl BlockEnsemble {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    fn patch_triple(&self, i: usize) -> (usize, usize, usize) {
        (
            self.father_patches[i],
            self.mother_patches[i],
            self.child_patches[i],
        )
    }

    /// Per-patch probabilities for one triple of full-grid features.
    pub fn member_probabilities(
        &self,
        f: &FeatureVector,
        m: &FeatureVector,
        c: &FeatureVector,
    ) -> Result<Vec<f64>> {
        (0..self.k())
            .map(|i| {
                let s = slice(f, m, c, self.patch_triple(i))?;
                self.members[i].predict(&s.father, &s.mother, &s.child)
            })
            .collect()
    }

    pub fn predict(&self, f: &FeatureVector, m: &FeatureVector, c: &FeatureVector) -> Result<f64> {
        self.combiner
            .probability(&self.member_probabilities(f, m, c)?)
    }

    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        let (combiner, patches) = match role {
            ParentRole::Father => (&self.pair_father, &self.father_patches),
            ParentRole::Mother => (&self.pair_mother, &self.mother_patches),
        };
        let combiner = combiner.as_ref().ok_or_else(|| {
            KinError::Unsupported("pair mode needs an SBM or RSBM ensemble".into())
        })?;
        let probs = (0..self.k())
            .map(|i| {
                let p = parent.select(&[patches[i]])?;
                let c = child.select(&[self.child_patches[i]])?;
                self.members[i].predict_pair(&p, &c, role)
            })
            .collect::<Result<Vec<_>>>()?;
        combiner.probability(&probs)
    }
}

/// Fits one model of `kind` per selected patch position `i` (father patch
/// `selection.father[i]`, mother `selection.mother[i]`, child
/// `selection.child[i]`), then a logistic combiner over the `K` per-patch
/// training probabilities.
pub fn fit_block_ensemble(
    kind: ModelKind,
    triples: &[TripleSample],
    selection: &PatchSelection,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<BlockEnsemble> {
    let k = selection.father.len();
    if k == 0 || selection.mother.len() != k || selection.child.len() != k {
        return Err(KinError::InvalidSelection(
            "block ensemble needs K >= 1 patches per role".into(),
        ));
    }
    if kind == ModelKind::ConcatBaseline {
        return Err(KinError::Unsupported(
            "the concatenation baseline has no block form".into(),
        ));
    }
    let labels = labels_of(triples);
    require_both_classes(&labels)?;
    let pairable = kind != ModelKind::Abm;

    struct Member {
        model: PatchModel,
        probs: Vec<f64>,
        pair_f: Vec<f64>,
        pair_m: Vec<f64>,
    }

    let members: Vec<Member> = (0..k)
        .into_par_iter()
        .map(|i| -> Result<Member> {
            let idx = (selection.father[i], selection.mother[i], selection.child[i]);
            let sliced: Vec<TripleSample> = triples
                .iter()
                .map(|t| {
                    let s = slice(&t.father, &t.mother, &t.child, idx)?;
                    TripleSample::new(s.father, s.mother, s.child, t.label, t.family_id.clone())
                })
                .collect::<Result<_>>()?;
            let model = match kind {
                ModelKind::Sbm => PatchModel::Sbm(fit_sbm(&sliced, params.lambda, cfg)?),
                ModelKind::Abm => PatchModel::Abm(fit_abm(&sliced, params.lambda, cfg)?),
                ModelKind::Rsbm => PatchModel::Rsbm(fit_rsbm(
                    &sliced,
                    params.lambda,
                    params.alpha,
                    params.iterations,
                    cfg,
                )?),
                ModelKind::ConcatBaseline => unreachable!(),
            };
            let probs = sliced
                .iter()
                .map(|t| model.predict(&t.father, &t.mother, &t.child))
                .collect::<Result<Vec<_>>>()?;
            let (pair_f, pair_m) = if pairable {
                let pf = sliced
                    .iter()
                    .map(|t| model.predict_pair(&t.father, &t.child, ParentRole::Father))
                    .collect::<Result<Vec<_>>>()?;
                let pm = sliced
                    .iter()
                    .map(|t| model.predict_pair(&t.mother, &t.child, ParentRole::Mother))
                    .collect::<Result<Vec<_>>>()?;
                (pf, pm)
            } else {
                (vec![], vec![])
            };
            Ok(Member {
                model,
                probs,
                pair_f,
                pair_m,
            })
        })
        .collect::<Result<_>>()?;

    let rows = |pick: &dyn Fn(&Member) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..triples.len())
            .map(|n| members.iter().map(|m| pick(m)[n]).collect())
            .collect()
    };
    let solver = SolverConfig::default();
    let combiner = fit_l2_logistic(&rows(&|m| &m.probs), &labels, COMBINER_REG, &solver)?;
    let (pair_father, pair_mother) = if pairable {
        (
            Some(fit_l2_logistic(
                &rows(&|m| &m.pair_f),
                &labels,
                COMBINER_REG,
                &solver,
            )?),
            Some(fit_l2_logistic(
                &rows(&|m| &m.pair_m),
                &labels,
                COMBINER_REG,
                &solver,
            )?),
        )
    } else {
        (None, None)
    };

    Ok(BlockEnsemble {
        kind,
        father_patches: selection.father.clone(),
        mother_patches: selection.mother.clone(),
        child_patches: selection.child.clone(),
        members: members.into_iter().map(|m| m.model).collect(),
        combiner,
        pair_father,
        pair_mother,
    })
}
