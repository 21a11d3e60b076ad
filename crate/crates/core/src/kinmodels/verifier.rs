use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    fit_abm, fit_block_ensemble, fit_concat_baseline, fit_rsbm, fit_sbm, predict_abm, predict_rsbm,
    predict_sbm, AbmModel, BlockEnsemble, ConcatModel, ParentRole, RsbmModel, SbmModel,
    TripleSample, DEFAULT_ALPHA, DEFAULT_RSBM_ITERATIONS,
};
use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::optim::{SolverConfig, DEFAULT_BLOCK_LAMBDA, DEFAULT_LAMBDA};
use crate::select::PatchSelection;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sbm,
    Abm,
    Rsbm,
    ConcatBaseline,
}

impl FromStr for ModelKind {
    type Err = KinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbm" => Ok(ModelKind::Sbm),
            "abm" => Ok(ModelKind::Abm),
            "rsbm" => Ok(ModelKind::Rsbm),
            "concat-baseline" => Ok(ModelKind::ConcatBaseline),
            other => Err(KinError::param(
                "model",
                format!("unknown model kind `{other}`"),
            )),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Sbm => "sbm",
            ModelKind::Abm => "abm",
            ModelKind::Rsbm => "rsbm",
            ModelKind::ConcatBaseline => "concat-baseline",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub alpha: f64,
    pub iterations: usize,
}

impl ModelParams {
    pub fn defaults(block_level: bool) -> Self {
        Self {
            lambda: if block_level {
                DEFAULT_BLOCK_LAMBDA
            } else {
                DEFAULT_LAMBDA
            },
            alpha: DEFAULT_ALPHA,
            iterations: DEFAULT_RSBM_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KinshipModel {
    Sbm(SbmModel),
    Abm(AbmModel),
    Rsbm(RsbmModel),
    Concat(ConcatModel),
    Block(BlockEnsemble),
}

impl KinshipModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            KinshipModel::Sbm(_) => ModelKind::Sbm,
            KinshipModel::Abm(_) => ModelKind::Abm,
            KinshipModel::Rsbm(_) => ModelKind::Rsbm,
            KinshipModel::Concat(_) => ModelKind::ConcatBaseline,
            KinshipModel::Block(b) => b.kind,
        }
    }

    pub fn is_block(&self) -> bool {
        matches!(self, KinshipModel::Block(_))
    }

    pub fn predict(&self, f: &FeatureVector, m: &FeatureVector, c: &FeatureVector) -> Result<f64> {
        match self {
            KinshipModel::Sbm(x) => predict_sbm(x, f, m, c),
            KinshipModel::Abm(x) => predict_abm(x, f, m, c),
            KinshipModel::Rsbm(x) => predict_rsbm(x, f, m, c),
            KinshipModel::Concat(x) => x.predict(f, m, c),
            KinshipModel::Block(x) => x.predict(f, m, c),
        }
    }

    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        match self {
            KinshipModel::Sbm(x) => x.predict_pair(parent, child, role),
            KinshipModel::Rsbm(x) => x.predict_pair(parent, child, role),
            KinshipModel::Block(x) => x.predict_pair(parent, child, role),
            KinshipModel::Abm(_) | KinshipModel::Concat(_) => Err(KinError::Unsupported(format!(
                "pair mode needs an SBM or RSBM model, not {}",
                self.kind()
            ))),
        }
    }
}

/// A fitted model plus the patch selection its inputs go through.
///
/// Inputs to [`TrainedVerifier::predict`] are always full-grid features.
/// Image-level models with a selection see each member cut down to its
/// role's patches; block ensembles slice internally.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedVerifier {
    pub model: KinshipModel,
    pub selection: Option<PatchSelection>,
}

impl TrainedVerifier {
    fn cut(
        &self,
        v: &FeatureVector,
        pick: fn(&PatchSelection) -> &Vec<usize>,
    ) -> Result<FeatureVector> {
        match (&self.selection, self.model.is_block()) {
            (Some(sel), false) => v.select(pick(sel)),
            _ => Ok(v.clone()),
        }
    }

    pub fn predict(&self, f: &FeatureVector, m: &FeatureVector, c: &FeatureVector) -> Result<f64> {
        self.model.predict(
            &self.cut(f, |s| &s.father)?,
            &self.cut(m, |s| &s.mother)?,
            &self.cut(c, |s| &s.child)?,
        )
    }

    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        let parent = match role {
            ParentRole::Father => self.cut(parent, |s| &s.father)?,
            ParentRole::Mother => self.cut(parent, |s| &s.mother)?,
        };
        self.model
            .predict_pair(&parent, &self.cut(child, |s| &s.child)?, role)
    }
}

fn cut_triples(triples: &[TripleSample], sel: &PatchSelection) -> Result<Vec<TripleSample>> {
    triples
        .iter()
        .map(|t| {
            TripleSample::new(
                t.father.select(&sel.father)?,
                t.mother.select(&sel.mother)?,
                t.child.select(&sel.child)?,
                t.label,
                t.family_id.clone(),
            )
        })
        .collect()
}

/// Fits any model variant. `block_level` without a selection uses every
/// patch present in the features for every role.
pub fn train(
    kind: ModelKind,
    block_level: bool,
    selection: Option<&PatchSelection>,
    triples: &[TripleSample],
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<TrainedVerifier> {
    let first = triples
        .first()
        .ok_or_else(|| KinError::param("triples", "no training samples"))?;
    if block_level {
        let sel = match selection {
            Some(s) => s.clone(),
            None => {
                let all = first.child.patch_ids().to_vec();
                PatchSelection::fixed(all.clone(), all.clone(), all)?
            }
        };
        let ens = fit_block_ensemble(kind, triples, &sel, params, cfg)?;
        return Ok(TrainedVerifier {
            model: KinshipModel::Block(ens),
            selection: selection.cloned(),
        });
    }
    let owned;
    let data = match selection {
        Some(sel) => {
            owned = cut_triples(triples, sel)?;
            &owned[..]
        }
        None => triples,
    };
    let model = match kind {
        ModelKind::Sbm => KinshipModel::Sbm(fit_sbm(data, params.lambda, cfg)?),
        ModelKind::Abm => KinshipModel::Abm(fit_abm(data, params.lambda, cfg)?),
        ModelKind::Rsbm => KinshipModel::Rsbm(fit_rsbm(
            data,
            params.lambda,
            params.alpha,
            params.iterations,
            cfg,
        )?),
        ModelKind::ConcatBaseline => KinshipModel::Concat(fit_concat_baseline(data, cfg)?),
    };
    Ok(TrainedVerifier {
        model,
        selection: selection.cloned(),
    })
}
