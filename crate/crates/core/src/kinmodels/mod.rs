//! Tri-subject verification models.
//!
//! - SBM: father-child and mother-child bilinear similarities `x_p^T W x_c`,
//!   each fit by trace-norm logistic regression, combined by a logistic
//!   combiner `sigma(beta1 s_f + beta2 s_m + b)`.
//! - ABM: one `2d x d` bilinear matrix scoring stacked parents against the
//!   child.
//! - RSBM: SBM whose similarities are weighted by per-sample softmax priors
//!   (which parent the child resembles), re-estimated over `T` rounds and
//!   stabilized toward 1/2.
//! - Block ensembles fit one model per selected patch and fuse per-patch
//!   probabilities with a logistic combiner.

mod abm;
mod block;
mod codec;
mod concat;
mod roles;
mod sbm;
mod verifier;

use nalgebra::{DMatrix, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::label::Label;

pub use abm::{fit_abm, predict_abm, AbmModel};
pub use block::{fit_block_ensemble, BlockEnsemble, PatchModel};
pub use codec::{decode_model, encode_model, ModelSidecar, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use concat::{fit_concat_baseline, ConcatModel};
pub use roles::{permute_roles, TriadForm};
pub use sbm::{
    fit_rsbm, fit_rsbm_traced, fit_sbm, predict_rsbm, predict_sbm, PairCalibration, RsbmModel,
    RsbmTrace, SbmModel,
};
pub use verifier::{train, KinshipModel, ModelKind, ModelParams, TrainedVerifier};

/// L2 strength for every score combiner and pair calibration.
pub const COMBINER_REG: f64 = 1e-3;
/// Stabilizing prior that RSBM priors are pulled toward.
pub const PRIOR_ANCHOR: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_RSBM_ITERATIONS: usize = 5;

/// One (father, mother, child) group with its kinship label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSample {
    pub father: FeatureVector,
    pub mother: FeatureVector,
    pub child: FeatureVector,
    pub label: Label,
    pub family_id: String,
}

impl TripleSample {
    pub fn new(
        father: FeatureVector,
        mother: FeatureVector,
        child: FeatureVector,
        label: Label,
        family_id: impl Into<String>,
    ) -> Result<Self> {
        if father.len() != child.len() || mother.len() != child.len() {
            return Err(KinError::DimensionMismatch(format!(
                "member dimensions differ: father {}, mother {}, child {}",
                father.len(),
                mother.len(),
                child.len()
            )));
        }
        Ok(Self {
            father,
            mother,
            child,
            label,
            family_id: family_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.child.len()
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }
}

pub(crate) fn labels_of(triples: &[TripleSample]) -> Vec<Label> {
    triples.iter().map(|t| t.label).collect()
}

pub(crate) fn check_dims(triples: &[TripleSample]) -> Result<usize> {
    let d = triples
        .first()
        .ok_or_else(|| KinError::param("triples", "no training samples"))?
        .dim();
    if let Some(t) = triples.iter().find(|t| t.dim() != d) {
        return Err(KinError::DimensionMismatch(format!(
            "triple `{}` has dimension {}, expected {d}",
            t.family_id,
            t.dim()
        )));
    }
    Ok(d)
}

/// Which parent a pair-mode prediction uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParentRole {
    Father,
    Mother,
}

impl std::str::FromStr for ParentRole {
    type Err = KinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "father" => Ok(ParentRole::Father),
            "mother" => Ok(ParentRole::Mother),
            other => Err(KinError::param(
                "role",
                format!("`{other}` is not father or mother"),
            )),
        }
    }
}

/// `a^T W b`.
pub fn bilinear_score(a: &[f64], w: &DMatrix<f64>, b: &[f64]) -> Result<f64> {
    if a.len() != w.nrows() || b.len() != w.ncols() {
        return Err(KinError::DimensionMismatch(format!(
            "score of {}-vector and {}-vector through {}x{} matrix",
            a.len(),
            b.len(),
            w.nrows(),
            w.ncols()
        )));
    }
    let a = DVectorView::from_slice(a, a.len());
    let b = DVectorView::from_slice(b, b.len());
    Ok(a.dot(&(w * b)))
}

/// Per-sample resemblance probabilities `(p_fc, p_mc)`, summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorPair {
    pub p_fc: f64,
    pub p_mc: f64,
}

impl PriorPair {
    pub const EVEN: PriorPair = PriorPair {
        p_fc: PRIOR_ANCHOR,
        p_mc: PRIOR_ANCHOR,
    };
}

/// Softmax of the two raw similarities, shifted by their maximum.
pub fn compute_priors(s_f: f64, s_m: f64) -> PriorPair {
    let top = s_f.max(s_m);
    let e_f = (s_f - top).exp();
    let e_m = (s_m - top).exp();
    let total = e_f + e_m;
    PriorPair {
        p_fc: e_f / total,
        p_mc: e_m / total,
    }
}

/// `alpha * 1/2 + (1 - alpha) * current`, componentwise.
pub fn stabilize_priors(current: PriorPair, alpha: f64) -> Result<PriorPair> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(KinError::param("alpha", format!("{alpha} not in [0, 1]")));
    }
    Ok(PriorPair {
        p_fc: alpha * PRIOR_ANCHOR + (1.0 - alpha) * current.p_fc,
        p_mc: alpha * PRIOR_ANCHOR + (1.0 - alpha) * current.p_mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_score_cases() {
        let a = [1.0, -2.0, 0.5];
        let b = [0.25, 4.0, -1.0];
        assert_eq!(bilinear_score(&a, &DMatrix::zeros(3, 3), &b).unwrap(), 0.0);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_eq!(
            bilinear_score(&a, &DMatrix::identity(3, 3), &b).unwrap(),
            dot
        );
        assert!(bilinear_score(&a, &DMatrix::identity(2, 3), &b).is_err());
    }

    #[test]
    fn prior_examples() {
        assert_eq!(compute_priors(1.3, 1.3), PriorPair::EVEN);
        let p = compute_priors(3f64.ln(), 0.0);
        assert!((p.p_fc - 0.75).abs() < 1e-15);
        assert!((p.p_fc + p.p_mc - 1.0).abs() < 1e-12);
        let big = compute_priors(900.0, -900.0);
        assert_eq!(big.p_fc, 1.0);
        assert_eq!(big.p_mc, 0.0);
    }

    #[test]
    fn stabilize_examples() {
        let s = stabilize_priors(
            PriorPair {
                p_fc: 1.0,
                p_mc: 0.0,
            },
            0.1,
        )
        .unwrap();
        assert!((s.p_fc - 0.95).abs() < 1e-15 && (s.p_mc - 0.05).abs() < 1e-15);
        let pinned = stabilize_priors(
            PriorPair {
                p_fc: 0.9,
                p_mc: 0.1,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(pinned, PriorPair::EVEN);
        assert!(stabilize_priors(PriorPair::EVEN, 1.5).is_err());
        assert!(stabilize_priors(PriorPair::EVEN, -0.1).is_err());
    }

    #[test]
    fn triple_dims_checked() {
        let v = |n: usize| FeatureVector::flat(vec![1.0; n]).unwrap();
        assert!(TripleSample::new(v(3), v(3), v(2), Label::Kin, "x").is_err());
        assert_eq!(
            TripleSample::new(v(3), v(3), v(3), Label::Kin, "x")
                .unwrap()
                .dim(),
            3
        );
    }
}
