use nalgebra::DMatrix;

use super::{bilinear_score, check_dims, labels_of, TripleSample};
use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::optim::{fit_trace_norm_bilinear, sigmoid, SolverConfig};

/// Asymmetric bilinear model: `sigma([x_f; x_m]^T W_p x_c + b)` with a
/// `2d x d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AbmModel {
    pub w_parents: DMatrix<f64>,
    pub bias: f64,
}

impl AbmModel {
    pub fn new(w_parents: DMatrix<f64>, bias: f64) -> Result<Self> {
        if w_parents.nrows() != 2 * w_parents.ncols() {
            return Err(KinError::DimensionMismatch(format!(
                "ABM matrix must be 2d x d, got {}x{}",
                w_parents.nrows(),
                w_parents.ncols()
            )));
        }
        Ok(Self { w_parents, bias })
    }

    pub fn dim(&self) -> usize {
        self.w_parents.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.w_parents.len()
    }

    pub fn score(&self, father: &[f64], mother: &[f64], child: &[f64]) -> Result<f64> {
        let parents = [father, mother].concat();
        Ok(bilinear_score(&parents, &self.w_parents, child)? + self.bias)
    }
}

pub fn fit_abm(triples: &[TripleSample], lambda: f64, cfg: &SolverConfig) -> Result<AbmModel> {
    check_dims(triples)?;
    let labels = labels_of(triples);
    let parents: Vec<Vec<f64>> = triples
        .iter()
        .map(|t| [t.father.values(), t.mother.values()].concat())
        .collect();
    let children: Vec<&[f64]> = triples.iter().map(|t| t.child.values()).collect();
    let fit = fit_trace_norm_bilinear(&parents, &children, &labels, lambda, cfg)?;
    AbmModel::new(fit.w, fit.bias)
}

pub fn predict_abm(
    model: &AbmModel,
    father: &FeatureVector,
    mother: &FeatureVector,
    child: &FeatureVector,
) -> Result<f64> {
    model
        .score(father.values(), mother.values(), child.values())
        .map(sigmoid)
}
