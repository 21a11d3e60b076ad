use super::{check_dims, labels_of, TripleSample, COMBINER_REG};
use crate::error::Result;
use crate::facefeat::FeatureVector;
use crate::optim::{fit_l2_logistic, LogisticLinear, SolverConfig};

/// Baseline: L2 logistic regression on the concatenated `[x_f; x_m; x_c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcatModel {
    pub classifier: LogisticLinear,
}

impl ConcatModel {
    pub fn predict(
        &self,
        father: &FeatureVector,
        mother: &FeatureVector,
        child: &FeatureVector,
    ) -> Result<f64> {
        self.classifier
            .probability(&[father.values(), mother.values(), child.values()].concat())
    }
}

pub fn fit_concat_baseline(triples: &[TripleSample], cfg: &SolverConfig) -> Result<ConcatModel> {
    check_dims(triples)?;
    let z: Vec<Vec<f64>> = triples
        .iter()
        .map(|t| [t.father.values(), t.mother.values(), t.child.values()].concat())
        .collect();
    Ok(ConcatModel {
        classifier: fit_l2_logistic(&z, &labels_of(triples), COMBINER_REG, cfg)?,
    })
}
