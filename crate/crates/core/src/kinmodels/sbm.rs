use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    bilinear_score, check_dims, compute_priors, labels_of, stabilize_priors, ParentRole, PriorPair,
    TripleSample, COMBINER_REG, PRIOR_ANCHOR,
};
use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::label::{require_both_classes, Label};
use crate::optim::{fit_l2_logistic, fit_trace_norm_bilinear, sigmoid, SolverConfig};

/// One-dimensional logistic calibration `sigma(slope * s + intercept)` used
/// for pair-mode (single parent) predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub slope: f64,
    pub intercept: f64,
}

impl PairCalibration {
    fn fit(scores: &[f64], labels: &[Label]) -> Result<Self> {
        let z: Vec<[f64; 1]> = scores.iter().map(|&s| [s]).collect();
        let fit = fit_l2_logistic(&z, labels, COMBINER_REG, &SolverConfig::default())?;
        Ok(Self {
            slope: fit.weights[0],
            intercept: fit.bias,
        })
    }

    pub fn probability(&self, score: f64) -> f64 {
        sigmoid(self.slope * score + self.intercept)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbmModel {
    pub w_father: DMatrix<f64>,
    pub w_mother: DMatrix<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub bias: f64,
    pub pair_father: PairCalibration,
    pub pair_mother: PairCalibration,
}

impl SbmModel {
    pub fn dim(&self) -> usize {
        self.w_father.nrows()
    }

    pub fn scores(&self, father: &[f64], mother: &[f64], child: &[f64]) -> Result<(f64, f64)> {
        Ok((
            bilinear_score(father, &self.w_father, child)?,
            bilinear_score(mother, &self.w_mother, child)?,
        ))
    }

    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        Ok(match role {
            ParentRole::Father => self.pair_father.probability(bilinear_score(
                parent.values(),
                &self.w_father,
                child.values(),
            )?),
            ParentRole::Mother => self.pair_mother.probability(bilinear_score(
                parent.values(),
                &self.w_mother,
                child.values(),
            )?),
        })
    }
}

struct PairFits {
    w_father: DMatrix<f64>,
    w_mother: DMatrix<f64>,
}

/// Fits `W_f` on `(w_i x_f_i, x_c_i)` and `W_m` on `(v_i x_m_i, x_c_i)`,
/// where the weights default to one.
fn fit_pairs(
    triples: &[TripleSample],
    labels: &[Label],
    weights: Option<&[PriorPair]>,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<PairFits> {
    let children: Vec<&[f64]> = triples.iter().map(|t| t.child.values()).collect();
    let (fathers, mothers): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match weights {
        None => triples
            .iter()
            .map(|t| (t.father.values().to_vec(), t.mother.values().to_vec()))
            .unzip(),
        Some(w) => triples
            .iter()
            .zip(w)
            .map(|(t, p)| {
                (
                    t.father.values().iter().map(|v| v * p.p_fc).collect(),
                    t.mother.values().iter().map(|v| v * p.p_mc).collect(),
                )
            })
            .unzip(),
    };
    let (f, m) = rayon::join(
        || fit_trace_norm_bilinear(&fathers, &children, labels, lambda, cfg),
        || fit_trace_norm_bilinear(&mothers, &children, labels, lambda, cfg),
    );
    Ok(PairFits {
        w_father: f?.w,
        w_mother: m?.w,
    })
}

fn raw_scores(
    triples: &[TripleSample],
    w_f: &DMatrix<f64>,
    w_m: &DMatrix<f64>,
) -> Result<Vec<(f64, f64)>> {
    triples
        .iter()
        .map(|t| {
            Ok((
                bilinear_score(t.father.values(), w_f, t.child.values())?,
                bilinear_score(t.mother.values(), w_m, t.child.values())?,
            ))
        })
        .collect()
}

struct Combined {
    beta1: f64,
    beta2: f64,
    bias: f64,
}

fn fit_combiner(evidence: &[(f64, f64)], labels: &[Label]) -> Result<Combined> {
    let z: Vec<[f64; 2]> = evidence.iter().map(|&(a, b)| [a, b]).collect();
    let fit = fit_l2_logistic(&z, labels, COMBINER_REG, &SolverConfig::default())?;
    Ok(Combined {
        beta1: fit.weights[0],
        beta2: fit.weights[1],
        bias: fit.bias,
    })
}

fn fit_calibrations(
    scores: &[(f64, f64)],
    labels: &[Label],
) -> Result<(PairCalibration, PairCalibration)> {
    let sf: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let sm: Vec<f64> = scores.iter().map(|s| s.1).collect();
    Ok((
        PairCalibration::fit(&sf, labels)?,
        PairCalibration::fit(&sm, labels)?,
    ))
}

/// Symmetric bilinear model: independent trace-norm fits for father-child
/// and mother-child, then an L2 logistic combiner over `(s_f, s_m)`.
pub fn fit_sbm(triples: &[TripleSample], lambda: f64, cfg: &SolverConfig) -> Result<SbmModel> {
    check_dims(triples)?;
    let labels = labels_of(triples);
    require_both_classes(&labels)?;
    let PairFits { w_father, w_mother } = fit_pairs(triples, &labels, None, lambda, cfg)?;
    let scores = raw_scores(triples, &w_father, &w_mother)?;
    let c = fit_combiner(&scores, &labels)?;
    let (pair_father, pair_mother) = fit_calibrations(&scores, &labels)?;
    Ok(SbmModel {
        w_father,
        w_mother,
        beta1: c.beta1,
        beta2: c.beta2,
        bias: c.bias,
        pair_father,
        pair_mother,
    })
}

pub fn predict_sbm(
    model: &SbmModel,
    father: &FeatureVector,
    mother: &FeatureVector,
    child: &FeatureVector,
) -> Result<f64> {
    let (s_f, s_m) = model.scores(father.values(), mother.values(), child.values())?;
    Ok(sigmoid(model.beta1 * s_f + model.beta2 * s_m + model.bias))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RsbmModel {
    pub w_father: DMatrix<f64>,
    pub w_mother: DMatrix<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub bias: f64,
    pub alpha: f64,
    pub p0: f64,
    pub pair_father: PairCalibration,
    pub pair_mother: PairCalibration,
}

impl RsbmModel {
    pub fn dim(&self) -> usize {
        self.w_father.nrows()
    }

    /// Raw similarities, stabilized priors, and relative scores `p * s`.
    pub fn relative_scores(
        &self,
        father: &[f64],
        mother: &[f64],
        child: &[f64],
    ) -> Result<(f64, f64)> {
        let s_f = bilinear_score(father, &self.w_father, child)?;
        let s_m = bilinear_score(mother, &self.w_mother, child)?;
        relative(s_f, s_m, self.alpha)
    }

    /// Pair mode uses the raw similarity of the given parent, since the
    /// prior needs both parents.
    pub fn predict_pair(
        &self,
        parent: &FeatureVector,
        child: &FeatureVector,
        role: ParentRole,
    ) -> Result<f64> {
        Ok(match role {
            ParentRole::Father => self.pair_father.probability(bilinear_score(
                parent.values(),
                &self.w_father,
                child.values(),
            )?),
            ParentRole::Mother => self.pair_mother.probability(bilinear_score(
                parent.values(),
                &self.w_mother,
                child.values(),
            )?),
        })
    }
}

fn relative(s_f: f64, s_m: f64, alpha: f64) -> Result<(f64, f64)> {
    let p = stabilize_priors(compute_priors(s_f, s_m), alpha)?;
    Ok((p.p_fc * s_f, p.p_mc * s_m))
}

/// Per-round record of an RSBM fit.
#[derive(Clone, Debug, Default)]
pub struct RsbmTrace {
    /// Priors each round's fit was weighted with.
    pub priors_used: Vec<Vec<PriorPair>>,
    pub w_father: Vec<DMatrix<f64>>,
    pub w_mother: Vec<DMatrix<f64>>,
}

pub fn fit_rsbm(
    triples: &[TripleSample],
    lambda: f64,
    alpha: f64,
    iterations: usize,
    cfg: &SolverConfig,
) -> Result<RsbmModel> {
    fit_rsbm_traced(triples, lambda, alpha, iterations, cfg).map(|(m, _)| m)
}

/// Relative symmetric bilinear model.
///
/// Starting from priors of 1/2 for every sample, each round fits `W_f` and
/// `W_m` with every parent vector scaled by its current prior (which scales
/// that sample's bilinear term), recomputes priors by softmax over the
/// unscaled similarities and pulls them toward 1/2 with weight `alpha`. The
/// combiner is finally fit on the relative scores, computed exactly as at
/// prediction time.
pub fn fit_rsbm_traced(
    triples: &[TripleSample],
    lambda: f64,
    alpha: f64,
    iterations: usize,
    cfg: &SolverConfig,
) -> Result<(RsbmModel, RsbmTrace)> {
    if iterations == 0 {
        return Err(KinError::param("T", "need at least one iteration"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(KinError::param("alpha", format!("{alpha} not in [0, 1]")));
    }
    check_dims(triples)?;
    let labels = labels_of(triples);
    require_both_classes(&labels)?;

    let mut priors = vec![PriorPair::EVEN; triples.len()];
    let mut trace = RsbmTrace::default();
    let mut fits = None;
    for _ in 0..iterations {
        let f = fit_pairs(triples, &labels, Some(&priors), lambda, cfg)?;
        trace.priors_used.push(priors.clone());
        let scores = raw_scores(triples, &f.w_father, &f.w_mother)?;
        priors = scores
            .iter()
            .map(|&(s_f, s_m)| stabilize_priors(compute_priors(s_f, s_m), alpha))
            .collect::<Result<_>>()?;
        trace.w_father.push(f.w_father.clone());
        trace.w_mother.push(f.w_mother.clone());
        fits = Some((f, scores));
    }
    let (PairFits { w_father, w_mother }, scores) = fits.expect("iterations >= 1");

    let rel: Vec<(f64, f64)> = scores
        .iter()
        .map(|&(s_f, s_m)| relative(s_f, s_m, alpha))
        .collect::<Result<_>>()?;
    let c = fit_combiner(&rel, &labels)?;
    let (pair_father, pair_mother) = fit_calibrations(&scores, &labels)?;
    let model = RsbmModel {
        w_father,
        w_mother,
        beta1: c.beta1,
        beta2: c.beta2,
        bias: c.bias,
        alpha,
        p0: PRIOR_ANCHOR,
        pair_father,
        pair_mother,
    };
    Ok((model, trace))
}

pub fn predict_rsbm(
    model: &RsbmModel,
    father: &FeatureVector,
    mother: &FeatureVector,
    child: &FeatureVector,
) -> Result<f64> {
    let (r_f, r_m) = model.relative_scores(father.values(), mother.values(), child.values())?;
    Ok(sigmoid(model.beta1 * r_f + model.beta2 * r_m + model.bias))
}
