//! Regularized logistic regression solvers shared by every model.
//!
//! Two composite problems are solved with the same accelerated proximal
//! gradient loop ([`apg`]):
//!
//! - bilinear logistic loss plus `lambda * ||W||_*` (trace norm), prox is
//!   singular value soft-thresholding;
//! - linear logistic loss plus `gamma * ||u||_1`, prox is elementwise
//!   soft-thresholding.
//!
//! Small L2-regularized logistic fits (score combiners, calibrations) use a
//! damped Newton method instead.

mod apg;
mod l2;
mod objectives;
mod prox;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};
use crate::label::Label;

pub use l2::{fit_l2_logistic, LogisticLinear};
pub use objectives::{
    sigmoid, softplus, BilinearLogistic, LinearLogistic, RidgeLogistic, SmoothObjective,
};
pub use prox::{prox_trace_norm, singular_values, soft_threshold, trace_norm};

/// Trace-norm weight for image-level bilinear fits.
pub const DEFAULT_LAMBDA: f64 = 5.0;
/// Trace-norm weight for per-patch (block-level) fits.
pub const DEFAULT_BLOCK_LAMBDA: f64 = 0.1;
/// L1 weight for the patch-voting pair fits.
pub const DEFAULT_GAMMA: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub step_size_init: f64,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction of its previous value.
    pub tolerance: f64,
    /// Reserved for randomized initialization; all current solvers start at
    /// zero.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_size_init: 1.0,
            tolerance: 1e-7,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(KinError::param("max_iterations", "must be at least 1"));
        }
        if !(self.step_size_init > 0.0 && self.step_size_init.is_finite()) {
            return Err(KinError::param("step_size_init", "must be positive"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(KinError::param("tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceNormFit {
    pub w: DMatrix<f64>,
    pub bias: f64,
    /// Composite objective at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct L1Fit {
    pub u: DVector<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KinError::param(name, format!("{v} must be finite and > 0")))
    }
}

/// Fits `min_{W,b} sum_i log(1 + exp(-y_i (l_i^T W r_i + b))) + lambda ||W||_*`.
///
/// `W` has `left` dimension rows and `right` dimension columns. The bias is
/// unpenalized; both start at zero.
pub fn fit_trace_norm_bilinear<L: AsRef<[f64]>, R: AsRef<[f64]>>(
    left: &[L],
    right: &[R],
    labels: &[Label],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<TraceNormFit> {
    positive("lambda", lambda)?;
    let obj = BilinearLogistic::new(left, right, labels)?;
    let (rows, cols) = (obj.rows(), obj.cols());
    let k = rows * cols;
    let out = apg::minimize(
        &obj,
        |v, step| {
            let w = DMatrix::from_column_slice(rows, cols, &v.as_slice()[..k]);
            let (w, norm) = prox::prox_trace_norm_with_norm(&w, step * lambda)?;
            let mut z = v.clone();
            z.rows_mut(0, k).copy_from_slice(w.as_slice());
            Ok((z, lambda * norm))
        },
        DVector::zeros(obj.dim()),
        0.0,
        cfg,
    )?;
    let (w, bias) = obj.unpack(&out.x);
    Ok(TraceNormFit {
        w,
        bias,
        objective_trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Fits `min_u sum_i log(1 + exp(-y_i <u, a_i>)) + gamma ||u||_1`.
pub fn fit_l1_logistic<A: AsRef<[f64]>>(
    samples: &[A],
    labels: &[Label],
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<L1Fit> {
    positive("gamma", gamma)?;
    let obj = LinearLogistic::new(samples, labels)?;
    let out = apg::minimize(
        &obj,
        |v, step| {
            let tau = step * gamma;
            let z = v.map(|x| prox::shrink(x, tau));
            let norm = z.lp_norm(1);
            Ok((z, gamma * norm))
        },
        DVector::zeros(obj.dim()),
        0.0,
        cfg,
    )?;
    Ok(L1Fit {
        u: out.x,
        objective_trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Largest relative discrepancy between the analytic gradient of `obj` at
/// `point` and central finite differences with step `1e-5`.
///
/// Each component's error is `|analytic - numeric| / max(1, |analytic|,
/// |numeric|)`, so near-zero components are compared absolutely.
pub fn logistic_gradient_check<O: SmoothObjective + ?Sized>(
    obj: &O,
    point: &DVector<f64>,
) -> Result<f64> {
    const H: f64 = 1e-5;
    if point.len() != obj.dim() {
        return Err(KinError::DimensionMismatch(format!(
            "point has {} entries, objective has {}",
            point.len(),
            obj.dim()
        )));
    }
    let (_, analytic) = obj.value_and_gradient(point);
    let mut worst = 0.0f64;
    let mut probe = point.clone();
    for j in 0..point.len() {
        let orig = probe[j];
        probe[j] = orig + H;
        let up = obj.value(&probe);
        probe[j] = orig - H;
        let down = obj.value(&probe);
        probe[j] = orig;
        let numeric = (up - down) / (2.0 * H);
        let scale = 1f64.max(analytic[j].abs()).max(numeric.abs());
        worst = worst.max((analytic[j] - numeric).abs() / scale);
    }
    Ok(worst)
}

/// Optimality residual of a trace-norm fit: the operator norm of the
/// unit-step proximal gradient mapping `W - prox(W - grad_W, lambda)`,
/// combined (max) with the absolute bias gradient. Zero exactly at the
/// minimizer.
pub fn trace_norm_kkt_residual(
    obj: &BilinearLogistic,
    w: &DMatrix<f64>,
    bias: f64,
    lambda: f64,
) -> Result<f64> {
    let (_, grad) = obj.value_and_gradient(&obj.pack(w, bias));
    let (grad_w, grad_b) = obj.unpack(&grad);
    let mapped = w - prox_trace_norm(&(w - grad_w), lambda)?;
    let op_norm = singular_values(&mapped)?.max();
    Ok(op_norm.max(grad_b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_problem() -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Label>) {
        let left = vec![
            vec![1.0, 0.5],
            vec![-0.3, 1.2],
            vec![0.7, -0.8],
            vec![-1.1, -0.2],
            vec![0.2, 0.9],
            vec![0.4, -0.6],
        ];
        let right = vec![
            vec![0.8, -0.1, 0.3],
            vec![0.2, 0.9, -0.5],
            vec![-0.6, 0.4, 0.1],
            vec![0.3, -0.7, 0.8],
            vec![-0.2, 0.5, 0.6],
            vec![0.9, 0.1, -0.4],
        ];
        let labels = [1, -1, 1, -1, -1, 1]
            .iter()
            .map(|&v| Label::try_from(v as i8).unwrap())
            .collect();
        (left, right, labels)
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_fit_rejects_bad_lambda_and_labels() {
        let (l, r, y) = tiny_problem();
        let cfg = SolverConfig::default();
        assert!(fit_trace_norm_bilinear(&l, &r, &y, 0.0, &cfg).is_err());
        assert!(fit_trace_norm_bilinear(&l, &r, &y, -1.0, &cfg).is_err());
        let ones = vec![Label::Kin; l.len()];
        assert!(matches!(
            fit_trace_norm_bilinear(&l, &r, &ones, 1.0, &cfg),
            Err(KinError::SingleClass)
        ));
        assert!(matches!(
            fit_trace_norm_bilinear(&l[..5], &r, &y, 1.0, &cfg),
            Err(KinError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn trace_fit_trace_is_monotone_and_deterministic() {
        let (l, r, y) = tiny_problem();
        let cfg = SolverConfig::default();
        let a = fit_trace_norm_bilinear(&l, &r, &y, 0.05, &cfg).unwrap();
        let b = fit_trace_norm_bilinear(&l, &r, &y, 0.05, &cfg).unwrap();
        assert_eq!(a, b);
        for pair in a.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
        assert!(a.objective_trace.last().unwrap() < &a.objective_trace[0]);
    }

    #[test]
    fn l1_fit_huge_gamma_is_zero() {
        let (l, _, y) = tiny_problem();
        let fit = fit_l1_logistic(&l, &y, 1e6, &SolverConfig::default()).unwrap();
        assert!(fit.u.iter().all(|&v| v == 0.0));
        assert!(fit_l1_logistic(&l, &y, 0.0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn gradient_check_zero_point_balanced_bias() {
        let (l, r, y) = tiny_problem();
        let obj = BilinearLogistic::new(&l, &r, &y).unwrap();
        let (_, g) = obj.value_and_gradient(&DVector::zeros(obj.dim()));
        assert!(g[obj.dim() - 1].abs() < 1e-10);
        assert!(logistic_gradient_check(&obj, &DVector::zeros(obj.dim())).unwrap() < 1e-5);
    }
}
