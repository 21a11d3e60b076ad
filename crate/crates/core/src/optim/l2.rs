use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::apg;
use super::objectives::{sigmoid, RidgeLogistic, SmoothObjective};
use super::SolverConfig;
use crate::error::{KinError, Result};
use crate::label::Label;

// Above this many features the Newton system gets expensive; fall back to
// the first-order solver.
const NEWTON_MAX_DIM: usize = 256;

/// Linear logistic classifier `sigma(<w, z> + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticLinear {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticLinear {
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.weights.len() {
            return Err(KinError::DimensionMismatch(format!(
                "combiner expects {} inputs, got {}",
                self.weights.len(),
                z.len()
            )));
        }
        Ok(self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn probability(&self, z: &[f64]) -> Result<f64> {
        self.score(z).map(sigmoid)
    }
}

/// Fits `min sum_i log(1 + exp(-y_i (<w, z_i> + b))) + reg |w|^2` with the
/// bias unpenalized.
pub fn fit_l2_logistic<A: AsRef<[f64]>>(
    samples: &[A],
    labels: &[Label],
    reg: f64,
    cfg: &SolverConfig,
) -> Result<LogisticLinear> {
    let obj = RidgeLogistic::new(samples, labels, reg)?;
    let x = if obj.features() <= NEWTON_MAX_DIM {
        newton(&obj)?
    } else {
        apg::minimize(
            &obj,
            |v, _| Ok((v.clone(), 0.0)),
            DVector::zeros(obj.dim()),
            0.0,
            cfg,
        )?
        .x
    };
    let p = obj.features();
    Ok(LogisticLinear {
        weights: x.rows(0, p).iter().copied().collect(),
        bias: x[p],
    })
}

fn newton(obj: &RidgeLogistic) -> Result<DVector<f64>> {
    let p = obj.features();
    let n = obj.samples.nrows();
    let mut x = DVector::zeros(p + 1);
    let mut f = obj.value(&x);
    // [z_i, 1] rows
    let aug = DMatrix::from_fn(
        n,
        p + 1,
        |i, j| if j < p { obj.samples[(i, j)] } else { 1.0 },
    );

    for _ in 0..200 {
        let (_, grad) = obj.value_and_gradient(&x);
        let margins = obj.margins(&x);
        let mut weighted = aug.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            let s = sigmoid(obj.signs[i] * margins[i]);
            row *= s * (1.0 - s);
        }
        let mut hess = aug.tr_mul(&weighted);
        for j in 0..p {
            hess[(j, j)] += 2.0 * obj.reg;
        }
        for j in 0..=p {
            hess[(j, j)] += 1e-12;
        }
        let dir = match hess.cholesky() {
            Some(ch) => ch.solve(&(-&grad)),
            None => -&grad,
        };
        let slope = grad.dot(&dir);
        if -slope / 2.0 <= 1e-16 * f.abs().max(1.0) {
            break;
        }
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand = &x + &dir * t;
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * t * slope {
                x = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(KinError::Solver("logistic combiner diverged".into()))
    }
}
