//! Accelerated proximal gradient with backtracking and monotone restart.

use nalgebra::DVector;

use super::objectives::SmoothObjective;
use super::SolverConfig;
use crate::error::{KinError, Result};

const MIN_STEP: f64 = 1e-30;
// Roundoff allowance in the sufficient-decrease test, relative to f(y).
const DECREASE_SLACK: f64 = 1e-13;

pub(crate) struct ApgOutcome {
    pub x: DVector<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f(x) + g(x)` where `prox(v, t)` returns `argmin_z g(z) +
/// |z - v|^2 / (2t)` together with `g(z)`. `initial_penalty` is `g(x0)`.
///
/// Steps whose composite objective would rise are rejected and the momentum
/// is reset, so the recorded trace never increases.
pub(crate) fn minimize<O, P>(
    obj: &O,
    mut prox: P,
    x0: DVector<f64>,
    initial_penalty: f64,
    cfg: &SolverConfig,
) -> Result<ApgOutcome>
where
    O: SmoothObjective + ?Sized,
    P: FnMut(&DVector<f64>, f64) -> Result<(DVector<f64>, f64)>,
{
    cfg.validate()?;
    let mut x = x0;
    let mut f_x = obj.value(&x) + initial_penalty;
    if !f_x.is_finite() {
        return Err(KinError::Solver("objective not finite at start".into()));
    }
    let mut trace = Vec::with_capacity(cfg.max_iterations + 1);
    trace.push(f_x);

    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut step = cfg.step_size_init;
    let mut extrapolated = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let (f_y, g_y) = obj.value_and_gradient(&y);
        if !f_y.is_finite() {
            return Err(KinError::Solver(format!(
                "objective diverged at iteration {iterations}"
            )));
        }
        let (z, f_z) = loop {
            let (z, pen) = prox(&(&y - &g_y * step), step)?;
            let smooth = obj.value(&z);
            let d = &z - &y;
            let bound = f_y + g_y.dot(&d) + d.norm_squared() / (2.0 * step);
            if smooth <= bound + DECREASE_SLACK * f_y.abs().max(1.0) {
                break (z, smooth + pen);
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(KinError::Solver("line search step underflow".into()));
            }
        };

        if f_z <= f_x {
            let decrease = f_x - f_z;
            let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
            let beta = (theta - 1.0) / theta_next;
            y = &z + (&z - &x) * beta;
            extrapolated = beta > 0.0;
            let previous = f_x;
            x = z;
            f_x = f_z;
            theta = theta_next;
            trace.push(f_x);
            if decrease <= cfg.tolerance * previous.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        } else {
            trace.push(f_x);
            if !extrapolated {
                // A plain proximal step from x failed to decrease: we are at
                // the roundoff floor.
                converged = true;
                break;
            }
            y = x.clone();
            theta = 1.0;
            extrapolated = false;
        }
    }

    Ok(ApgOutcome {
        x,
        trace,
        iterations,
        converged,
    })
}
