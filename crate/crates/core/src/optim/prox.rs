use nalgebra::{DMatrix, DVector};

use crate::error::{KinError, Result};

fn check_threshold(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(KinError::param(
            "tau",
            format!("{tau} must be finite and >= 0"),
        ))
    }
}

/// Elementwise `sign(v) * max(|v| - tau, 0)`.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    check_threshold(tau)?;
    Ok(v.map(|x| shrink(x, tau)))
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(KinError::NonFinite(
            "matrix contains NaN or infinity".into(),
        ));
    }
    let s = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| KinError::Solver("SVD did not converge".into()))?;
    match (s.u, s.v_t) {
        (Some(u), Some(v_t)) => Ok(Svd {
            u,
            singular_values: s.singular_values,
            v_t,
        }),
        _ => Err(KinError::Solver("SVD factors missing".into())),
    }
}

/// Singular values of `m`, in no particular order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(svd(m)?.singular_values)
}

/// Proximal operator of `tau * ||.||_*`; also returns the trace norm of the
/// result.
pub(crate) fn prox_trace_norm_with_norm(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    check_threshold(tau)?;
    let Svd {
        u,
        singular_values,
        v_t,
    } = svd(m)?;
    let keep: Vec<(usize, f64)> = singular_values
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| (s > tau).then_some((i, s - tau)))
        .collect();
    if keep.is_empty() {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), 0.0));
    }
    let mut left = DMatrix::zeros(m.nrows(), keep.len());
    let mut right = DMatrix::zeros(keep.len(), m.ncols());
    for (k, &(i, s)) in keep.iter().enumerate() {
        left.set_column(k, &(u.column(i) * s));
        right.set_row(k, &v_t.row(i));
    }
    Ok((left * right, keep.iter().map(|&(_, s)| s).sum()))
}

/// Soft-thresholds the singular values of `m` by `tau`:
/// `U diag(max(s_i - tau, 0)) V^T`.
pub fn prox_trace_norm(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    prox_trace_norm_with_norm(m, tau).map(|(p, _)| p)
}

pub fn trace_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.sum())
}
