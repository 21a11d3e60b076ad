use nalgebra::{DMatrix, DVector};

use crate::error::{KinError, Result};
use crate::label::{require_both_classes, Label};

/// Numerically stable `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^-x)`, evaluated without overflow for any
/// finite `x`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A differentiable objective over a flat parameter vector.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
}

pub(crate) fn design_matrix<T: AsRef<[f64]>>(rows: &[T], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.as_ref().len());
    if p == 0 {
        return Err(KinError::DimensionMismatch(format!(
            "{what}: empty vectors"
        )));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.as_ref().len() != p) {
        return Err(KinError::DimensionMismatch(format!(
            "{what}[{i}] has length {}, expected {p}",
            r.as_ref().len()
        )));
    }
    let m = DMatrix::from_fn(n, p, |i, j| rows[i].as_ref()[j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(KinError::NonFinite(format!(
            "{what} contains NaN or infinity"
        )));
    }
    Ok(m)
}

fn label_signs(labels: &[Label], n: usize) -> Result<DVector<f64>> {
    if labels.len() != n {
        return Err(KinError::DimensionMismatch(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(KinError::param("samples", "need at least two samples"));
    }
    require_both_classes(labels)?;
    Ok(DVector::from_iterator(n, labels.iter().map(|l| l.sign())))
}

/// Sum of logistic losses over `margins` and the per-sample derivative
/// `d loss_i / d margin_i`.
fn logistic_terms(margins: &DVector<f64>, signs: &DVector<f64>) -> (f64, DVector<f64>) {
    let mut loss = 0.0;
    let g = DVector::from_fn(margins.len(), |i, _| {
        let ym = signs[i] * margins[i];
        loss += softplus(-ym);
        -signs[i] * sigmoid(-ym)
    });
    (loss, g)
}

fn logistic_loss(margins: &DVector<f64>, signs: &DVector<f64>) -> f64 {
    margins
        .iter()
        .zip(signs.iter())
        .map(|(m, y)| softplus(-y * m))
        .sum()
}

/// `sum_i log(1 + exp(-y_i (l_i^T W r_i + b)))` over parameters
/// `[vec(W) (column-major); b]`.
#[derive(Clone, Debug)]
pub struct BilinearLogistic {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    signs: DVector<f64>,
}

impl BilinearLogistic {
    pub fn new<L: AsRef<[f64]>, R: AsRef<[f64]>>(
        left: &[L],
        right: &[R],
        labels: &[Label],
    ) -> Result<Self> {
        if left.len() != right.len() {
            return Err(KinError::DimensionMismatch(format!(
                "{} left vectors, {} right vectors",
                left.len(),
                right.len()
            )));
        }
        let signs = label_signs(labels, left.len())?;
        Ok(Self {
            left: design_matrix(left, "left")?,
            right: design_matrix(right, "right")?,
            signs,
        })
    }

    pub fn rows(&self) -> usize {
        self.left.ncols()
    }

    pub fn cols(&self) -> usize {
        self.right.ncols()
    }

    pub fn samples(&self) -> usize {
        self.signs.len()
    }

    pub fn pack(&self, w: &DMatrix<f64>, bias: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        x.rows_mut(0, w.len()).copy_from_slice(w.as_slice());
        x[w.len()] = bias;
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> (DMatrix<f64>, f64) {
        let k = self.rows() * self.cols();
        (
            DMatrix::from_column_slice(self.rows(), self.cols(), &x.as_slice()[..k]),
            x[k],
        )
    }

    pub fn margins(&self, w: &DMatrix<f64>, bias: f64) -> DVector<f64> {
        let lw = &self.left * w;
        lw.component_mul(&self.right).column_sum().add_scalar(bias)
    }
}

impl SmoothObjective for BilinearLogistic {
    fn dim(&self) -> usize {
        self.rows() * self.cols() + 1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let (w, b) = self.unpack(x);
        logistic_loss(&self.margins(&w, b), &self.signs)
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (w, b) = self.unpack(x);
        let (loss, g) = logistic_terms(&self.margins(&w, b), &self.signs);
        let mut scaled = self.right.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= g[i];
        }
        let grad_w = self.left.tr_mul(&scaled);
        (loss, self.pack(&grad_w, g.sum()))
    }
}

/// `sum_i log(1 + exp(-y_i <u, a_i>))`, no intercept.
#[derive(Clone, Debug)]
pub struct LinearLogistic {
    samples: DMatrix<f64>,
    signs: DVector<f64>,
}

impl LinearLogistic {
    pub fn new<A: AsRef<[f64]>>(samples: &[A], labels: &[Label]) -> Result<Self> {
        let signs = label_signs(labels, samples.len())?;
        Ok(Self {
            samples: design_matrix(samples, "samples")?,
            signs,
        })
    }
}

impl SmoothObjective for LinearLogistic {
    fn dim(&self) -> usize {
        self.samples.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        logistic_loss(&(&self.samples * x), &self.signs)
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (loss, g) = logistic_terms(&(&self.samples * x), &self.signs);
        (loss, self.samples.tr_mul(&g))
    }
}

/// `sum_i log(1 + exp(-y_i (<w, z_i> + b))) + reg * |w|^2` over `[w; b]`.
#[derive(Clone, Debug)]
pub struct RidgeLogistic {
    pub(crate) samples: DMatrix<f64>,
    pub(crate) signs: DVector<f64>,
    pub(crate) reg: f64,
}

impl RidgeLogistic {
    pub fn new<A: AsRef<[f64]>>(samples: &[A], labels: &[Label], reg: f64) -> Result<Self> {
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(KinError::param(
                "reg",
                format!("{reg} must be finite and >= 0"),
            ));
        }
        let signs = label_signs(labels, samples.len())?;
        Ok(Self {
            samples: design_matrix(samples, "samples")?,
            signs,
            reg,
        })
    }

    pub(crate) fn features(&self) -> usize {
        self.samples.ncols()
    }

    pub(crate) fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.features();
        (&self.samples * x.rows(0, p)).add_scalar(x[p])
    }
}

impl SmoothObjective for RidgeLogistic {
    fn dim(&self) -> usize {
        self.features() + 1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let p = self.features();
        logistic_loss(&self.margins(x), &self.signs) + self.reg * x.rows(0, p).norm_squared()
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.features();
        let (loss, g) = logistic_terms(&self.margins(x), &self.signs);
        let w = x.rows(0, p);
        let mut grad = DVector::zeros(p + 1);
        grad.rows_mut(0, p)
            .copy_from(&(self.samples.tr_mul(&g) + w * (2.0 * self.reg)));
        grad[p] = g.sum();
        (loss + self.reg * w.norm_squared(), grad)
    }
}
