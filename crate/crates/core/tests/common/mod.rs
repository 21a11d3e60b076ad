//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics.
#![allow(dead_code)]

use kinverify::facefeat::FeatureVector;
use kinverify::kinmodels::TripleSample;
use kinverify::Label;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn labels_from(signs: &[i8]) -> Vec<Label> {
    signs.iter().map(|&s| Label::try_from(s).unwrap()).collect()
}

/// Singular triplets of `a` by one-sided Jacobi rotations on plain vectors.
/// Returns `(sigma_i, u_i, v_i)` with `a = sum sigma_i u_i v_i^T`.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    let (m, n) = a.shape();
    if m < n {
        return jacobi_svd(&a.transpose())
            .into_iter()
            .map(|(s, u, v)| (s, v, u))
            .collect();
    }
    // cols[j] is column j of a*V; v[j] is column j of V.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for vecs in [&mut cols, &mut v] {
                    let (lo, hi) = vecs.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - s * yq;
                        *y = s * xp + c * yq;
                    }
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    (0..n)
        .map(|j| {
            let sigma = dot(&cols[j], &cols[j]).sqrt();
            let u = if sigma > 0.0 {
                cols[j].iter().map(|x| x / sigma).collect()
            } else {
                vec![0.0; m]
            };
            (sigma, u, v[j].clone())
        })
        .collect()
}

/// Singular value soft-thresholding rebuilt from the Jacobi triplets.
pub fn prox_oracle(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (sigma, u, v) in jacobi_svd(a) {
        let s = (sigma - tau).max(0.0);
        if s == 0.0 {
            continue;
        }
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                out[(i, j)] += s * u[i] * v[j];
            }
        }
    }
    out
}

pub fn naive_bilinear(a: &[f64], w: &DMatrix<f64>, b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            s += a[i] * w[(i, j)] * b[j];
        }
    }
    s
}

pub fn naive_sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `sum_i log(1 + exp(-y_i (l_i' W r_i + b)))` by loops.
pub fn naive_bilinear_loss(
    left: &[Vec<f64>],
    right: &[Vec<f64>],
    y: &[f64],
    w: &DMatrix<f64>,
    b: f64,
) -> f64 {
    (0..y.len())
        .map(|i| (1.0 + (-y[i] * (naive_bilinear(&left[i], w, &right[i]) + b)).exp()).ln())
        .sum()
}

/// `sum_i log(1 + exp(-y_i <u, a_i>))` by loops.
pub fn naive_linear_loss(a: &[Vec<f64>], y: &[f64], u: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let z: f64 = a[i].iter().zip(u).map(|(p, q)| p * q).sum();
            (1.0 + (-y[i] * z).exp()).ln()
        })
        .sum()
}

/// Mann-Whitney by explicit pairs: ties count one half.
pub fn brute_force_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        if !li.is_kin() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_kin() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Every permutation of `0..n` without fixed points, by recursion.
pub fn all_derangements(n: usize) -> Vec<Vec<usize>> {
    fn go(
        pos: usize,
        n: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if pos == n {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if x != pos && !used[x] {
                used[x] = true;
                cur.push(x);
                go(pos + 1, n, used, cur, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

/// RSBM probability written out line by line.
#[allow(clippy::too_many_arguments)]
pub fn rsbm_oracle(
    f: &[f64],
    m: &[f64],
    c: &[f64],
    w_f: &DMatrix<f64>,
    w_m: &DMatrix<f64>,
    beta1: f64,
    beta2: f64,
    bias: f64,
    alpha: f64,
) -> f64 {
    let s_f = naive_bilinear(f, w_f, c);
    let s_m = naive_bilinear(m, w_m, c);
    let p_f = s_f.exp() / (s_f.exp() + s_m.exp());
    let p_m = s_m.exp() / (s_f.exp() + s_m.exp());
    let p_f = alpha * 0.5 + (1.0 - alpha) * p_f;
    let p_m = alpha * 0.5 + (1.0 - alpha) * p_m;
    naive_sigmoid(beta1 * p_f * s_f + beta2 * p_m * s_m + bias)
}

/// Families with distinct, recognisable members: every coordinate of
/// family `i` encodes `i` and the role.
pub fn tagged_families(n: usize, d: usize) -> Vec<TripleSample> {
    (0..n)
        .map(|i| {
            let v = |role: f64| FeatureVector::flat(vec![i as f64 + role; d]).unwrap();
            TripleSample::new(v(0.1), v(0.2), v(0.3), Label::Kin, format!("fam{i:04}")).unwrap()
        })
        .collect()
}

/// Family index encoded by [`tagged_families`].
pub fn tag_of(v: &FeatureVector) -> usize {
    v.values()[0].floor() as usize
}
