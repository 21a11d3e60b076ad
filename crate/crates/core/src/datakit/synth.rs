//! Synthetic triples drawn from a planted model, for recovery checks.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::negatives::{derangement, pair_by};
use crate::error::{KinError, Result};
use crate::facefeat::FeatureVector;
use crate::kinmodels::{ParentRole, TripleSample};
use crate::label::Label;
use crate::seeds::substream_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SynthMode {
    /// Rank-`r` father-child and mother-child matrices; kin when
    /// `f'W_f c + m'W_m c` (plus noise) exceeds the margin.
    Symmetric,
    /// One rank-`r` `2d x d` matrix scoring stacked parents against the child.
    Stacked,
    /// Inside a random rank-`r` subspace the child mixes both parents,
    /// weighted toward a parent chosen per family; outside it the child is
    /// independent. The result is then rotated.
    Resemblance { favored: f64, other: f64 },
    /// `patches` blocks of `d` features. Kin members carry a mean shift and a
    /// shared family trait on `informative` planted patches per role;
    /// negatives are unrelated strangers.
    Patches {
        patches: usize,
        informative: usize,
        shift: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Feature dimension (per patch in patch mode).
    pub d: usize,
    pub rank: usize,
    pub noise_sigma: f64,
    pub margin: f64,
    pub mode: SynthMode,
}

impl SynthConfig {
    pub fn symmetric(d: usize, rank: usize, noise_sigma: f64) -> Self {
        Self {
            d,
            rank,
            noise_sigma,
            margin: 1.5,
            mode: SynthMode::Symmetric,
        }
    }

    pub fn with_mode(mut self, mode: SynthMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank > self.d {
            return Err(KinError::param(
                "rank",
                format!("need 1 <= rank <= d, got rank {} d {}", self.rank, self.d),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(KinError::param("noise_sigma", "must be finite and >= 0"));
        }
        if !self.margin.is_finite() {
            return Err(KinError::param("margin", "must be finite"));
        }
        match self.mode {
            SynthMode::Resemblance { favored, other } => {
                if !(favored >= 0.0 && other >= 0.0 && favored * favored + other * other <= 1.0) {
                    return Err(KinError::param(
                        "resemblance",
                        "weights must be >= 0 with squares summing to <= 1",
                    ));
                }
            }
            SynthMode::Patches {
                patches,
                informative,
                shift,
            } => {
                if patches == 0 || informative == 0 || informative > patches || !shift.is_finite() {
                    return Err(KinError::param(
                        "patches",
                        "need 1 <= informative <= patches and a finite shift",
                    ));
                }
            }
            SynthMode::Symmetric | SynthMode::Stacked => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPatches {
    pub father: Vec<usize>,
    pub mother: Vec<usize>,
    pub child: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub w_father: Option<DMatrix<f64>>,
    pub w_mother: Option<DMatrix<f64>>,
    pub w_parents: Option<DMatrix<f64>>,
    /// Resemblance mode: `child ~ rotation * mix(parents)` on the span of
    /// `subspace` (orthonormal columns).
    pub rotation: Option<DMatrix<f64>>,
    pub subspace: Option<DMatrix<f64>>,
    pub planted: Option<PlantedPatches>,
}

impl GroundTruth {
    /// Noiseless generative score for the bilinear modes.
    pub fn planted_score(&self, f: &[f64], m: &[f64], c: &[f64]) -> Option<f64> {
        let (f, m, c) = (
            DVector::from_column_slice(f),
            DVector::from_column_slice(m),
            DVector::from_column_slice(c),
        );
        if let (Some(wf), Some(wm)) = (&self.w_father, &self.w_mother) {
            return Some(f.dot(&(wf * &c)) + m.dot(&(wm * &c)));
        }
        let wp = self.w_parents.as_ref()?;
        let mut p = f.clone().resize_vertically(f.len() + m.len(), 0.0);
        p.rows_mut(f.len(), m.len()).copy_from(&m);
        Some(p.dot(&(wp * &c)))
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub positives: Vec<TripleSample>,
    pub negatives: Vec<TripleSample>,
    pub truth: GroundTruth,
    /// Resemblance mode: the parent each family's child takes after.
    pub favored: Vec<ParentRole>,
}

impl SynthData {
    /// Positives followed by negatives.
    pub fn triples(&self) -> Vec<TripleSample> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .cloned()
            .collect()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(r, c, gaussian(rng, r * c))
}

fn low_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, rows, rank) * gaussian_matrix(rng, cols, rank).transpose()
}

fn flat(v: Vec<f64>) -> FeatureVector {
    FeatureVector::flat(v).expect("generated features are finite and non-empty")
}

/// A planted model, fixed by its seed, from which any number of datasets
/// can be drawn.
#[derive(Clone, Debug)]
pub struct SynthGenerator {
    cfg: SynthConfig,
    truth: GroundTruth,
}

const MAX_TRIES_PER_SAMPLE: usize = 100_000;

impl SynthGenerator {
    pub fn new(cfg: SynthConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "truth"));
        let d = cfg.d;
        let mut truth = GroundTruth {
            w_father: None,
            w_mother: None,
            w_parents: None,
            rotation: None,
            subspace: None,
            planted: None,
        };
        match cfg.mode {
            SynthMode::Symmetric => {
                let wf = low_rank(&mut rng, d, d, cfg.rank);
                let wm = low_rank(&mut rng, d, d, cfg.rank);
                // Unit score variance over independent standard members.
                let scale = (wf.norm_squared() + wm.norm_squared()).sqrt();
                truth.w_father = Some(wf / scale);
                truth.w_mother = Some(wm / scale);
            }
            SynthMode::Stacked => {
                let wp = low_rank(&mut rng, 2 * d, d, cfg.rank);
                let scale = wp.norm();
                truth.w_parents = Some(wp / scale);
            }
            SynthMode::Resemblance { .. } => {
                truth.rotation = Some(gaussian_matrix(&mut rng, d, d).qr().q());
                truth.subspace = Some(gaussian_matrix(&mut rng, d, cfg.rank).qr().q());
            }
            SynthMode::Patches {
                patches,
                informative,
                ..
            } => {
                let mut pick = || {
                    let mut v = sample_indices(&mut rng, patches, informative).into_vec();
                    v.sort_unstable();
                    v
                };
                truth.planted = Some(PlantedPatches {
                    father: pick(),
                    mother: pick(),
                    child: pick(),
                });
            }
        }
        Ok(Self { cfg, truth })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// `n_pos` positive families and as many negatives. Family ids are
    /// `{prefix}{index}`.
    pub fn sample_with_prefix(&self, n_pos: usize, seed: u64, prefix: &str) -> Result<SynthData> {
        if n_pos < 2 {
            return Err(KinError::TooFewFamilies {
                needed: 2,
                got: n_pos,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = |i: usize| format!("{prefix}{i:05}");
        let mut favored = Vec::new();
        let (positives, negatives) = match self.cfg.mode {
            SynthMode::Symmetric | SynthMode::Stacked => {
                let pos = self.margin_positives(n_pos, &mut rng, &id)?;
                let neg = self.repaired_negatives(&pos, &mut rng)?;
                (pos, neg)
            }
            SynthMode::Resemblance {
                favored: a,
                other: b,
            } => {
                let q = self
                    .truth
                    .rotation
                    .as_ref()
                    .expect("resemblance truth has a rotation");
                let u = self
                    .truth
                    .subspace
                    .as_ref()
                    .expect("resemblance truth has a subspace");
                let proj = u * u.transpose();
                let d = self.cfg.d;
                let rest = (1.0 - a * a - b * b).max(0.0).sqrt();
                let mut pos = Vec::with_capacity(n_pos);
                for i in 0..n_pos {
                    let f = DVector::from_vec(gaussian(&mut rng, d));
                    let m = DVector::from_vec(gaussian(&mut rng, d));
                    let role = if rng.random_bool(0.5) {
                        ParentRole::Father
                    } else {
                        ParentRole::Mother
                    };
                    let (fav, oth) = match role {
                        ParentRole::Father => (&f, &m),
                        ParentRole::Mother => (&m, &f),
                    };
                    let z = DVector::from_vec(gaussian(&mut rng, d));
                    let mix = &proj * (fav * a + oth * b + &z * rest) + &z - &proj * &z;
                    let eps = DVector::from_vec(gaussian(&mut rng, d));
                    let c = q * mix + eps * self.cfg.noise_sigma;
                    favored.push(role);
                    pos.push(TripleSample::new(
                        flat(f.data.into()),
                        flat(m.data.into()),
                        flat(c.data.into()),
                        Label::Kin,
                        id(i),
                    )?);
                }
                let sigma = derangement(n_pos, &mut rng)?;
                let neg = pair_by(&pos, &sigma);
                (pos, neg)
            }
            SynthMode::Patches {
                patches,
                informative: _,
                shift,
            } => {
                let planted = self
                    .truth
                    .planted
                    .as_ref()
                    .expect("patch truth has planted sets");
                let d = self.cfg.d;
                let ids: Vec<usize> = (0..patches).collect();
                let member = |rng: &mut ChaCha8Rng, set: Option<(&[usize], &[f64])>| {
                    let mut v = gaussian(rng, patches * d);
                    if let Some((set, trait_)) = set {
                        for &p in set {
                            for (x, t) in v[p * d..(p + 1) * d].iter_mut().zip(trait_) {
                                *x += shift + t;
                            }
                        }
                    }
                    FeatureVector::new(v, ids.clone()).expect("finite")
                };
                let mut pos = Vec::with_capacity(n_pos);
                for i in 0..n_pos {
                    let trait_: Vec<f64> = gaussian(&mut rng, d).iter().map(|t| 0.5 * t).collect();
                    let f = member(&mut rng, Some((&planted.father, &trait_)));
                    let m = member(&mut rng, Some((&planted.mother, &trait_)));
                    let c = member(&mut rng, Some((&planted.child, &trait_)));
                    pos.push(TripleSample::new(f, m, c, Label::Kin, id(i))?);
                }
                let mut neg = Vec::with_capacity(n_pos);
                for i in 0..n_pos {
                    let f = member(&mut rng, None);
                    let m = member(&mut rng, None);
                    let c = member(&mut rng, None);
                    neg.push(TripleSample::new(
                        f,
                        m,
                        c,
                        Label::NotKin,
                        format!("{prefix}stranger{i:05}"),
                    )?);
                }
                (pos, neg)
            }
        };
        Ok(SynthData {
            positives,
            negatives,
            truth: self.truth.clone(),
            favored,
        })
    }

    pub fn sample(&self, n_pos: usize, seed: u64) -> Result<SynthData> {
        self.sample_with_prefix(n_pos, seed, "synth")
    }

    fn margin_positives(
        &self,
        n_pos: usize,
        rng: &mut ChaCha8Rng,
        id: &dyn Fn(usize) -> String,
    ) -> Result<Vec<TripleSample>> {
        let d = self.cfg.d;
        let mut pos = Vec::with_capacity(n_pos);
        let mut tries = 0;
        while pos.len() < n_pos {
            tries += 1;
            if tries > MAX_TRIES_PER_SAMPLE * n_pos {
                return Err(KinError::param("margin", "too few draws clear the margin"));
            }
            let f = gaussian(rng, d);
            let m = gaussian(rng, d);
            let c = gaussian(rng, d);
            let s = self.truth.planted_score(&f, &m, &c).unwrap();
            let eps: f64 = rng.sample(StandardNormal);
            if s + self.cfg.noise_sigma * eps > self.cfg.margin {
                pos.push(TripleSample::new(
                    flat(f),
                    flat(m),
                    flat(c),
                    Label::Kin,
                    id(pos.len()),
                )?);
            }
        }
        Ok(pos)
    }

    /// A derangement of children, then pairwise child swaps until no
    /// negative clears the margin without noise.
    fn repaired_negatives(
        &self,
        pos: &[TripleSample],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<TripleSample>> {
        let n = pos.len();
        let mut sigma = derangement(n, rng)?;
        let score_of = |i: usize, j: usize| {
            self.truth
                .planted_score(
                    pos[i].father.values(),
                    pos[i].mother.values(),
                    pos[j].child.values(),
                )
                .unwrap()
        };
        for i in 0..n {
            let mut tries = 0;
            while score_of(i, sigma[i]) > self.cfg.margin {
                tries += 1;
                if tries > MAX_TRIES_PER_SAMPLE {
                    return Err(KinError::param(
                        "margin",
                        "cannot pair negatives below the margin",
                    ));
                }
                let j = rng.random_range(0..n);
                let (ci, cj) = (sigma[i], sigma[j]);
                if j == i || cj == i || ci == j {
                    continue;
                }
                if score_of(i, cj) <= self.cfg.margin && score_of(j, ci) <= self.cfg.margin {
                    sigma.swap(i, j);
                }
            }
        }
        Ok(pair_by(pos, &sigma))
    }
}

/// Planted symmetric data: `n_pos` positives and as many negatives.
pub fn synth_generate(
    d: usize,
    n_pos: usize,
    rank: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SynthData> {
    SynthGenerator::new(SynthConfig::symmetric(d, rank, noise_sigma), seed)?
        .sample(n_pos, substream_seed(seed, "synth"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_shapes_rejected() {
        assert!(synth_generate(4, 10, 5, 0.0, 1).is_err());
        assert!(synth_generate(4, 10, 0, 0.0, 1).is_err());
        assert!(synth_generate(4, 1, 2, 0.0, 1).is_err());
        assert!(synth_generate(4, 10, 2, -1.0, 1).is_err());
    }

    #[test]
    fn noiseless_classes_split_at_margin() {
        let data = synth_generate(6, 50, 2, 0.0, 9).unwrap();
        assert_eq!(data.positives.len(), 50);
        assert_eq!(data.negatives.len(), 50);
        let score = |t: &TripleSample| {
            data.truth
                .planted_score(t.father.values(), t.mother.values(), t.child.values())
                .unwrap()
        };
        assert!(data.positives.iter().all(|t| score(t) > 1.5));
        assert!(data.negatives.iter().all(|t| score(t) <= 1.5));
    }

    #[test]
    fn stacked_truth_is_low_rank() {
        let cfg = SynthConfig::symmetric(5, 2, 0.1).with_mode(SynthMode::Stacked);
        let g = SynthGenerator::new(cfg, 4).unwrap();
        let wp = g.truth().w_parents.as_ref().unwrap();
        assert_eq!(wp.shape(), (10, 5));
        let sv = wp.singular_values();
        assert!(sv.iter().filter(|&&s| s > 1e-9).count() == 2);
        g.sample(20, 1).unwrap();
    }
}
