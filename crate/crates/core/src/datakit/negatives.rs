use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KinError, Result};
use crate::kinmodels::TripleSample;
use crate::label::Label;

/// Uniformly random permutation of `0..n` with no fixed points, by
/// rejection over shuffles (about e tries on average).
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(KinError::param(
            "families",
            format!("a derangement needs n >= 2, got {n}"),
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Family id of the negative pairing the parents of `parents` with the
/// child of `child`.
pub fn negative_id(parents: &str, child: &str) -> String {
    format!("{parents}~{child}")
}

/// One negative per family: the parents of family `i` with the child of
/// family `sigma(i)` for a seeded derangement `sigma`. Every couple and every
/// child is used exactly once.
pub fn generate_negatives(families: &[TripleSample], seed: u64) -> Result<Vec<TripleSample>> {
    if families.len() < 2 {
        return Err(KinError::TooFewFamilies {
            needed: 2,
            got: families.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = derangement(families.len(), &mut rng)?;
    Ok(pair_by(families, &sigma))
}

pub(crate) fn pair_by(families: &[TripleSample], sigma: &[usize]) -> Vec<TripleSample> {
    sigma
        .iter()
        .enumerate()
        .map(|(i, &j)| TripleSample {
            father: families[i].father.clone(),
            mother: families[i].mother.clone(),
            child: families[j].child.clone(),
            label: Label::NotKin,
            family_id: negative_id(&families[i].family_id, &families[j].family_id),
        })
        .collect()
}
