use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::FamilyRecord;
use super::store::{storage_precision, FeatureStore};
use crate::error::{KinError, Result};
use crate::facefeat::{extract_patch_grid, face_feature, FaceImage, FeatureVector};
use crate::kinmodels::TripleSample;
use crate::label::Label;

const FEATURE_PREFIX: &str = "feature:";

/// A manifest member: an image file, or a key already present in the
/// feature store (written `feature:<key>`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MemberRef {
    Image(PathBuf),
    Feature(String),
}

impl MemberRef {
    /// Relative image paths are taken relative to `base`.
    pub fn parse(s: &str, base: &Path) -> Self {
        match s.strip_prefix(FEATURE_PREFIX) {
            Some(key) => MemberRef::Feature(key.to_string()),
            None => MemberRef::Image(base.join(s)),
        }
    }
}

pub fn member_key(r: &MemberRef) -> String {
    match r {
        MemberRef::Image(p) => format!("image:{}", p.display()),
        MemberRef::Feature(k) => k.clone(),
    }
}

/// Full-grid features of one member, from the store when present.
/// Freshly extracted features are rounded to storage precision, so cold
/// and warm runs agree bit for bit. Returns whether the store had them.
pub fn face_features(
    store: Option<&FeatureStore>,
    r: &MemberRef,
    write_back: bool,
) -> Result<(FeatureVector, bool)> {
    let key = member_key(r);
    if let Some(store) = store {
        if let Some(v) = store.read(&key)? {
            return Ok((v, true));
        }
    }
    match r {
        MemberRef::Feature(k) => Err(KinError::param(
            "member",
            format!("feature `{k}` is not in the cache"),
        )),
        MemberRef::Image(path) => {
            let img = FaceImage::read_pgm(path)?;
            let v = storage_precision(&face_feature(&extract_patch_grid(&img), None)?);
            if let (Some(store), true) = (store, write_back) {
                store.write(&key, &v)?;
            }
            Ok((v, false))
        }
    }
}

/// Positive triples for `records`, in order.
pub fn load_families(
    records: &[&FamilyRecord],
    base: &Path,
    store: Option<&FeatureStore>,
) -> Result<Vec<TripleSample>> {
    records
        .par_iter()
        .map(|r| {
            let get =
                |s: &str| face_features(store, &MemberRef::parse(s, base), false).map(|(v, _)| v);
            TripleSample::new(
                get(&r.father)?,
                get(&r.mother)?,
                get(&r.child)?,
                Label::Kin,
                r.family_id.clone(),
            )
        })
        .collect()
}
