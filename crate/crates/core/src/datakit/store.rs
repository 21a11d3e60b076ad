use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{KinError, Result};
use crate::facefeat::{FeatureVector, DESCRIPTOR_VERSION};

pub const STORE_MAGIC: &[u8; 4] = b"KINF";
/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "KINVERIFY_CACHE";

const HEADER: usize = 4 + 2 + 4 + 4;

/// Serializes `v` as `count` blocks of `dim` little-endian f32 values.
/// Values are stored at single precision; patch ids must be `0..count`.
pub fn encode_features(v: &FeatureVector, version: u16) -> Result<Vec<u8>> {
    if v.patch_ids().iter().enumerate().any(|(i, &p)| i != p) {
        return Err(KinError::param(
            "features",
            "only full grids with patch ids 0..n can be cached",
        ));
    }
    let mut out = Vec::with_capacity(HEADER + 4 * v.len());
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(v.patch_ids().len() as u32).to_le_bytes());
    out.extend_from_slice(&(v.per_patch() as u32).to_le_bytes());
    for &x in v.values() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

/// `Ok(None)` when the file was written under another version.
pub fn decode_features(bytes: &[u8], version: u16, origin: &Path) -> Result<Option<FeatureVector>> {
    let err = |reason: String| KinError::Format {
        path: origin.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER {
        return Err(err(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != STORE_MAGIC {
        return Err(err("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if u16::from_le_bytes([bytes[4], bytes[5]]) != version {
        return Ok(None);
    }
    let (count, dim) = (u32_at(6), u32_at(10));
    let n = count
        .checked_mul(dim)
        .filter(|&n| n > 0)
        .ok_or_else(|| err(format!("invalid shape {count}x{dim}")))?;
    if bytes.len() != HEADER + 4 * n {
        return Err(err(format!(
            "expected {} bytes, found {}",
            HEADER + 4 * n,
            bytes.len()
        )));
    }
    let values = bytes[HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureVector::new(values, (0..count).collect())
        .map(Some)
        .map_err(|e| err(e.to_string()))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Directory of cached feature vectors, one file per key. Writes go
/// through a temporary file and a rename, so readers never see a partial
/// file.
#[derive(Clone, Debug)]
pub struct FeatureStore {
    dir: PathBuf,
    version: u16,
}

impl FeatureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self::with_version(dir, DESCRIPTOR_VERSION)
    }

    pub fn with_version(dir: impl Into<PathBuf>, version: u16) -> Self {
        Self {
            dir: dir.into(),
            version,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let digest = Sha256::digest(key.as_bytes());
        self.dir.join(format!("{}.kinf", hex::encode(digest)))
    }

    pub fn read(&self, key: &str) -> Result<Option<FeatureVector>> {
        let path = self.path_for(key);
        match fs::read(&path) {
            Ok(bytes) => decode_features(&bytes, self.version, &path),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(KinError::io(&path, e)),
        }
    }

    pub fn write(&self, key: &str, v: &FeatureVector) -> Result<()> {
        let bytes = encode_features(v, self.version)?;
        fs::create_dir_all(&self.dir).map_err(|e| KinError::io(&self.dir, e))?;
        let path = self.path_for(key);
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
        fs::write(&tmp, &bytes).map_err(|e| KinError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| KinError::io(&path, e))
    }
}

/// Rounds every value to single precision so that a vector survives a trip
/// through the store unchanged.
pub(crate) fn storage_precision(v: &FeatureVector) -> FeatureVector {
    FeatureVector::new(
        v.values().iter().map(|&x| x as f32 as f64).collect(),
        v.patch_ids().to_vec(),
    )
    .expect("rounding keeps the shape")
}
