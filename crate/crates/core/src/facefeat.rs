//! Face crop to patch descriptors.
//!
//! A 64x64 grayscale face is covered by a 7x7 grid of overlapping 16x16
//! patches (stride 8). Each patch is described by a dense SIFT-style
//! gradient histogram: 4x4 spatial cells of 4x4 pixels, 8 orientation bins
//! with linear interpolation between neighbouring bins, L2-normalized,
//! clipped at 0.2 and renormalized.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};

pub const FACE_SIZE: usize = 64;
pub const PATCH_SIZE: usize = 16;
pub const GRID_SIDE: usize = 7;
pub const NUM_PATCHES: usize = GRID_SIDE * GRID_SIDE;
pub const PATCH_STRIDE: usize = (FACE_SIZE - PATCH_SIZE) / (GRID_SIDE - 1);
pub const CELLS_PER_SIDE: usize = 4;
pub const ORIENTATION_BINS: usize = 8;
pub const DESCRIPTOR_DIM: usize = CELLS_PER_SIDE * CELLS_PER_SIDE * ORIENTATION_BINS;
/// Bumped whenever descriptor output changes; cached features carry it.
pub const DESCRIPTOR_VERSION: u16 = 1;

const CELL_SIZE: usize = PATCH_SIZE / CELLS_PER_SIDE;
const CLIP: f64 = 0.2;
const MIN_ENERGY: f64 = 1e-12;

/// A pre-aligned 64x64 8-bit grayscale face, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceImage {
    pixels: Vec<u8>,
}

impl FaceImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width != FACE_SIZE || height != FACE_SIZE {
            return Err(KinError::InvalidImage(format!(
                "expected {FACE_SIZE}x{FACE_SIZE}, got {width}x{height}"
            )));
        }
        if pixels.len() != FACE_SIZE * FACE_SIZE {
            return Err(KinError::InvalidImage(format!(
                "expected {} pixels, got {}",
                FACE_SIZE * FACE_SIZE,
                pixels.len()
            )));
        }
        Ok(Self { pixels })
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> u8) -> Self {
        let pixels = (0..FACE_SIZE * FACE_SIZE)
            .map(|i| f(i / FACE_SIZE, i % FACE_SIZE))
            .collect();
        Self { pixels }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * FACE_SIZE + col]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Parses a binary PGM (`P5`, maxval <= 255).
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let (width, height, maxval, offset) = parse_pgm_header(bytes)?;
        if maxval == 0 || maxval > 255 {
            return Err(KinError::InvalidImage(format!(
                "unsupported maxval {maxval}"
            )));
        }
        let data = &bytes[offset..];
        if data.len() < width * height {
            return Err(KinError::InvalidImage("truncated pixel data".into()));
        }
        Self::new(width, height, data[..width * height].to_vec())
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| KinError::io(path, e))?;
        Self::from_pgm_bytes(&bytes).map_err(|e| match e {
            KinError::InvalidImage(reason) => {
                KinError::InvalidImage(format!("{}: {reason}", path.display()))
            }
            other => other,
        })
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{FACE_SIZE} {FACE_SIZE}\n255\n").into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn parse_pgm_header(bytes: &[u8]) -> Result<(usize, usize, usize, usize)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(KinError::InvalidImage("truncated PGM header".into()));
        }
        fields.push(&bytes[start..pos]);
    }
    if fields[0] != b"P5" {
        return Err(KinError::InvalidImage("not a binary PGM (P5)".into()));
    }
    let num = |f: &[u8]| -> Result<usize> {
        std::str::from_utf8(f)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| KinError::InvalidImage("bad PGM header number".into()))
    };
    // exactly one whitespace byte separates the header from the raster
    Ok((num(fields[1])?, num(fields[2])?, num(fields[3])?, pos + 1))
}

/// A 16x16 block of intensities.
pub type Patch = [[u8; PATCH_SIZE]; PATCH_SIZE];

/// Dense gradient-orientation histogram of one patch.
///
/// Gradients are central differences with replicated borders, computed on
/// integer intensities and then scaled by `1/255`, which makes the result
/// exactly invariant to adding a constant to every pixel (absent clipping).
pub fn patch_descriptor(patch: &Patch) -> [f64; DESCRIPTOR_DIM] {
    let mut hist = [0.0f64; DESCRIPTOR_DIM];
    let at = |r: isize, c: isize| -> i32 {
        let r = r.clamp(0, PATCH_SIZE as isize - 1) as usize;
        let c = c.clamp(0, PATCH_SIZE as isize - 1) as usize;
        i32::from(patch[r][c])
    };
    let scale = 1.0 / (2.0 * 255.0);
    let mut energy = 0.0;
    for r in 0..PATCH_SIZE {
        for c in 0..PATCH_SIZE {
            let (ri, ci) = (r as isize, c as isize);
            let dx = f64::from(at(ri, ci + 1) - at(ri, ci - 1)) * scale;
            let dy = f64::from(at(ri + 1, ci) - at(ri - 1, ci)) * scale;
            let mag2 = dx * dx + dy * dy;
            if mag2 == 0.0 {
                continue;
            }
            energy += mag2;
            let mag = mag2.sqrt();
            let angle = dy.atan2(dx).rem_euclid(TAU);
            let pos = angle / TAU * ORIENTATION_BINS as f64;
            let lower = pos.floor();
            let frac = pos - lower;
            let lower = lower as usize % ORIENTATION_BINS;
            let upper = (lower + 1) % ORIENTATION_BINS;
            let cell = (r / CELL_SIZE) * CELLS_PER_SIDE + c / CELL_SIZE;
            let base = cell * ORIENTATION_BINS;
            hist[base + lower] += mag * (1.0 - frac);
            hist[base + upper] += mag * frac;
        }
    }
    if energy < MIN_ENERGY {
        return [0.0; DESCRIPTOR_DIM];
    }
    normalize(&mut hist);
    for v in hist.iter_mut() {
        *v = v.min(CLIP);
    }
    normalize(&mut hist);
    hist
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Top-left `(row, col)` of patch `k` in the 7x7 grid, row-major.
pub fn patch_origin(k: usize) -> (usize, usize) {
    (
        (k / GRID_SIDE) * PATCH_STRIDE,
        (k % GRID_SIDE) * PATCH_STRIDE,
    )
}

pub fn extract_patch(img: &FaceImage, k: usize) -> Patch {
    let (r0, c0) = patch_origin(k);
    let mut p = [[0u8; PATCH_SIZE]; PATCH_SIZE];
    for (r, row) in p.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = img.get(r0 + r, c0 + c);
        }
    }
    p
}

/// Per-patch descriptors, row-major over the grid. Each descriptor has unit
/// L2 norm or is all zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    descriptors: Vec<Vec<f64>>,
}

impl PatchGrid {
    pub fn from_descriptors(descriptors: Vec<Vec<f64>>) -> Result<Self> {
        if descriptors.is_empty() {
            return Err(KinError::DimensionMismatch(
                "patch grid has no patches".into(),
            ));
        }
        let dim = descriptors[0].len();
        if dim == 0 || descriptors.iter().any(|d| d.len() != dim) {
            return Err(KinError::DimensionMismatch(
                "ragged patch descriptors".into(),
            ));
        }
        Ok(Self { descriptors })
    }

    pub fn patches(&self) -> usize {
        self.descriptors.len()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.descriptors[0].len()
    }

    pub fn descriptor(&self, k: usize) -> &[f64] {
        &self.descriptors[k]
    }

    pub fn descriptors(&self) -> &[Vec<f64>] {
        &self.descriptors
    }
}

pub fn extract_patch_grid(img: &FaceImage) -> PatchGrid {
    PatchGrid {
        descriptors: (0..NUM_PATCHES)
            .map(|k| patch_descriptor(&extract_patch(img, k)).to_vec())
            .collect(),
    }
}

/// Concatenated descriptors of a set of patches, in patch-index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    patch_ids: Vec<usize>,
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

impl FeatureVector {
    /// `values` must hold `patch_ids.len()` equal-length blocks.
    pub fn new(values: Vec<f64>, patch_ids: Vec<usize>) -> Result<Self> {
        if patch_ids.is_empty()
            || values.is_empty()
            || !values.len().is_multiple_of(patch_ids.len())
        {
            return Err(KinError::DimensionMismatch(format!(
                "{} values cannot split into {} patches",
                values.len(),
                patch_ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KinError::NonFinite("feature vector".into()));
        }
        Ok(Self { values, patch_ids })
    }

    /// A flat vector treated as a single block.
    pub fn flat(values: Vec<f64>) -> Result<Self> {
        Self::new(values, vec![0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn patch_ids(&self) -> &[usize] {
        &self.patch_ids
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn per_patch(&self) -> usize {
        self.values.len() / self.patch_ids.len()
    }

    /// Block belonging to patch `id`.
    pub fn patch(&self, id: usize) -> Option<&[f64]> {
        let pos = self.patch_ids.iter().position(|&p| p == id)?;
        let d = self.per_patch();
        Some(&self.values[pos * d..(pos + 1) * d])
    }

    /// Keeps only the given patches, which must be strictly increasing and
    /// present in this vector.
    pub fn select(&self, ids: &[usize]) -> Result<FeatureVector> {
        check_selection(ids, usize::MAX)?;
        let mut values = Vec::with_capacity(ids.len() * self.per_patch());
        for &id in ids {
            let block = self.patch(id).ok_or_else(|| {
                KinError::InvalidSelection(format!("patch {id} not in feature vector"))
            })?;
            values.extend_from_slice(block);
        }
        FeatureVector::new(values, ids.to_vec())
    }

    pub fn scaled(&self, c: f64) -> FeatureVector {
        FeatureVector {
            values: self.values.iter().map(|v| v * c).collect(),
            patch_ids: self.patch_ids.clone(),
        }
    }

    /// `[self; other]`, patch ids of `other` offset past ours.
    pub fn stacked(&self, other: &FeatureVector) -> FeatureVector {
        let offset = self.patch_ids.iter().max().map_or(0, |m| m + 1);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut ids = self.patch_ids.clone();
        ids.extend(other.patch_ids.iter().map(|p| p + offset));
        FeatureVector {
            values,
            patch_ids: ids,
        }
    }
}

fn check_selection(ids: &[usize], bound: usize) -> Result<()> {
    if ids.is_empty() {
        return Err(KinError::InvalidSelection("empty selection".into()));
    }
    if let Some(&bad) = ids.iter().find(|&&k| k >= bound) {
        return Err(KinError::InvalidSelection(format!(
            "patch index {bad} out of range"
        )));
    }
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KinError::InvalidSelection(
            "indices must be strictly increasing without duplicates".into(),
        ));
    }
    Ok(())
}

/// Concatenates the selected (or all) patch descriptors in index order.
pub fn face_feature(grid: &PatchGrid, selection: Option<&[usize]>) -> Result<FeatureVector> {
    let all: Vec<usize> = (0..grid.patches()).collect();
    let ids = selection.unwrap_or(&all);
    check_selection(ids, grid.patches())?;
    let mut values = Vec::with_capacity(ids.len() * grid.descriptor_dim());
    for &k in ids {
        values.extend_from_slice(grid.descriptor(k));
    }
    FeatureVector::new(values, ids.to_vec())
}
