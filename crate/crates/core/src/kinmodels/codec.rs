//! Binary model container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "KINM"  u16 version  u8 kind  u8 has_selection  [selection]  body
//! selection: u32 K, then K u32 indices each for father, mother, child
//! matrix:    u32 rows, u32 cols, rows*cols f64 row-major
//! vector:    u32 len, len f64
//! sbm:       W_f, W_m, beta1, beta2, bias, pair_f(slope, intercept), pair_m(...)
//! rsbm:      sbm fields, then alpha, p0
//! abm:       W_p, bias
//! concat:    weights vector, bias
//! block:     u8 inner kind, selection lists, K member bodies,
//!            combiner (vector, bias), u8 has_pair, [pair_f, pair_m combiners]
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::verifier::{KinshipModel, ModelKind, ModelParams, TrainedVerifier};
use super::{
    AbmModel, BlockEnsemble, ConcatModel, PairCalibration, PatchModel, RsbmModel, SbmModel,
};
use crate::error::{KinError, Result};
use crate::optim::LogisticLinear;
use crate::select::PatchSelection;

pub const MODEL_MAGIC: &[u8; 4] = b"KINM";
pub const MODEL_FORMAT_VERSION: u16 = 1;

const TAG_SBM: u8 = 0;
const TAG_ABM: u8 = 1;
const TAG_RSBM: u8 = 2;
const TAG_CONCAT: u8 = 3;
const TAG_BLOCK: u8 = 4;

/// Human-readable training configuration stored next to a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub format_version: u16,
    pub kind: ModelKind,
    pub block_level: bool,
    pub feature_selection: bool,
    pub params: ModelParams,
    pub k: Option<usize>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub selection: Option<PatchSelection>,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn indices(&mut self, v: &[usize]) {
        v.iter().for_each(|&i| self.u32(i));
    }
    fn vector(&mut self, v: &[f64]) {
        self.u32(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u32(m.nrows());
        self.u32(m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
    }
    fn linear(&mut self, l: &LogisticLinear) {
        self.vector(&l.weights);
        self.f64(l.bias);
    }
    fn calibration(&mut self, p: &PairCalibration) {
        self.f64(p.slope);
        self.f64(p.intercept);
    }
    fn lists(&mut self, f: &[usize], m: &[usize], c: &[usize]) {
        self.u32(f.len());
        self.indices(f);
        self.indices(m);
        self.indices(c);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: impl Into<String>) -> KinError {
    KinError::Decode(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(v)
    }
    /// Guards allocations against absurd counts in corrupt files.
    fn count(&mut self, elem: usize) -> Result<usize> {
        let n = self.u32()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(bad(format!("length {n} exceeds remaining data")));
        }
        Ok(n)
    }
    fn indices(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.u32()).collect()
    }
    fn vector(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("matrix too large"))?;
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(bad(format!("{rows}x{cols} matrix exceeds remaining data")));
        }
        let vals = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(rows, cols, &vals))
    }
    fn linear(&mut self) -> Result<LogisticLinear> {
        Ok(LogisticLinear {
            weights: self.vector()?,
            bias: self.f64()?,
        })
    }
    fn calibration(&mut self) -> Result<PairCalibration> {
        Ok(PairCalibration {
            slope: self.f64()?,
            intercept: self.f64()?,
        })
    }
    fn lists(&mut self) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let k = self.count(12)?;
        Ok((self.indices(k)?, self.indices(k)?, self.indices(k)?))
    }
}

fn square_pair(wf: &DMatrix<f64>, wm: &DMatrix<f64>) -> Result<()> {
    if !wf.is_square() || wf.shape() != wm.shape() {
        return Err(bad("bilinear matrices must be square and equal in shape"));
    }
    Ok(())
}

fn write_sbm(w: &mut Writer, m: &SbmModel) {
    w.matrix(&m.w_father);
    w.matrix(&m.w_mother);
    [m.beta1, m.beta2, m.bias].iter().for_each(|&x| w.f64(x));
    w.calibration(&m.pair_father);
    w.calibration(&m.pair_mother);
}

fn read_sbm(r: &mut Reader) -> Result<SbmModel> {
    let w_father = r.matrix()?;
    let w_mother = r.matrix()?;
    square_pair(&w_father, &w_mother)?;
    Ok(SbmModel {
        w_father,
        w_mother,
        beta1: r.f64()?,
        beta2: r.f64()?,
        bias: r.f64()?,
        pair_father: r.calibration()?,
        pair_mother: r.calibration()?,
    })
}

fn write_rsbm(w: &mut Writer, m: &RsbmModel) {
    w.matrix(&m.w_father);
    w.matrix(&m.w_mother);
    [m.beta1, m.beta2, m.bias].iter().for_each(|&x| w.f64(x));
    w.calibration(&m.pair_father);
    w.calibration(&m.pair_mother);
    w.f64(m.alpha);
    w.f64(m.p0);
}

fn read_rsbm(r: &mut Reader) -> Result<RsbmModel> {
    let s = read_sbm(r)?;
    Ok(RsbmModel {
        w_father: s.w_father,
        w_mother: s.w_mother,
        beta1: s.beta1,
        beta2: s.beta2,
        bias: s.bias,
        pair_father: s.pair_father,
        pair_mother: s.pair_mother,
        alpha: r.f64()?,
        p0: r.f64()?,
    })
}

fn write_abm(w: &mut Writer, m: &AbmModel) {
    w.matrix(&m.w_parents);
    w.f64(m.bias);
}

fn read_abm(r: &mut Reader) -> Result<AbmModel> {
    let w = r.matrix()?;
    AbmModel::new(w, r.f64()?).map_err(|e| bad(e.to_string()))
}

fn write_patch(w: &mut Writer, m: &PatchModel) {
    match m {
        PatchModel::Sbm(x) => write_sbm(w, x),
        PatchModel::Abm(x) => write_abm(w, x),
        PatchModel::Rsbm(x) => write_rsbm(w, x),
    }
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Sbm => TAG_SBM,
        ModelKind::Abm => TAG_ABM,
        ModelKind::Rsbm => TAG_RSBM,
        ModelKind::ConcatBaseline => TAG_CONCAT,
    }
}

fn write_block(w: &mut Writer, b: &BlockEnsemble) {
    w.u8(kind_tag(b.kind));
    w.lists(&b.father_patches, &b.mother_patches, &b.child_patches);
    b.members.iter().for_each(|m| write_patch(w, m));
    w.linear(&b.combiner);
    match (&b.pair_father, &b.pair_mother) {
        (Some(f), Some(m)) => {
            w.u8(1);
            w.linear(f);
            w.linear(m);
        }
        _ => w.u8(0),
    }
}

fn read_block(r: &mut Reader) -> Result<BlockEnsemble> {
    let inner = r.u8()?;
    let (father_patches, mother_patches, child_patches) = r.lists()?;
    let k = father_patches.len();
    if k == 0 {
        return Err(bad("block ensemble with no members"));
    }
    let (kind, members) = match inner {
        TAG_SBM => (
            ModelKind::Sbm,
            (0..k)
                .map(|_| read_sbm(r).map(PatchModel::Sbm))
                .collect::<Result<Vec<_>>>()?,
        ),
        TAG_ABM => (
            ModelKind::Abm,
            (0..k)
                .map(|_| read_abm(r).map(PatchModel::Abm))
                .collect::<Result<Vec<_>>>()?,
        ),
        TAG_RSBM => (
            ModelKind::Rsbm,
            (0..k)
                .map(|_| read_rsbm(r).map(PatchModel::Rsbm))
                .collect::<Result<Vec<_>>>()?,
        ),
        t => return Err(bad(format!("invalid block member kind {t}"))),
    };
    let combiner = r.linear()?;
    if combiner.weights.len() != k {
        return Err(bad("combiner width differs from member count"));
    }
    let (pair_father, pair_mother) = match r.u8()? {
        0 => (None, None),
        1 => (Some(r.linear()?), Some(r.linear()?)),
        t => return Err(bad(format!("invalid pair flag {t}"))),
    };
    Ok(BlockEnsemble {
        kind,
        father_patches,
        mother_patches,
        child_patches,
        members,
        combiner,
        pair_father,
        pair_mother,
    })
}

pub fn encode_model(v: &TrainedVerifier) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u16(MODEL_FORMAT_VERSION);
    w.u8(match &v.model {
        KinshipModel::Block(_) => TAG_BLOCK,
        m => kind_tag(m.kind()),
    });
    match &v.selection {
        Some(s) => {
            w.u8(1);
            w.lists(&s.father, &s.mother, &s.child);
        }
        None => w.u8(0),
    }
    match &v.model {
        KinshipModel::Sbm(m) => write_sbm(&mut w, m),
        KinshipModel::Abm(m) => write_abm(&mut w, m),
        KinshipModel::Rsbm(m) => write_rsbm(&mut w, m),
        KinshipModel::Concat(m) => w.linear(&m.classifier),
        KinshipModel::Block(b) => write_block(&mut w, b),
    }
    w.0
}

/// Only the selected indices survive a round trip; votes are not stored.
pub fn decode_model(bytes: &[u8]) -> Result<TrainedVerifier> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).ok() != Some(&MODEL_MAGIC[..]) {
        return Err(bad("not a model file (bad magic)"));
    }
    let version = r.u16()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let tag = r.u8()?;
    let selection = match r.u8()? {
        0 => None,
        1 => {
            let (f, m, c) = r.lists()?;
            Some(PatchSelection::fixed(f, m, c).map_err(|e| bad(e.to_string()))?)
        }
        t => return Err(bad(format!("invalid selection flag {t}"))),
    };
    let model = match tag {
        TAG_SBM => KinshipModel::Sbm(read_sbm(&mut r)?),
        TAG_ABM => KinshipModel::Abm(read_abm(&mut r)?),
        TAG_RSBM => KinshipModel::Rsbm(read_rsbm(&mut r)?),
        TAG_CONCAT => KinshipModel::Concat(ConcatModel {
            classifier: r.linear()?,
        }),
        TAG_BLOCK => KinshipModel::Block(read_block(&mut r)?),
        t => return Err(bad(format!("unknown model kind tag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(TrainedVerifier { model, selection })
}
