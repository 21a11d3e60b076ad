//! Tri-subject kinship verification: decide whether a child face belongs to a
//! given father/mother pair.
//!
//! The crate is organised bottom-up:
//!
//! - [`optim`]: regularized logistic solvers (trace-norm and L1 proximal
//!   gradient, small L2 Newton fits) shared by every model.
//! - [`facefeat`]: 64x64 face crop to a 7x7 grid of 128-dim gradient
//!   histogram descriptors.
//! - [`select`]: spatially voted patch selection from L1 pair weights.
//! - [`kinmodels`]: SBM, ABM and RSBM bilinear verifiers, block ensembles,
//!   pair-mode prediction and the binary model container.
//! - [`datakit`]: manifests, derangement negatives, fold plans, the feature
//!   cache and the planted synthetic generator.
//! - [`evalkit`]: accuracy, ROC/AUC and the five-fold protocol runner.

pub mod datakit;
pub mod error;
pub mod evalkit;
pub mod facefeat;
pub mod kinmodels;
pub mod optim;
pub mod select;

mod label;
mod seeds;

pub use error::{KinError, Result};
pub use label::Label;
pub use seeds::substream_seed;
