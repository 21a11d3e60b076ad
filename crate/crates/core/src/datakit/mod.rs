//! Dataset ingestion, negative generation, fold plans, the feature cache and
//! the synthetic generator.

mod folds;
mod manifest;
mod negatives;
mod source;
mod store;
mod synth;

pub use folds::{kfold_split, FoldPlan, FoldSplit, DEFAULT_FOLDS};
pub use manifest::{load_manifest, parse_manifest, write_manifest, FamilyRecord, Relation};
pub use negatives::{derangement, generate_negatives, negative_id};
pub use source::{face_features, load_families, member_key, MemberRef};
pub use store::{decode_features, encode_features, FeatureStore, CACHE_ENV, STORE_MAGIC};
pub use synth::{
    synth_generate, GroundTruth, PlantedPatches, SynthConfig, SynthData, SynthGenerator, SynthMode,
};
