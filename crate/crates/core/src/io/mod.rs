//! Corpus ingestion: BVH text, frame-rate resampling, foot contacts and the
//! corpus manifest.

pub mod bvh;
mod contacts;
mod corpus;
mod resample;

pub use bvh::{parse_bvh, write_bvh};
pub use contacts::{detect_foot_contacts, foot_trajectory, ContactConfig, FootContactLabels, FootPoint};
pub use corpus::{CorpusEntry, CorpusManifest, ManifestEntry};
pub use resample::resample;
