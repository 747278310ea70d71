//! Motif level: beat-aligned motion words, their embedding, clustering into
//! motifs, signatures and transition statistics.

mod bundle;
mod embedding;
mod kmeans;
mod signature;
mod table;
mod transition;
mod word;

pub use bundle::{read_f32, write_f32, BundleManifest, BUNDLE_FORMAT};
pub use embedding::{embed_word, fit_embedding, fit_embedding_reduced, flatten_word, EmbeddingBasis};
pub use kmeans::{kmeans, kmeans_restarts, nearest, squared_distance, KMeans};
pub use signature::{chi_square, compute_signature, Signature};
pub use table::{build_library, corpus_words, ClusterConfig, MotifLibrary, MotifTable};
pub use transition::{build_transition_matrix, TransitionMatrix};
pub use word::{segment_words, timescale_word, MotionWord, WordSource};
