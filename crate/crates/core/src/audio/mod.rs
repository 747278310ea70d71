//! Musical beat grids and audio features.
//!
//! Feature extraction proper happens offline; the engine consumes a JSON
//! feature file (see [`BeatGrid`]). A small onset/autocorrelation beat tracker
//! and a synthetic grid generator cover raw audio and tests.

mod extract;
mod grid;
mod tracker;
pub mod wav;

pub use extract::features_from_audio;
pub use grid::{synth_beat_grid, BeatGrid, RHYTHMIC_DIM, SPECTRAL_DIM};
pub use tracker::{track_beats, BeatTrack, TrackerConfig};
