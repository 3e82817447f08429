//! Distribution-based feature recovery and fusion (DRF) for two-modality
//! classification under corrupted and missing inputs.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffcore`]: tensors, an operation tape with reverse-mode gradients,
//!   and a finite-difference checker.
//! - [`synthdata`]: synthetic image-like/text-like samples and the
//!   corruption/discard disruptions.
//! - [`queuedist`]: per-modality feature queues, their statistics and the
//!   Gaussian quality score.
//! - [`model`]: encoders, converters, pair expansion and weighted fusion.
//! - [`losses`]: distribution constraint, recovery and classification losses.
//! - [`trainer`]: optimisation loop, concat baseline, metrics and sweeps.

pub mod diffcore;
pub mod error;
pub mod losses;
pub mod model;
pub mod par;
pub mod queuedist;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, Result};
