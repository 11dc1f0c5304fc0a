//! Speech presence probability (SPP) estimation with one tiny GRU per
//! frequency bin.
//!
//! The pipeline runs from PCM audio through STFT log-power features and
//! oracle a-posteriori SPP targets to bin-wise training, a conventional
//! blind baseline, and ROC/AUC evaluation with complexity accounting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod baseline;
pub mod error;
pub mod eval;
pub mod gru;
pub mod model;
pub mod seed;
pub mod spectral;
pub mod synth;
pub mod target;

pub use error::{Error, Result};
