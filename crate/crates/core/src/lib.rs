//! Online frequency-domain adaptive system identification with learned
//! adaptation control.
//!
//! The crate implements an overlap-save frequency-domain adaptive filter
//! (FDAF) together with three families of step-size controllers:
//!
//! * the classical fixed-step FDAF rule,
//! * a diagonalized DFT-domain Kalman filter,
//! * a recurrent-network controller that emits per-bin masks gating the
//!   step-size numerator and the error power estimate.
//!
//! The network is trained end to end by backpropagating the average
//! logarithmic normalized system distance of the adaptive filter through
//! the filter's own update recursion. Everything runs in 64-bit floats;
//! checkpoints are stored as 32-bit tensors.
//!
//! Module map:
//!
//! * [`spectral`] — DFT machinery, overlap-save convolution, FIR projection
//! * [`filter`] — the adaptive filter state machine (prior error + update)
//! * [`controllers`] — step-size laws and PSD recursions
//! * [`neural`] — feature extraction and the mask-emitting GRU network
//! * [`training`] — sequence loss, backpropagation through time, Adam
//! * [`scenario`] — synthetic scenario generation and WAV export/import
//! * [`metrics`] — zero-padded NESD and ERLE evaluation measures
//! * [`pipeline`] — block-streaming drivers shared by evaluation and the CLI
//! * [`config`] — run configuration (TOML, sections per module)
//! * [`checkpoint`] — binary checkpoint format for network parameters

pub mod checkpoint;
pub mod config;
pub mod controllers;
pub mod error;
pub mod filter;
pub mod math;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod scenario;
pub mod spectral;
pub mod training;
pub mod wav;

pub use error::{Error, Result};
