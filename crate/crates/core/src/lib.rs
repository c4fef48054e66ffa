//! Displaced-state photon counting toolkit.
//!
//! A coherent signal is mixed with a coherent probe of variable amplitude and
//! phase, and the mixed field is detected by a linear detector with gain `γ`.
//! This crate simulates that experiment and implements the analysis chain that
//! turns raw single-shot voltages into a detected-photon Wigner function:
//!
//! * [`sim`]: synthetic shot datasets (Poisson detection, efficiency scan,
//!   imperfect mode overlap, piezo jitter).
//! * [`calib`]: gain recovery from the Fano-factor line and unit re-binning
//!   into detected-photon histograms.
//! * [`phase`]: fringe visibility, overlap and per-step probe phase recovered
//!   from the mean-voltage interference pattern.
//! * [`wigner`]: alternating-parity reconstruction, coherent-state models,
//!   the loss convolution and reconstruction scoring.
//! * [`dataset`] and [`pipeline`]: the on-disk run layout and the
//!   simulate / analyze / report stages used by the CLI.

// NaN must fail range checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod calib;
pub mod dataset;
mod error;
pub mod par;
pub mod phase;
pub mod pipeline;
pub mod sim;
pub mod wigner;

pub use amplitude::ComplexAmplitude;
pub use error::{Error, Result};
