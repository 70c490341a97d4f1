//! Preference-trained machine translation evaluation at desk scale.
//!
//! The library covers the full pipeline for building an MT metric from
//! pairwise human preferences and judging it against human ratings:
//!
//! - [`ingest`]: rating/instance file I/O with validation.
//! - [`pairs`]: preference-pair construction from rating differences.
//! - [`scorer`]: a small differentiable reward scorer over hashed text
//!   features, the stand-in for a pretrained encoder with a linear head.
//! - [`objective`]: Bradley-Terry ranking loss with margin, bounded-reward
//!   regularization, the MSE regression baseline, and analytic gradients
//!   with a finite-difference checker.
//! - [`trainer`]: deterministic minibatch training with reward telemetry.
//! - [`calibration`]: entropy-guided sigmoid temperature selection.
//! - [`metaeval`]: system/segment pairwise accuracy with tie calibration,
//!   soft pairwise accuracy, permutation significance, and the weighted
//!   challenge-set composite.
//! - [`synth`]: seeded synthetic datasets for tests and ablations.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod hash;
pub mod ingest;
pub mod metaeval;
pub mod objective;
pub mod pairs;
pub mod scorer;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
