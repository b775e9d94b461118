//! Random walks on Fuchsian groups given by explicit SL₂(ℝ) generators.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg2`]: overflow-safe 2×2 products stored as `(unit matrix, log-scale)`,
//!   trace classification and length functionals.
//! - [`group`]: generator sets (pair of pants, Sanov, user JSON) and the
//!   certificate search for the random-walk hypotheses.
//! - [`words`]: symbolic words, free/cyclic reduction, enumeration, uniform
//!   sampling of reduced words and BFS word length.
//! - [`walk`]: deterministic, parallel n-step random walks.
//! - [`stats`]: estimators for λ₁ and Φ, KS/LDP/LLT/LIL checks and the exact
//!   enumeration oracle.
//! - [`cli`]: the `fwalk` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fmt;
pub mod group;
pub mod linalg2;
pub mod rng;
pub mod stats;
pub mod walk;
pub mod words;

pub use error::{Error, Result};
pub use group::{GeneratorSet, HypothesisReport, Provenance};
pub use linalg2::{ElementClass, Mat2, ScaledMat};
pub use rng::SplitMix64;
pub use walk::{PathTrajectory, StepLaw, WalkSample};
pub use words::Word;
