//! Temporal linguistic-expression patterns of social-media users.
//!
//! The pipeline turns timestamped post archives into per-day psycholinguistic
//! feature series ([`lexicon`]), finds each series' dominant period and
//! resamples its last period to twelve bins ([`periodics`]), repairs the
//! zero-inflated bins with a local-polynomial counting-process intensity
//! estimator ([`intensity`]), summarizes each smoothed sequence by level,
//! spread and low-frequency spectrum ([`descriptors`]), clusters a background
//! population per feature ([`clustering`]) and finally trains tree models on
//! the resulting nominal table ([`classify`], [`metrics`]).
//!
//! [`pipeline`] wires the stages together with on-disk artifacts; the
//! `lingseq` binary exposes one subcommand per stage.

pub mod classify;
pub mod clustering;
pub mod corpus;
pub mod descriptors;
pub mod error;
pub mod intensity;
pub mod lexicon;
pub mod metrics;
pub mod periodics;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
