//! Granular-ball twin support vector machines.
//!
//! The crate trains linear twin SVMs on granular balls (GBTWSVM), optionally
//! weighting each ball's penalty by a Pythagorean fuzzy score (GBFTSVM), and
//! includes a point-based TWSVM baseline plus the evaluation harness used to
//! compare them.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod box_qp;
pub mod bundled;
pub mod classifiers;
pub mod dataset_io;
pub mod error;
pub mod evaluation;
pub mod granular_ball;
pub mod pythagorean;

pub use box_qp::{BoxQp, QpSolution, SolverOptions};
pub use classifiers::{Method, TrainConfig, TwinModel};
pub use dataset_io::{Dataset, FoldPlan, Label, LoadOptions, MinMaxScaler, NoiseSpec};
pub use error::{Error, Result};
pub use evaluation::{GridResult, MetricReport, SignificanceReport};
pub use granular_ball::{
    BallFamily, DeOverlap, GenerationConfig, GranularBall, RadiusMode, Region,
};
pub use pythagorean::PythagoreanScore;

/// Matrix types used throughout the public API.
pub use nalgebra;
