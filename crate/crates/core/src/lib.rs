//! Conformal confidence predictors for on-line linear regression.
//!
//! The crate provides four predictors that turn a history of observations
//! `(x_i, y_i)` and a new explanatory vector into nested prediction
//! intervals, one per significance level:
//!
//! * [`predictors::iid`]: ridge-residual conformal predictor, valid whenever
//!   the observations are exchangeable.
//! * [`predictors::gauss`]: the classical Student-t prediction interval.
//! * [`predictors::mva`]: conformal predictor for Gaussian explanatory
//!   vectors, informative from the third observation on.
//! * [`predictors::iidgauss`]: Monte-Carlo conformal predictor conditioning
//!   on the linear sufficient summary.
//!
//! Around them sit the on-line protocol driver ([`protocol`]), the exact
//! conditional sampler ([`sampler`]), data generation and matrix files
//! ([`data_io`]) and the `predreg` command-line surface ([`cli`]).
//!
//! Numerical code is generic over [`Scalar`]; the aliases at the crate root
//! fix it to `f64`, which is what the protocol, I/O and CLI layers use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod data_io;
pub mod error;
pub mod numerics;
pub mod predictors;
pub mod protocol;
pub mod sampler;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Real scalar type the numerical core is written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported scalar can represent it
    /// approximately.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion from usize")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

pub type RidgeProjector = numerics::RidgeProjector<f64>;
pub type ResidualDecomposition = numerics::ResidualDecomposition<f64>;
pub type StudentT = numerics::StudentT<f64>;
pub type Observation = predictors::Observation<f64>;
pub type History = predictors::History<f64>;
pub type PredictionInterval = predictors::PredictionInterval<f64>;
pub type EpsilonLadder = predictors::EpsilonLadder<f64>;
pub type LinearSummary = predictors::LinearSummary<f64>;
pub type GaussFit = predictors::gauss::GaussFit<f64>;
pub type QuadraticRegion = predictors::mva::QuadraticRegion<f64>;
pub type IidGaussSummary = sampler::IidGaussSummary<f64>;
pub type ConditionalSample = sampler::ConditionalSample<f64>;

pub use predictors::FeatureSchedule;
