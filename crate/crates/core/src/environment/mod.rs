//! Stationary ergodic random media.
//!
//! A medium is never stored: every coefficient is a pure function of the
//! family parameters, the seed and the site (or point), so the same
//! environment can be shared by any number of Monte Carlo workers.

mod continuous;
pub(crate) mod counter;
mod discrete;
mod markov;
mod parse;
mod profile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use continuous::{ContinuousEnvironment, ContinuousFamily, FlowIntegrals, PointCoefficients};
pub use discrete::{DiscreteEnvironment, DiscreteFamily, RotationSurrogate};
pub use parse::{parse_continuous, parse_discrete};
pub use profile::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid {family} environment: {reason}")]
    Invalid { family: &'static str, reason: String },
    #[error("cannot parse environment '{input}': {reason}")]
    Parse { input: String, reason: String },
}

impl EnvError {
    pub(crate) fn invalid(family: &'static str, reason: impl Into<String>) -> Self {
        EnvError::Invalid {
            family,
            reason: reason.into(),
        }
    }
}

/// An average over the medium that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Moment::Infinite)
    }

    /// `f64::INFINITY` for an infinite moment.
    pub fn value(&self) -> f64 {
        match self {
            Moment::Finite(v) => *v,
            Moment::Infinite => f64::INFINITY,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        match self {
            Moment::Finite(v) => Moment::Finite(v * s),
            Moment::Infinite => Moment::Infinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralSource {
    ClosedForm,
    BirkhoffEstimated,
}

/// `∫c dμ` and `∫1/c dμ` of a conductance field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumIntegrals {
    pub mean_c: Moment,
    pub mean_inv_c: Moment,
    pub source: IntegralSource,
}

impl MediumIntegrals {
    /// `∫c̄ dμ = 2∫c dμ` by stationarity.
    pub fn mean_cbar(&self) -> Moment {
        self.mean_c.scaled(2.0)
    }
}
