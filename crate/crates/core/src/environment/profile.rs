use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Smooth positive period-1 profile `mean + cos·cos(2πu) + sin·sin(2πu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub mean: f64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl Profile {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            cos: 0.0,
            sin: 0.0,
        }
    }

    pub fn new(mean: f64, cos: f64, sin: f64) -> Self {
        Self { mean, cos, sin }
    }

    pub(crate) fn validate(&self, what: &'static str) -> Result<(), EnvError> {
        if ![self.mean, self.cos, self.sin].iter().all(|v| v.is_finite()) {
            return Err(EnvError::invalid(what, "profile coefficients must be finite"));
        }
        if self.mean <= self.amplitude() {
            return Err(EnvError::invalid(
                what,
                format!(
                    "profile must stay positive: mean {} must exceed amplitude {}",
                    self.mean,
                    self.amplitude()
                ),
            ));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        self.cos.hypot(self.sin)
    }

    pub fn is_constant(&self) -> bool {
        self.cos == 0.0 && self.sin == 0.0
    }

    pub fn value(&self, u: f64) -> f64 {
        self.eval(u).0
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.eval(u).1
    }

    /// Value and derivative with one `sin_cos`.
    pub fn eval(&self, u: f64) -> (f64, f64) {
        if self.is_constant() {
            return (self.mean, 0.0);
        }
        let (s, c) = (TAU * u.rem_euclid(1.0)).sin_cos();
        self.eval_with(s, c)
    }

    #[inline]
    pub(crate) fn eval_with(&self, s: f64, c: f64) -> (f64, f64) {
        (
            self.mean + self.cos * c + self.sin * s,
            TAU * (self.sin * c - self.cos * s),
        )
    }

    /// Average over one period.
    pub fn mean_value(&self) -> f64 {
        self.mean
    }

    /// Average of `1 / profile` over one period, `1 / sqrt(mean² − amplitude²)`.
    pub fn mean_reciprocal(&self) -> f64 {
        let r = self.amplitude();
        1.0 / ((self.mean - r) * (self.mean + r)).sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.mean - self.amplitude()
    }

    pub fn max_value(&self) -> f64 {
        self.mean + self.amplitude()
    }
}
