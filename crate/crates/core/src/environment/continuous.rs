use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::counter::{half_open_unit, mix64};
use super::profile::Profile;
use super::{EnvError, IntegralSource, Moment};

const PHASE_LANE: u64 = 0x464c_4f57;

/// Conductivity λ and capacity γ along a flow `x ↦ T_x ω` on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ContinuousFamily {
    Constant {
        lambda: f64,
        gamma: f64,
    },
    /// `λ(x) = λ̂(ω + x)`, `γ(x) = γ̂(ω + x)` with period-1 profiles.
    RotationFlow {
        lambda: Profile,
        gamma: Profile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<f64>,
    },
}

impl ContinuousFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ContinuousFamily::Constant { .. } => "constant",
            ContinuousFamily::RotationFlow { .. } => "rotation-flow",
        }
    }
}

/// λ, λ' and γ at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub gamma: f64,
}

/// `∫γ dμ` and `∫1/λ dμ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowIntegrals {
    pub mean_gamma: Moment,
    pub mean_inv_lambda: Moment,
    pub source: IntegralSource,
}

#[derive(Debug, Clone)]
pub struct ContinuousEnvironment {
    family: ContinuousFamily,
    seed: u64,
    lambda: Profile,
    gamma: Profile,
    phase: f64,
}

impl ContinuousEnvironment {
    pub fn new(family: ContinuousFamily, seed: u64) -> Result<Self, EnvError> {
        let name = family.name();
        let (lambda, gamma, phase) = match &family {
            ContinuousFamily::Constant { lambda, gamma } => {
                let (l, g) = (Profile::constant(*lambda), Profile::constant(*gamma));
                l.validate(name)?;
                g.validate(name)?;
                (l, g, 0.0)
            }
            ContinuousFamily::RotationFlow { lambda, gamma, phase } => {
                lambda.validate(name)?;
                gamma.validate(name)?;
                let phase = match phase {
                    Some(p) if p.is_finite() => p.rem_euclid(1.0),
                    Some(_) => return Err(EnvError::invalid(name, "phase must be finite")),
                    None => half_open_unit(mix64(seed ^ mix64(PHASE_LANE))),
                };
                (*lambda, *gamma, phase)
            }
        };
        Ok(Self {
            family,
            seed,
            lambda,
            gamma,
            phase,
        })
    }

    pub fn constant(lambda: f64, gamma: f64) -> Result<Self, EnvError> {
        Self::new(ContinuousFamily::Constant { lambda, gamma }, 0)
    }

    pub fn family(&self) -> &ContinuousFamily {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn lambda_profile(&self) -> &Profile {
        &self.lambda
    }

    pub fn gamma_profile(&self) -> &Profile {
        &self.gamma
    }

    #[inline]
    pub fn coefficients(&self, x: f64) -> PointCoefficients {
        if self.lambda.is_constant() && self.gamma.is_constant() {
            return PointCoefficients {
                lambda: self.lambda.mean,
                lambda_prime: 0.0,
                gamma: self.gamma.mean,
            };
        }
        let (s, c) = (TAU * (self.phase + x).rem_euclid(1.0)).sin_cos();
        let (lambda, lambda_prime) = self.lambda.eval_with(s, c);
        let (gamma, _) = self.gamma.eval_with(s, c);
        PointCoefficients {
            lambda,
            lambda_prime,
            gamma,
        }
    }

    pub fn lambda(&self, x: f64) -> f64 {
        self.coefficients(x).lambda
    }

    pub fn lambda_prime(&self, x: f64) -> f64 {
        self.coefficients(x).lambda_prime
    }

    pub fn gamma(&self, x: f64) -> f64 {
        self.coefficients(x).gamma
    }

    /// Closed-form averages; both are finite for every catalogued profile.
    pub fn integrals(&self) -> FlowIntegrals {
        FlowIntegrals {
            mean_gamma: Moment::Finite(self.gamma.mean_value()),
            mean_inv_lambda: Moment::Finite(self.lambda.mean_reciprocal()),
            source: IntegralSource::ClosedForm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::counter::CounterStream;

    fn wavy(seed: u64) -> ContinuousEnvironment {
        ContinuousEnvironment::new(
            ContinuousFamily::RotationFlow {
                lambda: Profile::new(2.0, 0.3, 1.0),
                gamma: Profile::new(1.5, 0.5, 0.0),
                phase: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn positive_everywhere_sampled() {
        let env = wavy(3);
        let xs = CounterStream::new(0, 0);
        for i in 0..100_000 {
            let x = (xs.open_unit(i) - 0.5) * 2000.0;
            let p = env.coefficients(x);
            assert!(p.lambda > 0.0 && p.gamma > 0.0);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let env = wavy(8);
        let xs = CounterStream::new(1, 0);
        let h = 1e-5;
        for i in 0..1000 {
            let x = (xs.open_unit(i) - 0.5) * 200.0;
            let fd = (env.lambda(x + h) - env.lambda(x - h)) / (2.0 * h);
            let exact = env.lambda_prime(x);
            assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "x={x}: {fd} vs {exact}"
            );
        }
    }

    #[test]
    fn explicit_phase_and_integrals() {
        let env = ContinuousEnvironment::new(
            ContinuousFamily::RotationFlow {
                lambda: Profile::new(2.0, 0.0, 1.0),
                gamma: Profile::constant(1.0),
                phase: Some(0.0),
            },
            0,
        )
        .unwrap();
        assert_eq!(env.lambda(0.0), 2.0);
        assert!((env.lambda(0.25) - 3.0).abs() < 1e-15);
        let i = env.integrals();
        assert_eq!(i.mean_gamma, Moment::Finite(1.0));
        assert!((i.mean_inv_lambda.value() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(ContinuousEnvironment::constant(0.0, 1.0).is_err());
        assert!(ContinuousEnvironment::constant(1.0, -1.0).is_err());
    }
}
