use serde::{Deserialize, Serialize};

use super::counter::{mix64, CounterStream};
use super::markov::MarkovSampler;
use super::profile::Profile;
use super::{EnvError, IntegralSource, MediumIntegrals, Moment};

const IID_LANE: u64 = 0x4949_44;
const PHASE_LANE: u64 = 0x5048_4153_45;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Catalogued conductance fields on the edges `[k, k+1]` of ℤ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DiscreteFamily {
    Constant {
        value: f64,
    },
    /// i.i.d., `a` with probability `p`, otherwise `b`.
    IidTwoPoint {
        a: f64,
        b: f64,
        p: f64,
    },
    /// i.i.d. uniform on `(lo, hi]`; `lo = 0` is allowed and gives a
    /// non-integrable resistance.
    IidUniform {
        lo: f64,
        hi: f64,
    },
    /// i.i.d. with `P(c > x) = x^-exponent` for `x ≥ 1`.
    IidPareto {
        exponent: f64,
    },
    /// `c(k) = g(ω + kα mod 1)`. Without an explicit phase, ω is drawn from the seed.
    Rotation {
        alpha: f64,
        profile: Profile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<f64>,
    },
    /// Stationary Markov chain on finitely many states, `c(k) = values[state_k]`.
    Markov {
        transition: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
}

impl DiscreteFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DiscreteFamily::Constant { .. } => "constant",
            DiscreteFamily::IidTwoPoint { .. } => "iid-two-point",
            DiscreteFamily::IidUniform { .. } => "iid-uniform",
            DiscreteFamily::IidPareto { .. } => "iid-pareto",
            DiscreteFamily::Rotation { .. } => "rotation",
            DiscreteFamily::Markov { .. } => "markov",
        }
    }
}

/// The rational stand-in for an irrational rotation: α ≈ `alpha_numerator / 2^64`,
/// with the orbit started at `phase_numerator / 2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationSurrogate {
    pub alpha_numerator: u64,
    pub phase_numerator: u64,
    pub denominator_log2: u32,
}

#[derive(Debug, Clone)]
enum Sampler {
    Constant(f64),
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
        stream: CounterStream,
    },
    Uniform {
        lo: f64,
        width: f64,
        stream: CounterStream,
    },
    Pareto {
        inv_exponent: f64,
        stream: CounterStream,
    },
    Rotation {
        alpha: u64,
        phase: u64,
        profile: Profile,
    },
    Markov(Box<MarkovSampler>),
}

impl Sampler {
    #[inline]
    fn value(&self, k: i64) -> f64 {
        match self {
            Sampler::Constant(v) => *v,
            Sampler::TwoPoint { a, b, p, stream } => {
                if stream.open_unit(k) <= *p {
                    *a
                } else {
                    *b
                }
            }
            Sampler::Uniform { lo, width, stream } => lo + width * stream.open_unit(k),
            Sampler::Pareto { inv_exponent, stream } => stream.open_unit(k).powf(-inv_exponent),
            Sampler::Rotation {
                alpha,
                phase,
                profile,
            } => {
                let pos = phase.wrapping_add(alpha.wrapping_mul(k as u64));
                profile.value(super::counter::half_open_unit(pos))
            }
            Sampler::Markov(m) => m.value_at(k),
        }
    }
}

/// A seed-reproducible stationary conductance field `k ↦ c(T^k ω)`.
///
/// Queries are pure: the same `(family, seed, k)` always yields the same
/// bits, in any order and from any thread.
#[derive(Debug, Clone)]
pub struct DiscreteEnvironment {
    family: DiscreteFamily,
    seed: u64,
    offset: i64,
    scale: f64,
    sampler: Sampler,
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl DiscreteEnvironment {
    pub fn new(family: DiscreteFamily, seed: u64) -> Result<Self, EnvError> {
        let name = family.name();
        let sampler = match &family {
            DiscreteFamily::Constant { value } => {
                if !positive_finite(*value) {
                    return Err(EnvError::invalid(name, "value must be finite and > 0"));
                }
                Sampler::Constant(*value)
            }
            DiscreteFamily::IidTwoPoint { a, b, p } => {
                if !positive_finite(*a) || !positive_finite(*b) {
                    return Err(EnvError::invalid(name, "both values must be finite and > 0"));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(EnvError::invalid(name, "p must lie in [0, 1]"));
                }
                Sampler::TwoPoint {
                    a: *a,
                    b: *b,
                    p: *p,
                    stream: CounterStream::new(seed, IID_LANE),
                }
            }
            DiscreteFamily::IidUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(EnvError::invalid(name, "need 0 <= lo < hi, both finite"));
                }
                Sampler::Uniform {
                    lo: *lo,
                    width: hi - lo,
                    stream: CounterStream::new(seed, IID_LANE),
                }
            }
            DiscreteFamily::IidPareto { exponent } => {
                if !positive_finite(*exponent) {
                    return Err(EnvError::invalid(name, "exponent must be finite and > 0"));
                }
                Sampler::Pareto {
                    inv_exponent: 1.0 / exponent,
                    stream: CounterStream::new(seed, IID_LANE),
                }
            }
            DiscreteFamily::Rotation {
                alpha,
                profile,
                phase,
            } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0) {
                    return Err(EnvError::invalid(name, "alpha must lie in (0, 1)"));
                }
                profile.validate(name)?;
                let phase = match phase {
                    Some(p) if p.is_finite() => (p.rem_euclid(1.0) * TWO_POW_64) as u64,
                    Some(_) => return Err(EnvError::invalid(name, "phase must be finite")),
                    None => mix64(seed ^ mix64(PHASE_LANE)),
                };
                Sampler::Rotation {
                    alpha: (alpha * TWO_POW_64) as u64,
                    phase,
                    profile: *profile,
                }
            }
            DiscreteFamily::Markov { transition, values } => {
                Sampler::Markov(Box::new(MarkovSampler::new(transition, values, seed)?))
            }
        };
        Ok(Self {
            family,
            seed,
            offset: 0,
            scale: 1.0,
            sampler,
        })
    }

    pub fn constant(value: f64) -> Result<Self, EnvError> {
        Self::new(DiscreteFamily::Constant { value }, 0)
    }

    pub fn family(&self) -> &DiscreteFamily {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation_surrogate(&self) -> Option<RotationSurrogate> {
        match self.sampler {
            Sampler::Rotation { alpha, phase, .. } => Some(RotationSurrogate {
                alpha_numerator: alpha,
                phase_numerator: phase,
                denominator_log2: 64,
            }),
            _ => None,
        }
    }

    /// The environment seen from site `j`: `shifted(j).conductance(k) == conductance(k + j)`.
    pub fn shifted(&self, j: i64) -> Self {
        Self {
            offset: self.offset.wrapping_add(j),
            ..self.clone()
        }
    }

    /// All conductances multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, EnvError> {
        if !positive_finite(s) {
            return Err(EnvError::invalid(
                self.family.name(),
                "scale must be finite and > 0",
            ));
        }
        Ok(Self {
            scale: self.scale * s,
            ..self.clone()
        })
    }

    /// Conductance before the global scale factor. Transition probabilities
    /// depend only on conductance ratios, so they are built from this.
    #[inline]
    pub fn relative_conductance(&self, k: i64) -> f64 {
        self.sampler.value(k.wrapping_add(self.offset))
    }

    /// Conductance of the edge `[k, k+1]`.
    #[inline]
    pub fn conductance(&self, k: i64) -> f64 {
        self.scale * self.relative_conductance(k)
    }

    /// `c(k) + c(k − 1)`: total conductance at site `k`.
    #[inline]
    pub fn cbar(&self, k: i64) -> f64 {
        self.conductance(k) + self.conductance(k - 1)
    }

    /// Closed-form `∫c dμ` and `∫1/c dμ`.
    pub fn integrals(&self) -> MediumIntegrals {
        let (mean_c, mean_inv_c) = match &self.family {
            DiscreteFamily::Constant { value } => (Moment::Finite(*value), Moment::Finite(1.0 / value)),
            DiscreteFamily::IidTwoPoint { a, b, p } => (
                Moment::Finite(p * a + (1.0 - p) * b),
                Moment::Finite(p / a + (1.0 - p) / b),
            ),
            DiscreteFamily::IidUniform { lo, hi } => (
                Moment::Finite(0.5 * (lo + hi)),
                if *lo > 0.0 {
                    Moment::Finite((hi / lo).ln() / (hi - lo))
                } else {
                    Moment::Infinite
                },
            ),
            DiscreteFamily::IidPareto { exponent } => (
                if *exponent > 1.0 {
                    Moment::Finite(exponent / (exponent - 1.0))
                } else {
                    Moment::Infinite
                },
                Moment::Finite(exponent / (exponent + 1.0)),
            ),
            DiscreteFamily::Rotation { profile, .. } => (
                Moment::Finite(profile.mean_value()),
                Moment::Finite(profile.mean_reciprocal()),
            ),
            DiscreteFamily::Markov { .. } => {
                let Sampler::Markov(m) = &self.sampler else {
                    unreachable!("markov family always carries a markov sampler")
                };
                let pi = m.stationary();
                let mean: f64 = pi.iter().zip(m.values()).map(|(p, v)| p * v).sum();
                let mean_inv: f64 = pi.iter().zip(m.values()).map(|(p, v)| p / v).sum();
                (Moment::Finite(mean), Moment::Finite(mean_inv))
            }
        };
        MediumIntegrals {
            mean_c: mean_c.scaled(self.scale),
            mean_inv_c: mean_inv_c.scaled(1.0 / self.scale),
            source: IntegralSource::ClosedForm,
        }
    }
}
