//! Ergodic estimation of medium averages, quenched variance limits and the
//! verdict logic that compares a simulated `E(X²)/time` curve to its limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{
    ContinuousEnvironment, DiscreteEnvironment, IntegralSource, MediumIntegrals, Moment,
};
use crate::stats::{NeumaierSum, SampleSummary};

/// Sample spacing for Birkhoff averages along a continuous flow.
pub const FLOW_SAMPLE_STEP: f64 = 1.0 / 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("a convergence verdict needs at least 3 points spanning 2 decades (got {points} points over {decades:.2} decades)")]
    CurveTooShort { points: usize, decades: f64 },
    #[error("observable {observable:?} is not defined on a {medium} medium")]
    ObservableMismatch {
        observable: Observable,
        medium: &'static str,
    },
    #[error("a Birkhoff average needs at least one sample")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Walk,
    Ctmc,
    Diffusion,
}

/// One point of an `E(X_t²)/t` curve. `stderr` is the standard error of
/// `second_moment_over_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub second_moment: f64,
    pub second_moment_over_time: f64,
    pub stderr: f64,
    pub method: Method,
    /// Certified upper bound on the second moment when exact evolution lost mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events_per_time: Option<f64>,
    /// `E(X²)/t` at the base step minus the same at half the step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_bias: Option<f64>,
}

impl CurvePoint {
    pub(crate) fn exact(time: f64, second_moment: f64, certified_upper: Option<f64>) -> Self {
        Self {
            time,
            second_moment,
            second_moment_over_time: if time > 0.0 { second_moment / time } else { 0.0 },
            stderr: 0.0,
            method: Method::Exact,
            certified_upper,
            events_per_time: None,
            em_bias: None,
        }
    }

    /// Monte Carlo point from a sample of squared positions.
    pub(crate) fn monte_carlo(time: f64, squares: &[f64]) -> Self {
        let s = SampleSummary::of(squares);
        let (ratio, se) = if time > 0.0 {
            (s.mean / time, s.std_error() / time)
        } else {
            (0.0, 0.0)
        };
        Self {
            time,
            second_moment: s.mean,
            second_moment_over_time: ratio,
            stderr: se,
            method: Method::MonteCarlo,
            certified_upper: None,
            events_per_time: None,
            em_bias: None,
        }
    }
}

/// Theoretical `lim E(X_t²)/t` and where its inputs came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub value: f64,
    pub provenance: IntegralSource,
    /// Set when the limit is 0 because a medium average is infinite.
    pub divergent: bool,
}

impl LimitValue {
    fn from_product(a: Moment, b: Moment, numerator: f64, provenance: IntegralSource) -> Self {
        if a.is_infinite() || b.is_infinite() {
            LimitValue {
                value: 0.0,
                provenance,
                divergent: true,
            }
        } else {
            LimitValue {
                value: numerator / (a.value() * b.value()),
                provenance,
                divergent: false,
            }
        }
    }
}

/// `[(∫c dμ)(∫1/c dμ)]⁻¹`, zero as soon as either average is infinite.
pub fn harmonic_product_limit(mean_c: Moment, mean_inv_c: Moment) -> f64 {
    walk_limit(&MediumIntegrals {
        mean_c,
        mean_inv_c,
        source: IntegralSource::ClosedForm,
    })
    .value
}

pub fn walk_limit(integrals: &MediumIntegrals) -> LimitValue {
    LimitValue::from_product(integrals.mean_c, integrals.mean_inv_c, 1.0, integrals.source)
}

/// `2[∫1/c dμ]⁻¹` for the jump process.
pub fn ctmc_limit(integrals: &MediumIntegrals) -> LimitValue {
    LimitValue::from_product(Moment::Finite(1.0), integrals.mean_inv_c, 2.0, integrals.source)
}

/// `[(∫γ dμ)(∫1/λ dμ)]⁻¹` for the diffusion.
pub fn diffusion_limit(integrals: &crate::environment::FlowIntegrals) -> LimitValue {
    LimitValue::from_product(
        integrals.mean_gamma,
        integrals.mean_inv_lambda,
        1.0,
        integrals.source,
    )
}

/// Description of the medium a report was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentEcho {
    Discrete {
        family: crate::environment::DiscreteFamily,
        seed: u64,
        scale: f64,
        offset: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation_surrogate: Option<crate::environment::RotationSurrogate>,
    },
    Continuous {
        family: crate::environment::ContinuousFamily,
        seed: u64,
        phase: f64,
    },
}

impl EnvironmentEcho {
    pub fn discrete(env: &DiscreteEnvironment) -> Self {
        EnvironmentEcho::Discrete {
            family: env.family().clone(),
            seed: env.seed(),
            scale: env.scale(),
            offset: env.offset(),
            rotation_surrogate: env.rotation_surrogate(),
        }
    }

    pub fn continuous(env: &ContinuousEnvironment) -> Self {
        EnvironmentEcho::Continuous {
            family: env.family().clone(),
            seed: env.seed(),
            phase: env.phase(),
        }
    }
}

/// `E(X_t²)/t` curve with its theoretical limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub process: Process,
    pub environment: EnvironmentEcho,
    pub points: Vec<CurvePoint>,
    pub limit: LimitValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `c`
    Conductance,
    /// `1/c`
    Resistance,
    /// `c̄ = c + c∘T⁻¹`
    Cbar,
    /// `γ`
    Gamma,
    /// `1/λ`
    InverseLambda,
}

/// A medium to average over.
#[derive(Debug, Clone, Copy)]
pub enum Medium<'a> {
    Discrete(&'a DiscreteEnvironment),
    Continuous(&'a ContinuousEnvironment),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    Stable,
    Drifting,
    /// One term carries a visible share of the whole sum, or partial averages
    /// keep increasing while single terms matter. For i.i.d. nonnegative
    /// terms `max/sum → 0` exactly when the mean is finite.
    DivergentSuspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialAverage {
    pub count: usize,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffEstimate {
    pub observable: Observable,
    /// Averages after N/10, N/2 and N samples.
    pub partial: Vec<PartialAverage>,
    /// i.i.d.-style standard error at N; optimistic for correlated media.
    pub naive_stderr: f64,
    /// Largest single term over the full sum.
    pub max_term_share: f64,
    pub stabilization: Stabilization,
}

impl BirkhoffEstimate {
    pub fn average(&self) -> f64 {
        self.partial.last().map(|p| p.average).unwrap_or(f64::NAN)
    }
}

/// Share of the full sum above which a single term marks the average as
/// unresolved.
pub const DOMINANT_TERM_SHARE: f64 = 0.05;

/// Running averages `(1/N) Σ_{k<N} g(T^k ω)` (or the flow analogue sampled
/// every [`FLOW_SAMPLE_STEP`]) at N/10, N/2 and N.
pub fn birkhoff_estimate(
    medium: Medium<'_>,
    observable: Observable,
    n: usize,
) -> Result<BirkhoffEstimate, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptySample);
    }
    let sample: Box<dyn Fn(usize) -> f64 + '_> = match (medium, observable) {
        (Medium::Discrete(env), Observable::Conductance) => Box::new(move |k| env.conductance(k as i64)),
        (Medium::Discrete(env), Observable::Resistance) => Box::new(move |k| 1.0 / env.conductance(k as i64)),
        (Medium::Discrete(env), Observable::Cbar) => Box::new(move |k| env.cbar(k as i64)),
        (Medium::Continuous(env), Observable::Gamma) => {
            Box::new(move |i| env.gamma((i as f64 + 0.5) * FLOW_SAMPLE_STEP))
        }
        (Medium::Continuous(env), Observable::InverseLambda) => {
            Box::new(move |i| 1.0 / env.lambda((i as f64 + 0.5) * FLOW_SAMPLE_STEP))
        }
        (Medium::Discrete(_), _) => {
            return Err(AnalysisError::ObservableMismatch {
                observable,
                medium: "discrete",
            })
        }
        (Medium::Continuous(_), _) => {
            return Err(AnalysisError::ObservableMismatch {
                observable,
                medium: "continuous",
            })
        }
    };

    let marks = [(n / 10).max(1), (n / 2).max(1), n];
    let mut partial = Vec::with_capacity(3);
    let mut sum = NeumaierSum::new();
    let mut squares = NeumaierSum::new();
    let mut max_term = 0.0f64;
    let mut next = 0;
    for k in 0..n {
        let v = sample(k);
        sum.add(v);
        squares.add(v * v);
        max_term = max_term.max(v.abs());
        while next < marks.len() && k + 1 == marks[next] {
            partial.push(PartialAverage {
                count: k + 1,
                average: sum.value() / (k + 1) as f64,
            });
            next += 1;
        }
    }
    let mean = sum.value() / n as f64;
    let variance = if n > 1 {
        ((squares.value() - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    let naive_stderr = (variance / n as f64).sqrt();
    let total = sum.value().abs();
    let max_term_share = if total > 0.0 { max_term / total } else { 0.0 };

    let (a0, a1, a2) = (partial[0].average, partial[1].average, partial[2].average);
    let stabilization =
        if max_term_share >= DOMINANT_TERM_SHARE || (a0 < a1 && a1 < a2 && max_term_share > 0.01) {
            Stabilization::DivergentSuspect
        } else if (a2 - a1).abs() <= 4.0 * naive_stderr + 1e-12 * a2.abs() {
            Stabilization::Stable
        } else {
            Stabilization::Drifting
        };

    Ok(BirkhoffEstimate {
        observable,
        partial,
        naive_stderr,
        max_term_share,
        stabilization,
    })
}

/// `∫c dμ` and `∫1/c dμ` from one realization; an average flagged
/// divergent-suspect is reported as infinite.
pub fn estimate_integrals(env: &DiscreteEnvironment, n: usize) -> Result<MediumIntegrals, AnalysisError> {
    let to_moment = |e: BirkhoffEstimate| match e.stabilization {
        Stabilization::DivergentSuspect => Moment::Infinite,
        _ => Moment::Finite(e.average()),
    };
    Ok(MediumIntegrals {
        mean_c: to_moment(birkhoff_estimate(
            Medium::Discrete(env),
            Observable::Conductance,
            n,
        )?),
        mean_inv_c: to_moment(birkhoff_estimate(
            Medium::Discrete(env),
            Observable::Resistance,
            n,
        )?),
        source: IntegralSource::BirkhoffEstimated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    DegeneratePass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass | Verdict::DegeneratePass)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::DegeneratePass => "DEGENERATE-PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub verdict: Verdict,
    pub final_value: f64,
    /// Relative gap to a positive limit, absolute value for a zero limit.
    pub final_gap: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Compare a curve to its limit.
///
/// Positive limit: PASS when the last point is within `tolerance`
/// (relative) and the gap never grows between successive points, except
/// inside the tolerance band. Zero limit: DEGENERATE-PASS when every
/// successive decrease is resolved beyond twice the combined standard
/// error. Differences smaller than the noise give INCONCLUSIVE.
pub fn convergence_report(
    curve: &[CurvePoint],
    limit: &LimitValue,
    tolerance: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    let decades = match (curve.first(), curve.last()) {
        (Some(a), Some(b)) if a.time > 0.0 => (b.time / a.time).log10(),
        _ => 0.0,
    };
    if curve.len() < 3 || decades < 2.0 - 1e-9 {
        return Err(AnalysisError::CurveTooShort {
            points: curve.len(),
            decades,
        });
    }
    let last = curve.last().expect("checked non-empty");

    if limit.value > 0.0 && !limit.divergent {
        let l = limit.value;
        let gap = |p: &CurvePoint| (p.second_moment_over_time - l).abs() / l;
        let rel_se = |p: &CurvePoint| p.stderr / l;
        for w in curve.windows(2) {
            let (g0, g1) = (gap(&w[0]), gap(&w[1]));
            if g1 > g0.max(tolerance) + 2.0 * (rel_se(&w[0]) + rel_se(&w[1])) {
                return Ok(ConvergenceReport {
                    verdict: Verdict::Fail,
                    final_value: last.second_moment_over_time,
                    final_gap: gap(last),
                    tolerance,
                    detail: format!(
                        "gap grew from {g0:.4} at t={} to {g1:.4} at t={}",
                        w[0].time, w[1].time
                    ),
                });
            }
        }
        let g = gap(last);
        let verdict = if g <= tolerance {
            Verdict::Pass
        } else if 2.0 * rel_se(last) > g {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        Ok(ConvergenceReport {
            verdict,
            final_value: last.second_moment_over_time,
            final_gap: g,
            tolerance,
            detail: format!("relative gap {g:.4} against tolerance {tolerance}"),
        })
    } else {
        let mut verdict = Verdict::DegeneratePass;
        let mut detail = String::from("strictly decreasing across the curve");
        for w in curve.windows(2) {
            let drop = w[0].second_moment_over_time - w[1].second_moment_over_time;
            let noise = 2.0 * w[0].stderr.hypot(w[1].stderr);
            if drop > noise {
                continue;
            }
            if drop <= -noise {
                verdict = Verdict::Fail;
                detail = format!(
                    "curve does not decrease between t={} and t={}",
                    w[0].time, w[1].time
                );
                break;
            }
            verdict = Verdict::Inconclusive;
            detail = format!(
                "decrease between t={} and t={} is within noise",
                w[0].time, w[1].time
            );
        }
        Ok(ConvergenceReport {
            verdict,
            final_value: last.second_moment_over_time,
            final_gap: last.second_moment_over_time.abs(),
            tolerance,
            detail,
        })
    }
}
