//! The diffusion `dX = σ(X) dB + b(X) dt` with `σ² = λ/γ` and
//! `b = λ'/(2γ)`, whose generator is `(2γ)⁻¹ (λ f')'`.
//!
//! Integration is Euler–Maruyama at a fixed step `dt`. Every run also
//! carries a path at `dt/2` driven by the same Brownian increments, so the
//! discretisation bias of any moment is measured alongside it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    diffusion_limit, CurvePoint, EnvironmentEcho, LimitValue, MomentReport, Process, Verdict,
};
use crate::corrector::{CorrectorTable, CorrectorVariant};
use crate::environment::ContinuousEnvironment;
use crate::par::{map_indexed, stream_rng, Threads};
use crate::stats::SampleSummary;

pub const DEFAULT_DT: f64 = 1e-3;
/// Default bound on `|X|` beyond which a path is declared unstable.
pub const DEFAULT_GUARD: f64 = 1e8;
/// Points per period used to validate a declared `σ₀²`.
pub const BOUND_SAMPLES: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("horizons must be finite, nonnegative, ascending multiples of dt = {dt} (got {horizon})")]
    BadHorizon { horizon: f64, dt: f64 },
    #[error("unstable step: stream {stream} reached |X| = {position:e} at t = {time}; reduce dt")]
    UnstableStep { stream: usize, time: f64, position: f64 },
    #[error("declared {direction:?} bound {bound} is violated: sigma2({x}) = {sigma2}")]
    BoundViolated {
        direction: BoundDirection,
        bound: f64,
        x: f64,
        sigma2: f64,
    },
    #[error("corrector table covers |x| <= {reach}, but a path reached {position}")]
    TableTooSmall { reach: f64, position: f64 },
    #[error("corrector table does not belong to this run's environment")]
    EnvironmentMismatch,
    #[error("expected a continuous corrector table, got {0:?}")]
    WrongTable(CorrectorVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    Upper,
    Lower,
}

/// `σ²(x) = λ/γ`, `b(x) = λ'/(2γ)` and an optional declared bound on `σ²`.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionCoefficients<'a> {
    env: &'a ContinuousEnvironment,
    bound: Option<(f64, BoundDirection)>,
}

impl<'a> DiffusionCoefficients<'a> {
    pub fn new(env: &'a ContinuousEnvironment) -> Self {
        Self { env, bound: None }
    }

    /// Declare `σ² ≤ sigma0sq` (or `≥`), checked on `BOUND_SAMPLES` points
    /// of one period.
    pub fn with_bound(
        env: &'a ContinuousEnvironment,
        sigma0sq: f64,
        direction: BoundDirection,
    ) -> Result<Self, DiffusionError> {
        let c = Self::new(env);
        for i in 0..BOUND_SAMPLES {
            let x = i as f64 / BOUND_SAMPLES as f64;
            let s2 = c.sigma2(x);
            let ok = match direction {
                BoundDirection::Upper => s2 <= sigma0sq,
                BoundDirection::Lower => s2 >= sigma0sq,
            };
            if !ok {
                return Err(DiffusionError::BoundViolated {
                    direction,
                    bound: sigma0sq,
                    x,
                    sigma2: s2,
                });
            }
        }
        Ok(Self {
            env,
            bound: Some((sigma0sq, direction)),
        })
    }

    pub fn environment(&self) -> &ContinuousEnvironment {
        self.env
    }

    pub fn sigma0sq(&self) -> Option<(f64, BoundDirection)> {
        self.bound
    }

    pub fn sigma2(&self, x: f64) -> f64 {
        let c = self.env.coefficients(x);
        c.lambda / c.gamma
    }

    pub fn drift(&self, x: f64) -> f64 {
        let c = self.env.coefficients(x);
        c.lambda_prime / (2.0 * c.gamma)
    }

    /// `(σ(x), b(x))` from a single coefficient evaluation.
    #[inline]
    pub fn sigma_drift(&self, x: f64) -> (f64, f64) {
        let c = self.env.coefficients(x);
        ((c.lambda / c.gamma).sqrt(), c.lambda_prime / (2.0 * c.gamma))
    }

    /// `(min σ², max σ²)` over `samples` points of one period.
    pub fn sigma2_range(&self, samples: usize) -> (f64, f64) {
        (0..samples.max(1))
            .map(|i| self.sigma2(i as f64 / samples.max(1) as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerOptions {
    pub streams: usize,
    pub seed: u64,
    pub threads: Threads,
    pub guard: f64,
}

impl Default for EulerOptions {
    fn default() -> Self {
        Self {
            streams: 10_000,
            seed: 0,
            threads: Threads::Auto,
            guard: DEFAULT_GUARD,
        }
    }
}

/// Endpoints of an Euler–Maruyama ensemble at step `dt` and of the coupled
/// ensemble at `dt/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerRun {
    pub dt: f64,
    pub horizons: Vec<f64>,
    pub master_seed: u64,
    pub environment: EnvironmentEcho,
    /// `coarse[i][s]`: stream `s` at `horizons[i]` with step `dt`.
    pub coarse: Vec<Vec<f64>>,
    /// The same with step `dt/2`.
    pub fine: Vec<Vec<f64>>,
}

/// Statistics of `g(X_t)` over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub time: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Mean at `dt` minus mean at `dt/2`.
    pub em_bias: f64,
}

impl EulerRun {
    pub fn streams(&self) -> usize {
        self.coarse.first().map_or(0, Vec::len)
    }

    /// `E g(X_t)` at horizon `i` with its standard error and EM bias.
    pub fn moment(&self, i: usize, g: impl Fn(f64) -> f64) -> MomentEstimate {
        let coarse: Vec<f64> = self.coarse[i].iter().map(|&x| g(x)).collect();
        let fine: Vec<f64> = self.fine[i].iter().map(|&x| g(x)).collect();
        let c = SampleSummary::of(&coarse);
        let f = SampleSummary::of(&fine);
        MomentEstimate {
            time: self.horizons[i],
            mean: c.mean,
            stderr: c.std_error(),
            em_bias: c.mean - f.mean,
        }
    }

    pub fn second_moment(&self, i: usize) -> MomentEstimate {
        self.moment(i, |x| x * x)
    }

    pub fn curve_point(&self, i: usize) -> CurvePoint {
        let squares: Vec<f64> = self.coarse[i].iter().map(|&x| x * x).collect();
        let mut p = CurvePoint::monte_carlo(self.horizons[i], &squares);
        let t = self.horizons[i];
        let bias = self.second_moment(i).em_bias;
        p.em_bias = Some(if t > 0.0 { bias / t } else { 0.0 });
        p
    }
}

fn horizon_steps(dt: f64, horizons: &[f64]) -> Result<Vec<u64>, DiffusionError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DiffusionError::InvalidStep(dt));
    }
    let mut prev = 0u64;
    horizons
        .iter()
        .map(|&t| {
            let bad = DiffusionError::BadHorizon { horizon: t, dt };
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad);
            }
            let n = (t / dt).round();
            if (n * dt - t).abs() > 1e-9 * t.max(1.0) || (n as u64) < prev {
                return Err(bad);
            }
            prev = n as u64;
            Ok(prev)
        })
        .collect()
}

/// Euler paths at steps `dt, dt/2, …, dt/2^refinements` driven by one
/// Brownian path; returns `[level][horizon]` endpoints or the time and
/// position at which a level left the guard.
pub(crate) fn run_levels(
    coeffs: &DiffusionCoefficients,
    dt: f64,
    steps: &[u64],
    refinements: u32,
    guard: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>, (f64, f64)> {
    let m = 1usize << refinements;
    let levels = refinements as usize + 1;
    let mut z = vec![0.0f64; m];
    let mut x = vec![0.0f64; levels];
    let mut out = vec![Vec::with_capacity(steps.len()); levels];
    let total = steps.last().copied().unwrap_or(0);
    let mut next = 0;
    for step in 0..=total {
        while next < steps.len() && steps[next] == step {
            for l in 0..levels {
                out[l].push(x[l]);
            }
            next += 1;
        }
        if step == total {
            break;
        }
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for (l, xl) in x.iter_mut().enumerate() {
            let sub = 1usize << l;
            let block = m >> l;
            let h = dt / sub as f64;
            let scale = (h / block as f64).sqrt();
            for j in 0..sub {
                let w: f64 = z[j * block..(j + 1) * block].iter().sum();
                let (s, b) = coeffs.sigma_drift(*xl);
                *xl += s * scale * w + b * h;
            }
            if !(xl.abs() <= guard) {
                return Err(((step + 1) as f64 * dt, *xl));
            }
        }
    }
    Ok(out)
}

/// `streams` Euler–Maruyama paths from `X₀ = 0` at step `dt`, each paired
/// with its `dt/2` refinement.
pub fn integrate(
    env: &ContinuousEnvironment,
    dt: f64,
    horizons: &[f64],
    options: &EulerOptions,
) -> Result<EulerRun, DiffusionError> {
    let steps = horizon_steps(dt, horizons)?;
    let coeffs = DiffusionCoefficients::new(env);
    let per_stream = map_indexed(options.streams, options.threads, |s| {
        let mut rng = stream_rng(options.seed, s as u64);
        run_levels(&coeffs, dt, &steps, 1, options.guard, &mut rng).map_err(|(time, position)| {
            DiffusionError::UnstableStep {
                stream: s,
                time,
                position,
            }
        })
    });
    let per_stream = per_stream.into_iter().collect::<Result<Vec<_>, _>>()?;
    let column = |level: usize| -> Vec<Vec<f64>> {
        (0..horizons.len())
            .map(|i| per_stream.iter().map(|s| s[level][i]).collect())
            .collect()
    };
    Ok(EulerRun {
        dt,
        horizons: horizons.to_vec(),
        master_seed: options.seed,
        environment: EnvironmentEcho::continuous(env),
        coarse: column(0),
        fine: column(1),
    })
}

/// `[(∫γ)(∫1/λ)]⁻¹`.
pub fn variance_limit_diffusion(env: &ContinuousEnvironment) -> LimitValue {
    diffusion_limit(&env.integrals())
}

/// Monte Carlo `E(X_t²)/t` with the per-horizon EM bias.
pub fn variance_curve(
    env: &ContinuousEnvironment,
    dt: f64,
    horizons: &[f64],
    options: &EulerOptions,
) -> Result<MomentReport, DiffusionError> {
    let run = integrate(env, dt, horizons, options)?;
    Ok(MomentReport {
        process: Process::Diffusion,
        environment: run.environment.clone(),
        points: (0..horizons.len()).map(|i| run.curve_point(i)).collect(),
        limit: variance_limit_diffusion(env),
    })
}

/// Fraction of `σ₀² t` (resp. `t`) above which the standard error or the EM
/// bias makes a verdict inconclusive.
const INCONCLUSIVE_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub time: f64,
    pub direction: BoundDirection,
    pub mean_square: f64,
    pub stderr: f64,
    pub bound: f64,
    pub em_bias: f64,
    pub verdict: Verdict,
}

/// Compare `E(X_t²)` with `σ₀² t` at every horizon: the upper check passes
/// when `mean ≤ σ₀² t + 3 SE`, the lower one when `mean ≥ σ₀² t − 3 SE`.
pub fn check_quadratic_bound(run: &EulerRun, sigma0sq: f64, direction: BoundDirection) -> Vec<BoundCheck> {
    (0..run.horizons.len())
        .map(|i| {
            let m = run.second_moment(i);
            let bound = sigma0sq * m.time;
            let holds = match direction {
                BoundDirection::Upper => m.mean <= bound + 3.0 * m.stderr,
                BoundDirection::Lower => m.mean >= bound - 3.0 * m.stderr,
            };
            let noisy = m.time > 0.0
                && (m.stderr > INCONCLUSIVE_SHARE * bound || m.em_bias.abs() > INCONCLUSIVE_SHARE * bound);
            let verdict = match (noisy, holds) {
                (true, _) => Verdict::Inconclusive,
                (false, true) => Verdict::Pass,
                (false, false) => Verdict::Fail,
            };
            BoundCheck {
                time: m.time,
                direction,
                mean_square: m.mean,
                stderr: m.stderr,
                bound,
                em_bias: m.em_bias,
                verdict,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub time: f64,
    /// Monte Carlo `E f(X_t)`.
    pub mean: f64,
    pub stderr: f64,
    pub em_bias: f64,
    /// `E f(X_t) − t`.
    pub residual: f64,
    pub verdict: Verdict,
}

/// `E f(X_t) = t` for the continuous corrector `f`: passes when
/// `|mean − t| ≤ 4 SE + |EM bias|`.
pub fn check_constant_drift_of_y(
    table: &CorrectorTable,
    run: &EulerRun,
) -> Result<Vec<DriftCheck>, DiffusionError> {
    if table.variant() != CorrectorVariant::Continuous {
        return Err(DiffusionError::WrongTable(table.variant()));
    }
    if *table.environment() != run.environment {
        return Err(DiffusionError::EnvironmentMismatch);
    }
    let reach = table.reach();
    let widest = run
        .coarse
        .iter()
        .chain(&run.fine)
        .flatten()
        .fold(0.0f64, |a, &x| a.max(x.abs()));
    if widest > reach {
        return Err(DiffusionError::TableTooSmall {
            reach,
            position: widest,
        });
    }
    Ok((0..run.horizons.len())
        .map(|i| {
            let m = run.moment(i, |x| table.value_at(x).expect("inside table"));
            let residual = m.mean - m.time;
            let noisy = m.time > 0.0
                && (m.stderr > INCONCLUSIVE_SHARE * m.time || m.em_bias.abs() > INCONCLUSIVE_SHARE * m.time);
            let verdict = if noisy {
                Verdict::Inconclusive
            } else if residual.abs() <= 4.0 * m.stderr + m.em_bias.abs() {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            DriftCheck {
                time: m.time,
                mean: m.mean,
                stderr: m.stderr,
                em_bias: m.em_bias,
                residual,
                verdict,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::build_continuous;
    use crate::environment::{ContinuousFamily, Profile};

    fn flow(lambda: Profile, gamma: Profile) -> ContinuousEnvironment {
        ContinuousEnvironment::new(
            ContinuousFamily::RotationFlow {
                lambda,
                gamma,
                phase: Some(0.0),
            },
            0,
        )
        .unwrap()
    }

    fn sine() -> ContinuousEnvironment {
        flow(Profile::new(2.0, 0.0, 1.0), Profile::constant(1.0))
    }

    fn options(streams: usize, seed: u64) -> EulerOptions {
        EulerOptions {
            streams,
            seed,
            ..EulerOptions::default()
        }
    }

    #[test]
    fn limits() {
        let bm = ContinuousEnvironment::constant(1.0, 1.0).unwrap();
        assert_eq!(variance_limit_diffusion(&bm).value, 1.0);
        assert!((variance_limit_diffusion(&sine()).value - 3f64.sqrt()).abs() < 1e-12);
        let g = flow(Profile::constant(1.0), Profile::new(2.0, 1.0, 0.0));
        assert!((variance_limit_diffusion(&g).value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coefficients_match_finite_differences() {
        let env = flow(Profile::new(2.0, 0.4, 1.0), Profile::new(1.5, 0.2, -0.3));
        let c = DiffusionCoefficients::new(&env);
        let h = 1e-5;
        for i in 0..500 {
            let x = -7.0 + i as f64 * 0.0287;
            assert!(c.sigma2(x) > 0.0);
            let fd = (env.lambda(x + h) - env.lambda(x - h)) / (2.0 * h) / (2.0 * env.gamma(x));
            assert!(
                (c.drift(x) - fd).abs() <= 1e-5 * c.drift(x).abs().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn declared_bounds_are_validated() {
        let env = flow(Profile::new(1.0, 0.0, 0.5), Profile::constant(1.0));
        assert!(DiffusionCoefficients::with_bound(&env, 1.5, BoundDirection::Upper).is_ok());
        assert!(DiffusionCoefficients::with_bound(&env, 0.5, BoundDirection::Lower).is_ok());
        assert!(matches!(
            DiffusionCoefficients::with_bound(&env, 1.4, BoundDirection::Upper),
            Err(DiffusionError::BoundViolated { .. })
        ));
        let (lo, hi) = DiffusionCoefficients::new(&env).sigma2_range(1000);
        assert!((lo - 0.5).abs() < 1e-9 && (hi - 1.5).abs() < 1e-9);
    }

    #[test]
    fn zero_horizon_endpoints() {
        let run = integrate(&sine(), 0.01, &[0.0, 0.5], &options(50, 1)).unwrap();
        assert!(run.coarse[0].iter().chain(&run.fine[0]).all(|&x| x == 0.0));
        assert_eq!(run.second_moment(0).mean, 0.0);
    }

    #[test]
    fn brownian_motion_second_moment() {
        let bm = ContinuousEnvironment::constant(1.0, 1.0).unwrap();
        let run = integrate(&bm, 0.01, &[1.0, 4.0], &options(20_000, 3)).unwrap();
        for i in 0..2 {
            let m = run.second_moment(i);
            assert!((m.mean - m.time).abs() <= 4.0 * m.stderr, "{m:?}");
            // the coupled fine path shares the Brownian increments exactly
            assert!(m.em_bias.abs() < 1e-9 * m.time);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let a = integrate(
            &sine(),
            0.01,
            &[1.0],
            &EulerOptions {
                threads: Threads::Fixed(1),
                ..options(300, 9)
            },
        )
        .unwrap();
        let b = integrate(
            &sine(),
            0.01,
            &[1.0],
            &EulerOptions {
                threads: Threads::Fixed(3),
                ..options(300, 9)
            },
        )
        .unwrap();
        let c = integrate(&sine(), 0.01, &[1.0], &options(300, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coarse, c.coarse);
    }

    #[test]
    fn horizons_must_sit_on_the_grid() {
        let env = sine();
        assert!(matches!(
            integrate(&env, 0.3, &[1.0], &options(1, 0)),
            Err(DiffusionError::BadHorizon { .. })
        ));
        assert!(matches!(
            integrate(&env, 0.1, &[2.0, 1.0], &options(1, 0)),
            Err(DiffusionError::BadHorizon { .. })
        ));
        assert_eq!(
            integrate(&env, 0.0, &[1.0], &options(1, 0)),
            Err(DiffusionError::InvalidStep(0.0))
        );
    }

    #[test]
    fn guard_reports_instability() {
        let run = integrate(
            &sine(),
            0.5,
            &[50.0],
            &EulerOptions {
                guard: 1.0,
                ..options(4, 0)
            },
        );
        assert!(matches!(run, Err(DiffusionError::UnstableStep { .. })));
    }

    #[test]
    fn weak_order_one() {
        // Bias between consecutive halvings of dt, all levels on one
        // Brownian path: successive differences shrink by about 2.
        let env = sine();
        let coeffs = DiffusionCoefficients::new(&env);
        let dt: f64 = 0.1;
        let t: f64 = 2.0;
        let steps = [(t / dt).round() as u64];
        let n = 40_000;
        let paths = map_indexed(n, Threads::Auto, |s| {
            run_levels(&coeffs, dt, &steps, 2, 1e8, &mut stream_rng(77, s as u64)).unwrap()
        });
        let moment = |l: usize| paths.iter().map(|p| p[l][0] * p[l][0]).sum::<f64>() / n as f64;
        let (m0, m1, m2) = (moment(0), moment(1), moment(2));
        let ratio = (m0 - m1).abs() / (m1 - m2).abs();
        assert!((1.5..=3.0).contains(&ratio), "{m0} {m1} {m2} ratio {ratio}");
    }

    #[test]
    fn two_sided_envelope() {
        let env = flow(Profile::new(2.0, 0.0, 1.0), Profile::constant(1.0));
        let (lo, hi) = DiffusionCoefficients::new(&env).sigma2_range(10_000);
        let run = integrate(&env, 0.01, &[0.5, 2.0, 8.0], &options(10_000, 4)).unwrap();
        for p in (0..3).map(|i| run.curve_point(i)) {
            let r = p.second_moment_over_time;
            assert!(r >= lo - 4.0 * p.stderr && r <= hi + 4.0 * p.stderr, "{p:?}");
        }
    }

    #[test]
    fn quadratic_bounds_for_scaled_brownian_motion() {
        let env = ContinuousEnvironment::constant(2.0, 1.0).unwrap();
        let run = integrate(&env, 0.01, &[0.0, 1.0, 5.0], &options(20_000, 6)).unwrap();
        for dir in [BoundDirection::Upper, BoundDirection::Lower] {
            assert!(check_quadratic_bound(&run, 2.0, dir)
                .iter()
                .all(|c| c.verdict == Verdict::Pass));
        }
        let upper = check_quadratic_bound(&run, 1.0, BoundDirection::Upper);
        assert_eq!(upper[0].verdict, Verdict::Pass);
        assert!(upper[1..].iter().all(|c| c.verdict == Verdict::Fail));
        let few = integrate(&env, 0.01, &[1.0], &options(10, 6)).unwrap();
        assert_eq!(
            check_quadratic_bound(&few, 2.0, BoundDirection::Upper)[0].verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn corrector_of_y_has_unit_drift() {
        let env = sine();
        let run = integrate(&env, 0.01, &[0.0, 2.0], &options(10_000, 12)).unwrap();
        let table = build_continuous(&env, 30.0, 1e-3).unwrap();
        let checks = check_constant_drift_of_y(&table, &run).unwrap();
        assert_eq!(checks[0].mean, 0.0);
        assert_eq!(checks[0].verdict, Verdict::Pass);
        assert_eq!(checks[1].verdict, Verdict::Pass, "{:?}", checks[1]);
        let small = build_continuous(&env, 0.5, 1e-3).unwrap();
        assert!(matches!(
            check_constant_drift_of_y(&small, &run),
            Err(DiffusionError::TableTooSmall { .. })
        ));
        let other =
            build_continuous(&ContinuousEnvironment::constant(1.0, 1.0).unwrap(), 30.0, 1e-2).unwrap();
        assert_eq!(
            check_constant_drift_of_y(&other, &run),
            Err(DiffusionError::EnvironmentMismatch)
        );
    }
}
