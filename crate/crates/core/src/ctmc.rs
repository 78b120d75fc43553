//! The continuous-time walk with generator
//! `L f(k) = c(k−1) f(k−1) + c(k) f(k+1) − c̄(k) f(k)`, simulated exactly
//! (exponential holding times, no time discretisation).

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::analysis::{ctmc_limit, CurvePoint, EnvironmentEcho, LimitValue, MomentReport, Process};
use crate::environment::DiscreteEnvironment;
use crate::par::{map_indexed, stream_rng, Threads};
use crate::stats::SampleSummary;
use crate::walk::TrajectoryEnsemble;

/// Default cap on the total jump rate `c̄` at a visited site.
pub const DEFAULT_MAX_RATE: f64 = 1e6;

const MAX_CACHED_SITES: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("horizons must be finite, nonnegative and ascending")]
    BadHorizons,
    #[error(
        "rate overflow: total jump rate {rate:e} at site {site} exceeds the bound {bound:e}; \
         raise --max-rate or use a lighter-tailed environment"
    )]
    RateOverflow { site: i64, rate: f64, bound: f64 },
}

/// Position and elapsed time of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProcessState {
    pub position: i64,
    pub clock: f64,
}

/// Jump rates out of site `k`: `(c(k−1), c(k))` to the left and right.
pub fn jump_rates(env: &DiscreteEnvironment, k: i64) -> (f64, f64) {
    (env.conductance(k - 1), env.conductance(k))
}

/// Left probability of the embedded jump chain, `c(k−1)/c̄(k)`.
pub fn embedded_left_probability(env: &DiscreteEnvironment, k: i64) -> f64 {
    let (l, r) = jump_rates(env, k);
    l / (l + r)
}

#[derive(Debug, Clone, Copy)]
struct Site {
    left: f64,
    rate: f64,
}

/// Per-site left probability and total rate, cached around the origin.
struct SiteTable<'a> {
    env: &'a DiscreteEnvironment,
    half_width: i64,
    sites: Vec<Site>,
}

impl<'a> SiteTable<'a> {
    fn new(env: &'a DiscreteEnvironment, horizon: f64) -> Self {
        let rate = env.integrals().mean_cbar();
        let scale = if rate.is_infinite() {
            1.0
        } else {
            rate.value().max(1.0)
        };
        let reach = 8.0 * (scale * horizon).sqrt() + 64.0;
        let half_width = (reach.min(MAX_CACHED_SITES as f64)) as i64;
        let sites = (-half_width..=half_width).map(|k| Self::query(env, k)).collect();
        Self {
            env,
            half_width,
            sites,
        }
    }

    fn query(env: &DiscreteEnvironment, k: i64) -> Site {
        // The left probability comes from the same ratio as the walk kernel.
        Site {
            left: crate::walk::left_probability(env, k),
            rate: env.cbar(k),
        }
    }

    fn get(&self, k: i64) -> Site {
        if k.abs() <= self.half_width {
            self.sites[(k + self.half_width) as usize]
        } else {
            Self::query(self.env, k)
        }
    }
}

/// Positions of each stream at each horizon plus the number of jumps made
/// up to it.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEnsemble {
    pub trajectories: TrajectoryEnsemble,
    /// `events[i][s]`: jumps made by stream `s` up to `horizons[i]`.
    pub events: Vec<Vec<u64>>,
}

impl JumpEnsemble {
    /// Mean number of jumps per unit time up to horizon `i`, with its
    /// standard error.
    pub fn events_per_time(&self, i: usize) -> (f64, f64) {
        let t = self.trajectories.times[i];
        if t <= 0.0 {
            return (0.0, 0.0);
        }
        let counts: Vec<f64> = self.events[i].iter().map(|&e| e as f64).collect();
        let s = SampleSummary::of(&counts);
        (s.mean / t, s.std_error() / t)
    }

    pub fn curve_point(&self, i: usize) -> CurvePoint {
        let mut p = self.trajectories.curve_point(i);
        p.events_per_time = Some(self.events_per_time(i).0);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOptions {
    pub streams: usize,
    pub seed: u64,
    pub threads: Threads,
    pub max_rate: f64,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            streams: 10_000,
            seed: 0,
            threads: Threads::Auto,
            max_rate: DEFAULT_MAX_RATE,
        }
    }
}

fn check_horizons(horizons: &[f64]) -> Result<(), CtmcError> {
    let ok = horizons.iter().all(|t| t.is_finite() && *t >= 0.0) && horizons.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(CtmcError::BadHorizons)
    }
}

fn holding_time(site: Site, rng: &mut impl Rng) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / site.rate
}

/// Run one trajectory, recording `(position, jumps)` at each horizon.
fn run_stream(
    table: &SiteTable,
    horizons: &[f64],
    rng: &mut impl Rng,
    max_rate: f64,
) -> Result<Vec<(i64, u64)>, CtmcError> {
    let mut state = JumpProcessState {
        position: 0,
        clock: 0.0,
    };
    let mut events = 0u64;
    let mut site = table.get(0);
    let check = |k: i64, site: Site| {
        if site.rate > max_rate {
            Err(CtmcError::RateOverflow {
                site: k,
                rate: site.rate,
                bound: max_rate,
            })
        } else {
            Ok(())
        }
    };
    check(0, site)?;
    let mut next = holding_time(site, rng);
    let mut out = Vec::with_capacity(horizons.len());
    for &t in horizons {
        while next <= t {
            state.clock = next;
            let u: f64 = rng.random();
            state.position += if u < site.left { -1 } else { 1 };
            events += 1;
            site = table.get(state.position);
            check(state.position, site)?;
            next = state.clock + holding_time(site, rng);
        }
        out.push((state.position, events));
    }
    Ok(out)
}

/// `streams` independent copies of the jump process from 0, recorded at
/// each horizon.
pub fn simulate_jump_process(
    env: &DiscreteEnvironment,
    horizons: &[f64],
    options: &JumpOptions,
) -> Result<JumpEnsemble, CtmcError> {
    check_horizons(horizons)?;
    let table = SiteTable::new(env, horizons.last().copied().unwrap_or(0.0));
    let per_stream = map_indexed(options.streams, options.threads, |s| {
        let mut rng = stream_rng(options.seed, s as u64);
        run_stream(&table, horizons, &mut rng, options.max_rate)
    });
    let per_stream = per_stream.into_iter().collect::<Result<Vec<_>, _>>()?;
    let events = (0..horizons.len())
        .map(|i| per_stream.iter().map(|s| s[i].1).collect())
        .collect();
    let positions = per_stream
        .into_iter()
        .map(|s| s.into_iter().map(|(x, _)| x).collect())
        .collect();
    Ok(JumpEnsemble {
        trajectories: TrajectoryEnsemble::from_streams(horizons.to_vec(), options.seed, positions),
        events,
    })
}

/// `2 [∫1/c]⁻¹`, or 0 with the divergence flag when `∫1/c = ∞`.
pub fn variance_limit_ctmc(env: &DiscreteEnvironment) -> LimitValue {
    ctmc_limit(&env.integrals())
}

/// Monte Carlo `E_ω(X_t²)/t` and jumps per unit time at each horizon.
pub fn variance_curve(
    env: &DiscreteEnvironment,
    horizons: &[f64],
    options: &JumpOptions,
) -> Result<MomentReport, CtmcError> {
    let ensemble = simulate_jump_process(env, horizons, options)?;
    Ok(MomentReport {
        process: Process::Ctmc,
        environment: EnvironmentEcho::discrete(env),
        points: (0..horizons.len()).map(|i| ensemble.curve_point(i)).collect(),
        limit: variance_limit_ctmc(env),
    })
}
