//! The discrete-time quenched walk with Markov operator
//! `P f(k) = (c(k−1) f(k−1) + c(k) f(k+1)) / c̄(k)`, started at 0.

use rand::Rng;
use thiserror::Error;

use crate::analysis::{walk_limit, CurvePoint, EnvironmentEcho, MomentReport, Process};
use crate::environment::DiscreteEnvironment;
use crate::par::{map_indexed, stream_rng, Threads};
use crate::stats::NeumaierSum;

/// Exact evolution runs up to this many steps by default; Monte Carlo beyond.
pub const DEFAULT_EXACT_LIMIT: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error(
        "window too small: {escaped:.3e} of the mass left the window by step {steps}, \
         so the second moment is only known within {width:.3e} (tolerance {tolerance:.3e}); \
         widen the window to at least {steps}"
    )]
    WindowTooSmall {
        steps: u64,
        escaped: f64,
        width: f64,
        tolerance: f64,
    },
    #[error("checkpoints must be strictly ascending")]
    UnsortedCheckpoints,
}

fn check_ascending(times: &[u64]) -> Result<(), WalkError> {
    if times.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(WalkError::UnsortedCheckpoints)
    }
}

/// Left/right jump probabilities on the window `[−W, W]`.
///
/// Built from [`DiscreteEnvironment::relative_conductance`]: a global
/// conductance scale cancels in `c(k−1)/c̄(k)`, and leaving it out makes
/// that cancellation exact in floating point too.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    half_width: i64,
    left: Vec<f64>,
}

/// `c(k−1) / c̄(k)`.
pub fn left_probability(env: &DiscreteEnvironment, k: i64) -> f64 {
    let behind = env.relative_conductance(k - 1);
    let ahead = env.relative_conductance(k);
    behind / (behind + ahead)
}

impl TransitionKernel {
    pub fn new(env: &DiscreteEnvironment, half_width: u64) -> Self {
        let w = half_width as i64;
        Self {
            half_width: w,
            left: (-w..=w).map(|k| left_probability(env, k)).collect(),
        }
    }

    pub fn half_width(&self) -> u64 {
        self.half_width as u64
    }

    #[inline]
    pub fn left(&self, k: i64) -> f64 {
        self.left[(k + self.half_width) as usize]
    }

    /// `c(k) / c̄(k)`, computed as the complement of [`left`](Self::left).
    #[inline]
    pub fn right(&self, k: i64) -> f64 {
        1.0 - self.left(k)
    }
}

/// Law of `X_n` on `[−W, W]`; mass pushed past the edge is tallied in `escaped`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    half_width: i64,
    mass: Vec<f64>,
    escaped: f64,
    steps: u64,
}

impl LatticeDistribution {
    /// Point mass at 0.
    pub fn delta(half_width: u64) -> Self {
        let w = half_width as i64;
        let mut mass = vec![0.0; 2 * half_width as usize + 1];
        mass[w as usize] = 1.0;
        Self {
            half_width: w,
            mass,
            escaped: 0.0,
            steps: 0,
        }
    }

    pub fn half_width(&self) -> u64 {
        self.half_width as u64
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn escaped(&self) -> f64 {
        self.escaped
    }

    pub fn mass_at(&self, k: i64) -> f64 {
        if k.abs() > self.half_width {
            0.0
        } else {
            self.mass[(k + self.half_width) as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().copied().collect::<NeumaierSum>().value() + self.escaped
    }

    /// Outermost occupied site: `min(n, W)` adjusted to the parity of `n`.
    fn reach(&self) -> i64 {
        let r = (self.steps as i64).min(self.half_width);
        if (self.steps as i64 - r) % 2 == 0 {
            r
        } else {
            r - 1
        }
    }

    /// One application of the kernel.
    pub fn step(&self, kernel: &TransitionKernel) -> Self {
        let mut next = self.clone();
        let mut scratch = Vec::new();
        next.step_in_place(kernel, &mut scratch);
        next
    }

    pub fn step_in_place(&mut self, kernel: &TransitionKernel, scratch: &mut Vec<f64>) {
        assert!(
            kernel.half_width >= self.half_width,
            "kernel window [{0}, {0}] does not cover the distribution window",
            kernel.half_width
        );
        let w = self.half_width;
        let r = self.reach();
        scratch.clear();
        scratch.resize(self.mass.len(), 0.0);
        let mut k = -r;
        while k <= r {
            let m = self.mass[(k + w) as usize];
            if m != 0.0 {
                let to_left = m * kernel.left(k);
                let to_right = m * kernel.right(k);
                if k - 1 < -w {
                    self.escaped += to_left;
                } else {
                    scratch[(k - 1 + w) as usize] += to_left;
                }
                if k + 1 > w {
                    self.escaped += to_right;
                } else {
                    scratch[(k + 1 + w) as usize] += to_right;
                }
            }
            k += 2;
        }
        std::mem::swap(&mut self.mass, scratch);
        self.steps += 1;
    }

    /// `E X_{n+1}² − E X_n² = 1 + 2 Σ k mass(k) (right(k) − left(k))`,
    /// valid while no mass leaves the window.
    pub fn second_moment_increment(&self, kernel: &TransitionKernel) -> f64 {
        let w = self.half_width;
        let r = self.reach();
        let mut acc = NeumaierSum::new();
        let mut k = -r;
        while k <= r {
            let m = self.mass[(k + w) as usize];
            if m != 0.0 {
                acc.add(k as f64 * m * (kernel.right(k) - kernel.left(k)));
            }
            k += 2;
        }
        1.0 + 2.0 * acc.value()
    }

    /// `Σ k² mass(k)` over the window.
    pub fn second_moment(&self) -> f64 {
        let w = self.half_width;
        let r = self.reach();
        let mut acc = NeumaierSum::new();
        let mut k = -r;
        while k <= r {
            let kf = k as f64;
            acc.add(kf * kf * self.mass[(k + w) as usize]);
            k += 2;
        }
        acc.value()
    }
}

/// `E_ω(X_n²)` with a certified enclosure `[value, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment {
    pub steps: u64,
    pub value: f64,
    /// `value + escaped · n²`: escaped mass sits at most `n` away from 0.
    pub upper: f64,
    pub escaped: f64,
}

impl SecondMoment {
    pub fn is_exact(&self) -> bool {
        self.escaped == 0.0
    }

    pub fn width(&self) -> f64 {
        self.upper - self.value
    }
}

/// Exact second moments at each checkpoint from one evolution pass on `[−W, W]`.
/// `window: None` uses `W = max(checkpoints)`, which never loses mass.
pub fn evolve_second_moments(
    env: &DiscreteEnvironment,
    checkpoints: &[u64],
    window: Option<u64>,
) -> Result<Vec<SecondMoment>, WalkError> {
    check_ascending(checkpoints)?;
    let horizon = checkpoints.last().copied().unwrap_or(0);
    let w = window.unwrap_or(horizon);
    let kernel = TransitionKernel::new(env, w);
    let mut dist = LatticeDistribution::delta(w);
    let mut scratch = Vec::with_capacity(dist.mass.len());
    let mut out = Vec::with_capacity(checkpoints.len());
    // A window as wide as the horizon never loses mass, so the moment can be
    // carried forward step by step; for a symmetric kernel every increment
    // is exactly 1.
    let incremental = w >= horizon;
    let mut running = NeumaierSum::new();
    for &n in checkpoints {
        while dist.steps < n {
            if incremental {
                running.add(dist.second_moment_increment(&kernel));
            }
            dist.step_in_place(&kernel, &mut scratch);
        }
        let value = if incremental {
            running.value()
        } else {
            dist.second_moment()
        };
        let nf = n as f64;
        out.push(SecondMoment {
            steps: n,
            value,
            upper: value + dist.escaped * nf * nf,
            escaped: dist.escaped,
        });
    }
    Ok(out)
}

/// `E_ω(X_n²)` by exact evolution. Fails when mass escaped the window and
/// the certified interval is wider than `tolerance`.
pub fn second_moment_exact(
    env: &DiscreteEnvironment,
    steps: u64,
    window: Option<u64>,
    tolerance: f64,
) -> Result<SecondMoment, WalkError> {
    let m = evolve_second_moments(env, &[steps], window)?[0];
    if m.escaped > 0.0 && m.width() > tolerance {
        return Err(WalkError::WindowTooSmall {
            steps,
            escaped: m.escaped,
            width: m.width(),
            tolerance,
        });
    }
    Ok(m)
}

/// Monte Carlo endpoints: `endpoints[i][s]` is stream `s` at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub master_seed: u64,
    pub endpoints: Vec<Vec<i64>>,
}

/// How stream generators are derived from the master seed.
pub const STREAM_SEED_RULE: &str = "ChaCha8(seed_from_u64(master_seed)).set_stream(stream_index)";

impl TrajectoryEnsemble {
    pub fn streams(&self) -> usize {
        self.endpoints.first().map_or(0, Vec::len)
    }

    pub fn squares(&self, checkpoint: usize) -> Vec<f64> {
        self.endpoints[checkpoint]
            .iter()
            .map(|&x| {
                let x = x as f64;
                x * x
            })
            .collect()
    }

    pub fn curve_point(&self, checkpoint: usize) -> CurvePoint {
        CurvePoint::monte_carlo(self.times[checkpoint], &self.squares(checkpoint))
    }

    /// Transpose per-stream records into per-checkpoint columns.
    pub(crate) fn from_streams(times: Vec<f64>, master_seed: u64, per_stream: Vec<Vec<i64>>) -> Self {
        let endpoints = (0..times.len())
            .map(|i| per_stream.iter().map(|s| s[i]).collect())
            .collect();
        Self {
            times,
            master_seed,
            endpoints,
        }
    }
}

/// `streams` independent walks from 0, recorded at each checkpoint.
pub fn sample_trajectories(
    env: &DiscreteEnvironment,
    checkpoints: &[u64],
    streams: usize,
    master_seed: u64,
    threads: Threads,
) -> Result<TrajectoryEnsemble, WalkError> {
    check_ascending(checkpoints)?;
    let horizon = checkpoints.last().copied().unwrap_or(0);
    let kernel = TransitionKernel::new(env, horizon);
    let per_stream = map_indexed(streams, threads, |s| {
        let mut rng = stream_rng(master_seed, s as u64);
        let mut pos = 0i64;
        let mut t = 0u64;
        checkpoints
            .iter()
            .map(|&n| {
                while t < n {
                    let u: f64 = rng.random();
                    pos += if u < kernel.left(pos) { -1 } else { 1 };
                    t += 1;
                }
                pos
            })
            .collect::<Vec<_>>()
    });
    Ok(TrajectoryEnsemble::from_streams(
        checkpoints.iter().map(|&n| n as f64).collect(),
        master_seed,
        per_stream,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    /// Largest `n` handled by exact evolution.
    pub exact_limit: u64,
    pub streams: usize,
    pub seed: u64,
    pub threads: Threads,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            exact_limit: DEFAULT_EXACT_LIMIT,
            streams: 10_000,
            seed: 0,
            threads: Threads::Auto,
        }
    }
}

/// `E_ω(X_n²)/n` at each `n` (exact up to `exact_limit`, Monte Carlo
/// beyond) together with `[(∫c)(∫1/c)]⁻¹`.
pub fn variance_curve(
    env: &DiscreteEnvironment,
    steps: &[u64],
    options: &CurveOptions,
) -> Result<MomentReport, WalkError> {
    check_ascending(steps)?;
    let split = steps.partition_point(|&n| n <= options.exact_limit);
    let (exact, sampled) = steps.split_at(split);
    let mut points: Vec<CurvePoint> = evolve_second_moments(env, exact, None)?
        .into_iter()
        .map(|m| CurvePoint::exact(m.steps as f64, m.value, None))
        .collect();
    if !sampled.is_empty() {
        let ensemble = sample_trajectories(env, sampled, options.streams, options.seed, options.threads)?;
        points.extend((0..sampled.len()).map(|i| ensemble.curve_point(i)));
    }
    Ok(MomentReport {
        process: Process::Walk,
        environment: EnvironmentEcho::discrete(env),
        points,
        limit: walk_limit(&env.integrals()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{DiscreteFamily, Profile};
    use crate::stats::SampleSummary;

    fn two_point(seed: u64) -> DiscreteEnvironment {
        DiscreteEnvironment::new(
            DiscreteFamily::IidTwoPoint {
                a: 1.0,
                b: 2.0,
                p: 0.5,
            },
            seed,
        )
        .unwrap()
    }

    /// c(−1) = 1, c(0) = 3: constant 1 shifted so edge [0,1] reads 3.
    fn one_three() -> DiscreteEnvironment {
        DiscreteEnvironment::new(
            DiscreteFamily::Markov {
                transition: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                values: vec![1.0, 3.0],
            },
            1,
        )
        .unwrap()
    }

    fn binomial(n: u64, j: u64) -> f64 {
        (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn first_step_is_fair_for_constant() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let kernel = TransitionKernel::new(&env, 4);
        let d = LatticeDistribution::delta(4).step(&kernel);
        assert_eq!((d.mass_at(-1), d.mass_at(0), d.mass_at(1)), (0.5, 0.0, 0.5));
    }

    #[test]
    fn first_step_follows_conductances() {
        let base = one_three();
        let j = (-1000..1000)
            .find(|&j| base.conductance(j - 1) == 1.0 && base.conductance(j) == 3.0)
            .unwrap();
        let env = base.shifted(j);
        assert_eq!((env.conductance(-1), env.conductance(0)), (1.0, 3.0));
        let kernel = TransitionKernel::new(&env, 2);
        let d = LatticeDistribution::delta(2).step(&kernel);
        assert_eq!((d.mass_at(-1), d.mass_at(1)), (0.25, 0.75));
    }

    #[test]
    fn constant_walk_matches_binomial() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let n = 40;
        let kernel = TransitionKernel::new(&env, n);
        let mut d = LatticeDistribution::delta(n);
        for _ in 0..n {
            d = d.step(&kernel);
        }
        for j in 0..=n {
            let k = 2 * j as i64 - n as i64;
            let p = binomial(n, j) / 2f64.powi(n as i32);
            assert!((d.mass_at(k) - p).abs() < 1e-15, "k={k}");
        }
        let two = LatticeDistribution::delta(3).step(&kernel).step(&kernel);
        assert_eq!(
            (two.mass_at(-2), two.mass_at(0), two.mass_at(2)),
            (0.25, 0.5, 0.25)
        );
    }

    #[test]
    fn simple_walk_second_moment_is_n() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let m = second_moment_exact(&env, 100, None, 0.0).unwrap();
        assert!(m.is_exact());
        assert!((m.value - 100.0).abs() < 1e-10);
        assert!((second_moment_exact(&env, 3, None, 0.0).unwrap().value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn simple_walk_moments_are_exact_integers() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let steps: Vec<u64> = (0..=1000).collect();
        for m in evolve_second_moments(&env, &steps, None).unwrap() {
            assert_eq!(m.value, m.steps as f64);
        }
    }

    #[test]
    fn carried_moment_matches_direct_sum() {
        let env = two_point(6);
        let carried = evolve_second_moments(&env, &[10, 500, 2000], None).unwrap();
        let direct = evolve_second_moments(&env, &[10, 500, 2000], Some(2001)).unwrap();
        for (a, b) in carried.iter().zip(&direct) {
            assert_eq!(b.escaped, 0.0);
            assert!((a.value - b.value).abs() <= 1e-12 * b.value, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn support_parity_and_conservation() {
        let env = two_point(2);
        let kernel = TransitionKernel::new(&env, 300);
        let mut d = LatticeDistribution::delta(300);
        let mut scratch = Vec::new();
        for n in 1..=300u64 {
            d.step_in_place(&kernel, &mut scratch);
            assert!((d.total() - 1.0).abs() < 1e-12);
            if n % 37 == 0 {
                for k in -300i64..=300 {
                    let m = d.mass_at(k);
                    if k.unsigned_abs() > n || (k - n as i64).rem_euclid(2) != 0 {
                        assert_eq!(m, 0.0, "n={n} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn small_window_is_certified() {
        let env = two_point(5);
        let full = second_moment_exact(&env, 400, None, 0.0).unwrap();
        let clipped = evolve_second_moments(&env, &[400], Some(60)).unwrap()[0];
        assert!(clipped.escaped > 0.0);
        assert!(clipped.value <= full.value && full.value <= clipped.upper);
        let mut tight = clipped.escaped;
        tight *= 0.5;
        assert!(matches!(
            second_moment_exact(&env, 400, Some(60), tight),
            Err(WalkError::WindowTooSmall { .. })
        ));
        // A window that keeps essentially everything certifies within a loose tolerance.
        assert!(second_moment_exact(&env, 400, Some(200), 1e-6).is_ok());
    }

    #[test]
    fn reversible_with_respect_to_cbar() {
        let env = two_point(8);
        let kernel = TransitionKernel::new(&env, 500);
        for k in -499..499 {
            let lhs = env.cbar(k) * kernel.right(k);
            let rhs = env.cbar(k + 1) * kernel.left(k + 1);
            assert!(
                (lhs - rhs).abs() <= 4.0 * f64::EPSILON * lhs,
                "k={k}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn zero_checkpoint_is_origin() {
        let env = two_point(1);
        let e = sample_trajectories(&env, &[0], 1000, 3, Threads::Fixed(1)).unwrap();
        assert!(e.endpoints[0].iter().all(|&x| x == 0));
    }

    #[test]
    fn fair_first_step() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let n = 1_000_000;
        let e = sample_trajectories(&env, &[1], n, 11, Threads::Auto).unwrap();
        let right = e.endpoints[0].iter().filter(|&&x| x == 1).count() as f64 / n as f64;
        assert!((right - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn endpoints_stay_in_range() {
        let env = two_point(4);
        let e = sample_trajectories(&env, &[1, 10, 77], 2000, 1, Threads::Auto).unwrap();
        for (i, &t) in [1i64, 10, 77].iter().enumerate() {
            assert!(e.endpoints[i]
                .iter()
                .all(|&x| x.abs() <= t && (x - t).rem_euclid(2) == 0));
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let env = two_point(6);
        let a = sample_trajectories(&env, &[10, 100], 3000, 9, Threads::Fixed(1)).unwrap();
        let b = sample_trajectories(&env, &[10, 100], 3000, 9, Threads::Fixed(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        for seed in 0..5 {
            let env = two_point(100 + seed);
            let exact = second_moment_exact(&env, 1000, None, 0.0).unwrap().value;
            let e = sample_trajectories(&env, &[1000], 100_000, seed, Threads::Auto).unwrap();
            let s = SampleSummary::of(&e.squares(0));
            assert!(
                (s.mean - exact).abs() < 4.0 * s.std_error(),
                "seed {seed}: {} vs {exact}",
                s.mean
            );
        }
    }

    #[test]
    fn unsorted_checkpoints_are_rejected() {
        let env = two_point(1);
        assert_eq!(
            sample_trajectories(&env, &[10, 5], 10, 0, Threads::Auto),
            Err(WalkError::UnsortedCheckpoints)
        );
    }

    #[test]
    fn curve_limits() {
        let env = DiscreteEnvironment::constant(1.0).unwrap();
        let r = variance_curve(&env, &[10, 100, 1000], &CurveOptions::default()).unwrap();
        assert!(r
            .points
            .iter()
            .all(|p| (p.second_moment_over_time - 1.0).abs() < 1e-12));
        assert_eq!(r.limit.value, 1.0);
        let r = variance_curve(&two_point(1), &[10], &CurveOptions::default()).unwrap();
        assert!((r.limit.value - 8.0 / 9.0).abs() < 1e-15);
        let uniform = DiscreteEnvironment::new(DiscreteFamily::IidUniform { lo: 0.0, hi: 1.0 }, 2).unwrap();
        let r = variance_curve(&uniform, &[100, 1000, 10_000], &CurveOptions::default()).unwrap();
        assert_eq!(r.limit.value, 0.0);
        assert!(r.limit.divergent);
        let v: Vec<f64> = r.points.iter().map(|p| p.second_moment_over_time).collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn curve_switches_to_monte_carlo() {
        let env = DiscreteEnvironment::new(
            DiscreteFamily::Rotation {
                alpha: 0.618_033_988_749_894_8,
                profile: Profile::new(2.0, 1.0, 0.0),
                phase: None,
            },
            3,
        )
        .unwrap();
        let options = CurveOptions {
            exact_limit: 50,
            streams: 20_000,
            ..CurveOptions::default()
        };
        let r = variance_curve(&env, &[50, 200], &options).unwrap();
        assert_eq!(r.points[0].method, crate::analysis::Method::Exact);
        assert_eq!(r.points[1].method, crate::analysis::Method::MonteCarlo);
        let exact = second_moment_exact(&env, 200, None, 0.0).unwrap().value / 200.0;
        assert!((r.points[1].second_moment_over_time - exact).abs() < 4.0 * r.points[1].stderr);
    }
}
