//! One runner per subcommand. A runner turns a merged [`RunConfig`] into a
//! [`Output`]: a JSON report, CSV tables and an optional verdict.

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use rwre_core::analysis::{
    birkhoff_estimate, convergence_report, ctmc_limit, diffusion_limit, walk_limit, ConvergenceReport,
    CurvePoint, EnvironmentEcho, LimitValue, Medium, MomentReport, Observable, Stabilization,
};
use rwre_core::corrector::{
    asymptotic_ratio, build_continuous, build_discrete, build_discrete_l, continuous_residuals,
    discrete_residuals, richardson_change, CorrectorVariant, ResidualPoint, ResidualSummary, DEFAULT_GRID,
};
use rwre_core::ctmc::{self, JumpOptions, DEFAULT_MAX_RATE};
use rwre_core::diffusion::{
    self, check_constant_drift_of_y, check_quadratic_bound, DiffusionCoefficients, EulerOptions,
};
use rwre_core::environment::{
    parse_continuous, parse_discrete, FlowIntegrals, IntegralSource, MediumIntegrals, Moment,
};
use rwre_core::walk::{self, CurveOptions, DEFAULT_EXACT_LIMIT, STREAM_SEED_RULE};
use rwre_core::{ContinuousEnvironment, DiscreteEnvironment, Threads, Verdict};

use crate::config::{Command, ProcessKind, RunConfig};

pub const DEFAULT_STREAMS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 0.05;
/// Largest relative corrector residual accepted by the `corrector` command.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Largest relative change of the continuous corrector under step halving.
pub const RICHARDSON_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub report: Value,
    /// `(file name, contents)`.
    pub tables: Vec<(&'static str, String)>,
    pub verdict: Option<Verdict>,
}

/// Fail beats Inconclusive beats any pass.
pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts.into_iter().fold(Verdict::Pass, |acc, v| match (acc, v) {
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
        (Verdict::DegeneratePass, _) | (_, Verdict::DegeneratePass) => Verdict::DegeneratePass,
        _ => Verdict::Pass,
    })
}

pub fn discrete_environment(config: &RunConfig) -> Result<DiscreteEnvironment> {
    let family = parse_discrete(config.require_env()?)?;
    let env = DiscreteEnvironment::new(family, config.env_seed())?;
    Ok(match config.env_scale {
        Some(s) if s != 1.0 => env.scaled(s)?,
        _ => env,
    })
}

pub fn continuous_environment(config: &RunConfig) -> Result<ContinuousEnvironment> {
    if config.env_scale.is_some() {
        bail!("--env-scale applies to discrete conductances only");
    }
    let family = parse_continuous(config.require_env()?)?;
    Ok(ContinuousEnvironment::new(family, config.env_seed())?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

fn report_json(config: &RunConfig, body: impl Serialize) -> Result<Value> {
    let mut value = serde_json::to_value(body)?;
    if let Value::Object(map) = &mut value {
        map.insert("config".into(), serde_json::to_value(config)?);
    }
    Ok(value)
}

fn verdict_for(
    curve: &[CurvePoint],
    limit: &LimitValue,
    tolerance: Option<f64>,
) -> Result<Option<ConvergenceReport>> {
    match tolerance {
        Some(t) => Ok(Some(convergence_report(curve, limit, t)?)),
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct CurveReport<'a> {
    process: rwre_core::analysis::Process,
    environment: &'a EnvironmentEcho,
    limit: &'a LimitValue,
    stream_seed_rule: &'static str,
    curve: &'a [CurvePoint],
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<&'a ConvergenceReport>,
}

fn curve_output(
    config: &RunConfig,
    report: &MomentReport,
    columns: &[&str],
    row: impl Fn(&CurvePoint) -> Vec<String>,
) -> Result<Output> {
    let convergence = verdict_for(&report.points, &report.limit, config.tolerance)?;
    let value = report_json(
        config,
        CurveReport {
            process: report.process,
            environment: &report.environment,
            limit: &report.limit,
            stream_seed_rule: STREAM_SEED_RULE,
            curve: &report.points,
            convergence: convergence.as_ref(),
        },
    )?;
    Ok(Output {
        report: value,
        tables: vec![("curve.csv", csv_table(columns, report.points.iter().map(row))?)],
        verdict: convergence.map(|c| c.verdict),
    })
}

pub fn simulate_walk(mut config: RunConfig, threads: Threads) -> Result<Output> {
    config.command = Some(Command::SimulateWalk);
    let env = discrete_environment(&config)?;
    config.steps.get_or_insert_with(|| vec![10, 100, 1000]);
    config.exact_limit.get_or_insert(DEFAULT_EXACT_LIMIT);
    config.streams.get_or_insert(DEFAULT_STREAMS);
    config.seed.get_or_insert(config.seed());
    config.env_seed.get_or_insert(config.env_seed());
    let options = CurveOptions {
        exact_limit: config.exact_limit.unwrap_or_default(),
        streams: config.streams.unwrap_or_default(),
        seed: config.seed(),
        threads,
    };
    let steps = config.steps.clone().unwrap_or_default();
    let report = walk::variance_curve(&env, &steps, &options)?;
    curve_output(
        &config,
        &report,
        &["n", "second_moment", "second_moment_over_n", "stderr", "method"],
        |p| {
            vec![
                p.time.to_string(),
                p.second_moment.to_string(),
                p.second_moment_over_time.to_string(),
                p.stderr.to_string(),
                p.method.as_str().to_string(),
            ]
        },
    )
}

pub fn simulate_ctmc(mut config: RunConfig, threads: Threads) -> Result<Output> {
    config.command = Some(Command::SimulateCtmc);
    let env = discrete_environment(&config)?;
    config.horizons.get_or_insert_with(|| vec![10.0, 100.0, 1000.0]);
    config.streams.get_or_insert(DEFAULT_STREAMS);
    config.max_rate.get_or_insert(DEFAULT_MAX_RATE);
    config.seed.get_or_insert(config.seed());
    config.env_seed.get_or_insert(config.env_seed());
    let options = JumpOptions {
        streams: config.streams.unwrap_or_default(),
        seed: config.seed(),
        threads,
        max_rate: config.max_rate.unwrap_or_default(),
    };
    let horizons = config.horizons.clone().unwrap_or_default();
    let report = ctmc::variance_curve(&env, &horizons, &options)?;
    curve_output(
        &config,
        &report,
        &["t", "second_moment_over_t", "stderr", "events_per_t"],
        |p| {
            vec![
                p.time.to_string(),
                p.second_moment_over_time.to_string(),
                p.stderr.to_string(),
                fmt_opt(p.events_per_time),
            ]
        },
    )
}

pub fn simulate_diffusion(mut config: RunConfig, threads: Threads) -> Result<Output> {
    config.command = Some(Command::SimulateDiffusion);
    let env = continuous_environment(&config)?;
    config.dt.get_or_insert(diffusion::DEFAULT_DT);
    config.horizons.get_or_insert_with(|| vec![1.0, 10.0]);
    config.streams.get_or_insert(DEFAULT_STREAMS);
    config.seed.get_or_insert(config.seed());
    config.env_seed.get_or_insert(config.env_seed());
    let bound = config.check_bound;
    if let Some(b) = bound {
        DiffusionCoefficients::with_bound(&env, b.sigma0sq, b.direction)?;
    }
    let options = EulerOptions {
        streams: config.streams.unwrap_or_default(),
        seed: config.seed(),
        threads,
        ..EulerOptions::default()
    };
    let dt = config.dt.unwrap_or_default();
    let horizons = config.horizons.clone().unwrap_or_default();
    let run = diffusion::integrate(&env, dt, &horizons, &options)?;
    let report = MomentReport {
        process: rwre_core::analysis::Process::Diffusion,
        environment: run.environment.clone(),
        points: (0..horizons.len()).map(|i| run.curve_point(i)).collect(),
        limit: diffusion::variance_limit_diffusion(&env),
    };

    let bound_checks = bound.map(|b| check_quadratic_bound(&run, b.sigma0sq, b.direction));
    let drift_checks = if config.check_drift.unwrap_or(false) {
        let widest = run
            .coarse
            .iter()
            .chain(&run.fine)
            .flatten()
            .fold(0.0f64, |a, &x| a.max(x.abs()));
        let table = build_continuous(&env, widest.ceil() + 1.0, DEFAULT_GRID)?;
        Some(check_constant_drift_of_y(&table, &run)?)
    } else {
        None
    };
    let convergence = verdict_for(&report.points, &report.limit, config.tolerance)?;

    let mut verdicts: Vec<Verdict> = Vec::new();
    verdicts.extend(bound_checks.iter().flatten().map(|c| c.verdict));
    verdicts.extend(drift_checks.iter().flatten().map(|c| c.verdict));
    verdicts.extend(convergence.iter().map(|c| c.verdict));
    let verdict = (!verdicts.is_empty()).then(|| combine(verdicts));

    let value = report_json(
        &config,
        json!({
            "process": report.process,
            "environment": report.environment,
            "limit": report.limit,
            "stream_seed_rule": STREAM_SEED_RULE,
            "dt": dt,
            "curve": report.points,
            "bound_checks": bound_checks,
            "drift_checks": drift_checks,
            "convergence": convergence,
            "verdict": verdict,
        }),
    )?;
    let table = csv_table(
        &["t", "second_moment_over_t", "stderr", "em_bias"],
        report.points.iter().map(|p| {
            vec![
                p.time.to_string(),
                p.second_moment_over_time.to_string(),
                p.stderr.to_string(),
                fmt_opt(p.em_bias),
            ]
        }),
    )?;
    Ok(Output {
        report: value,
        tables: vec![("curve.csv", table)],
        verdict,
    })
}

fn residual_csv(points: &[ResidualPoint]) -> Result<String> {
    csv_table(
        &["m_or_x", "residual"],
        points
            .iter()
            .map(|p| vec![p.coordinate.to_string(), p.residual.to_string()]),
    )
}

pub fn corrector(mut config: RunConfig, _threads: Threads) -> Result<Output> {
    config.command = Some(Command::Corrector);
    let variant = *config.variant.get_or_insert(CorrectorVariant::DiscreteP);
    config.seed.get_or_insert(config.seed());
    config.env_seed.get_or_insert(config.env_seed());

    let (table, residuals, richardson) = match variant {
        CorrectorVariant::Continuous => {
            let env = continuous_environment(&config)?;
            let grid = *config.grid.get_or_insert(DEFAULT_GRID);
            let reach = *config.reach.get_or_insert(100.0);
            let check = *config
                .residual_range
                .get_or_insert((reach - 2.0 * grid).min(10.0));
            let table = build_continuous(&env, reach, grid)?;
            let residuals = continuous_residuals(&table, &env, check)?;
            let richardson = richardson_change(&env, reach, grid)?;
            (table, residuals, Some(richardson))
        }
        _ => {
            let env = discrete_environment(&config)?;
            let range = *config.range.get_or_insert(10_000);
            let check = *config
                .residual_range
                .get_or_insert(range.saturating_sub(1) as f64);
            if check.fract() != 0.0 || check < 0.0 {
                bail!("--residual-range must be a nonnegative integer for a discrete corrector");
            }
            let table = match variant {
                CorrectorVariant::DiscreteP => build_discrete(&env, range)?,
                _ => build_discrete_l(&env, range)?,
            };
            let residuals = discrete_residuals(&table, &env, check as u64)?;
            (table, residuals, None)
        }
    };

    let summary = ResidualSummary::of(&residuals);
    let ratio = asymptotic_ratio(&table);
    let residual_ok = match variant {
        CorrectorVariant::Continuous => summary.max_abs < 1e-6,
        _ => summary.max_relative < RESIDUAL_TOLERANCE,
    };
    let verdict = if residual_ok && richardson.is_none_or(|r| r < RICHARDSON_TOLERANCE) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    let value = report_json(
        &config,
        json!({
            "variant": variant,
            "environment": table.environment(),
            "spacing": table.spacing(),
            "reach": table.reach(),
            "residual": summary,
            "asymptotic_ratio": ratio,
            "richardson_change": richardson,
            "verdict": verdict,
        }),
    )?;
    let values = csv_table(
        &["m_or_x", "f", "f_over_msq"],
        table.nodes().map(|(x, f)| {
            let ratio = if x != 0.0 {
                (f / (x * x)).to_string()
            } else {
                String::new()
            };
            vec![x.to_string(), f.to_string(), ratio]
        }),
    )?;
    Ok(Output {
        report: value,
        tables: vec![
            ("table.csv", values),
            ("residuals.csv", residual_csv(&residuals)?),
        ],
        verdict: Some(verdict),
    })
}

fn estimate_moment(e: &rwre_core::analysis::BirkhoffEstimate) -> Moment {
    match e.stabilization {
        Stabilization::DivergentSuspect => Moment::Infinite,
        _ => Moment::Finite(e.average()),
    }
}

pub fn estimate_limit(mut config: RunConfig, threads: Threads) -> Result<Output> {
    config.command = Some(Command::EstimateLimit);
    let process = *config.process.get_or_insert(ProcessKind::Walk);
    config.seed.get_or_insert(config.seed());
    config.env_seed.get_or_insert(config.env_seed());
    let tolerance = config.tolerance;

    let (environment, limit, integrals, estimates, curve) = match process {
        ProcessKind::Walk | ProcessKind::Ctmc => {
            let env = discrete_environment(&config)?;
            let (integrals, estimates) = match config.birkhoff {
                Some(n) => {
                    let c = birkhoff_estimate(Medium::Discrete(&env), Observable::Conductance, n)?;
                    let r = birkhoff_estimate(Medium::Discrete(&env), Observable::Resistance, n)?;
                    let integrals = MediumIntegrals {
                        mean_c: estimate_moment(&c),
                        mean_inv_c: estimate_moment(&r),
                        source: IntegralSource::BirkhoffEstimated,
                    };
                    (integrals, vec![c, r])
                }
                None => (env.integrals(), Vec::new()),
            };
            let limit = match process {
                ProcessKind::Walk => walk_limit(&integrals),
                _ => ctmc_limit(&integrals),
            };
            let curve = match (process, &config.steps, &config.horizons) {
                (ProcessKind::Walk, Some(steps), _) => {
                    config.streams.get_or_insert(DEFAULT_STREAMS);
                    let options = CurveOptions {
                        exact_limit: *config.exact_limit.get_or_insert(DEFAULT_EXACT_LIMIT),
                        streams: config.streams.unwrap_or_default(),
                        seed: config.seed(),
                        threads,
                    };
                    walk::variance_curve(&env, steps, &options)?.points
                }
                (ProcessKind::Ctmc, _, Some(horizons)) => {
                    let options = JumpOptions {
                        streams: *config.streams.get_or_insert(DEFAULT_STREAMS),
                        seed: config.seed(),
                        threads,
                        max_rate: *config.max_rate.get_or_insert(DEFAULT_MAX_RATE),
                    };
                    ctmc::variance_curve(&env, horizons, &options)?.points
                }
                _ => Vec::new(),
            };
            (
                EnvironmentEcho::discrete(&env),
                limit,
                serde_json::to_value(integrals)?,
                estimates,
                curve,
            )
        }
        ProcessKind::Diffusion => {
            let env = continuous_environment(&config)?;
            let (integrals, estimates) = match config.birkhoff {
                Some(n) => {
                    let g = birkhoff_estimate(Medium::Continuous(&env), Observable::Gamma, n)?;
                    let l = birkhoff_estimate(Medium::Continuous(&env), Observable::InverseLambda, n)?;
                    let integrals = FlowIntegrals {
                        mean_gamma: estimate_moment(&g),
                        mean_inv_lambda: estimate_moment(&l),
                        source: IntegralSource::BirkhoffEstimated,
                    };
                    (integrals, vec![g, l])
                }
                None => (env.integrals(), Vec::new()),
            };
            let limit = diffusion_limit(&integrals);
            let curve = match &config.horizons {
                Some(horizons) => {
                    let options = EulerOptions {
                        streams: *config.streams.get_or_insert(DEFAULT_STREAMS),
                        seed: config.seed(),
                        threads,
                        ..EulerOptions::default()
                    };
                    let dt = *config.dt.get_or_insert(diffusion::DEFAULT_DT);
                    diffusion::variance_curve(&env, dt, horizons, &options)?.points
                }
                None => Vec::new(),
            };
            (
                EnvironmentEcho::continuous(&env),
                limit,
                serde_json::to_value(integrals)?,
                estimates,
                curve,
            )
        }
    };

    let convergence = if curve.is_empty() {
        None
    } else {
        let t = *config
            .tolerance
            .get_or_insert(tolerance.unwrap_or(DEFAULT_TOLERANCE));
        Some(convergence_report(&curve, &limit, t).context("cannot judge the curve")?)
    };
    let verdict = convergence.as_ref().map(|c| c.verdict);
    let value = report_json(
        &config,
        json!({
            "environment": environment,
            "process": process,
            "limit": limit.value,
            "divergent": limit.divergent,
            "provenance": limit.provenance,
            "integrals": integrals,
            "birkhoff": estimates,
            "curve": curve,
            "convergence": convergence,
            "verdict": verdict,
        }),
    )?;
    Ok(Output {
        report: value,
        tables: Vec::new(),
        verdict,
    })
}
