//! Run configuration: what a subcommand was asked to do, merged from an
//! optional JSON file and the command-line flags (flags win), then filled
//! with defaults and echoed into every report.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rwre_core::corrector::CorrectorVariant;
use rwre_core::diffusion::BoundDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SimulateWalk,
    SimulateCtmc,
    SimulateDiffusion,
    Corrector,
    EstimateLimit,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Walk,
    Ctmc,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Trivial,
    Full,
}

/// A declared bound `σ² ≤ σ₀²` (or `≥`) for the quadratic-mean check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub sigma0sq: f64,
    pub direction: BoundDirection,
}

/// Every field is optional so that a partial file and partial flags can be
/// layered; `resolve` fills what the command needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Environment descriptor, compact (`iid-two-point:1,2,0.5`) or JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_seed: Option<u64>,
    /// Multiplier applied to every conductance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_limit: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streams: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_bound: Option<BoundSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_drift: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<CorrectorVariant>,
    /// Half-length `M` of a discrete corrector table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<u64>,
    /// Half-length `X` of a continuous corrector table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<f64>,
    /// Sites (or length) over which corrector residuals are checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_range: Option<f64>,
    /// Estimate medium averages from this many samples of one realization
    /// instead of using closed forms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birkhoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! layer {
    ($top:expr, $base:expr, $($field:ident),* $(,)?) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| {
            format!(
                "config file {} is not a valid run configuration (JSON with lower_snake_case keys)",
                path.display()
            )
        })
    }

    /// Values from `self` take precedence over `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        layer!(
            self,
            base,
            command,
            env,
            env_seed,
            env_scale,
            seed,
            process,
            steps,
            exact_limit,
            horizons,
            streams,
            max_rate,
            dt,
            check_bound,
            check_drift,
            variant,
            range,
            reach,
            grid,
            residual_range,
            birkhoff,
            tolerance,
            suite,
            out,
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    /// The environment seed defaults to the Monte Carlo seed.
    pub fn env_seed(&self) -> u64 {
        self.env_seed.unwrap_or_else(|| self.seed())
    }

    pub fn require_env(&self) -> Result<&str> {
        match &self.env {
            Some(e) => Ok(e),
            None => bail!(
                "no environment given; pass --env, e.g. --env iid-two-point:1,2,0.5 \
                 (discrete) or --env flow:2,0,1 (continuous)"
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig {
            env: Some("constant:1".into()),
            seed: Some(4),
            streams: Some(10),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.streams, Some(10));
        assert_eq!(merged.env_seed(), 9);
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig {
            command: Some(Command::SimulateDiffusion),
            env: Some("flow:2,0,1".into()),
            horizons: Some(vec![1.0, 2.5]),
            dt: Some(1e-3),
            check_bound: Some(BoundSpec {
                sigma0sq: 1.5,
                direction: BoundDirection::Upper,
            }),
            variant: Some(CorrectorVariant::DiscreteL),
            out: Some(PathBuf::from("out")),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"stepz": [1]}"#).is_err());
    }
}
