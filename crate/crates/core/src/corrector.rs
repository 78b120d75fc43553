//! Explicit correctors: functions `f` with `f(0) = 0` whose image under the
//! generator is identically 1, so that `E_ω f(X_t) = t`.
//!
//! * `DiscreteP`: `(P − I) f = 1` for the walk,
//!   `f(m) = Σ_{ℓ=0}^{m−1} c(ℓ)⁻¹ Σ_{k=1}^{ℓ} c̄(k)` for `m ≥ 1` and
//!   `f(m) = Σ_{ℓ=1}^{−m} c(−ℓ)⁻¹ Σ_{k=0}^{ℓ−1} c̄(−k)` for `m ≤ −1`.
//! * `DiscreteL`: `L f = 1` for the jump process, the same double sum with
//!   the inner weights `c̄` replaced by 1.
//! * `Continuous`: `(2γ)⁻¹ (λ f')' = 1`,
//!   `f(x) = ∫_0^x λ(v)⁻¹ ∫_0^v 2γ(u) du dv` (mirrored for `x < 0`).
//!
//! In flux form `D(k) = c(k)(f(k+1) − f(k))` the discrete equations read
//! `D(k) − D(k−1) = c̄(k)` (resp. 1), which is what the prefix recurrences
//! below accumulate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::EnvironmentEcho;
use crate::environment::{ContinuousEnvironment, DiscreteEnvironment, Moment};
use crate::stats::NeumaierSum;

/// Default quadrature step for the continuous corrector.
pub const DEFAULT_GRID: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectorError {
    #[error("range must be at least 1")]
    EmptyRange,
    #[error("grid step must be positive and finite, got {0}")]
    InvalidGrid(f64),
    #[error("requested range {requested} exceeds the table interior {available}")]
    RangeOutsideTable { requested: f64, available: f64 },
    #[error("operation needs a {expected} table, got {actual:?}")]
    VariantMismatch {
        expected: &'static str,
        actual: CorrectorVariant,
    },
    #[error("table was built for a different environment")]
    EnvironmentMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectorVariant {
    DiscreteP,
    DiscreteL,
    Continuous,
}

/// Values of a corrector on `[−M, M]` (unit spacing) or on the grid
/// `x_i = i·h`, `|x_i| ≤ X`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorTable {
    variant: CorrectorVariant,
    environment: EnvironmentEcho,
    half_len: usize,
    spacing: f64,
    values: Vec<f64>,
    /// `f'` at the nodes (continuous variant only).
    slopes: Vec<f64>,
    /// `lim f(x)/x²` from the medium averages.
    expected_ratio: Moment,
}

impl CorrectorTable {
    pub fn variant(&self) -> CorrectorVariant {
        self.variant
    }

    pub fn environment(&self) -> &EnvironmentEcho {
        &self.environment
    }

    /// `M` for discrete tables.
    pub fn half_len(&self) -> usize {
        self.half_len
    }

    /// 1 for discrete tables, `h` for the continuous one.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Largest covered `|x|`.
    pub fn reach(&self) -> f64 {
        self.half_len as f64 * self.spacing
    }

    pub fn expected_ratio(&self) -> Moment {
        self.expected_ratio
    }

    /// `f(m)` for a discrete table, `f(m·h)` for a continuous one.
    pub fn value(&self, m: i64) -> Option<f64> {
        if m.unsigned_abs() as usize > self.half_len {
            None
        } else {
            Some(self.values[(m + self.half_len as i64) as usize])
        }
    }

    /// Nodes as `(coordinate, f)` pairs, left to right.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = self.half_len as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &f)| ((i as i64 - m) as f64 * self.spacing, f))
    }

    /// `f(x)` by cubic Hermite interpolation (continuous) or at the
    /// nearest site (discrete; `x` is expected to be an integer).
    pub fn value_at(&self, x: f64) -> Option<f64> {
        if !(x.abs() <= self.reach()) {
            return None;
        }
        if self.variant != CorrectorVariant::Continuous {
            return self.value(x.round() as i64);
        }
        let h = self.spacing;
        let s = x / h + self.half_len as f64;
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - i as f64;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * d1,
        )
    }
}

fn discrete_table(
    env: &DiscreteEnvironment,
    range: u64,
    variant: CorrectorVariant,
) -> Result<CorrectorTable, CorrectorError> {
    if range == 0 {
        return Err(CorrectorError::EmptyRange);
    }
    let m = range as usize;
    let inner_weight = |k: i64| match variant {
        CorrectorVariant::DiscreteP => env.cbar(k),
        _ => 1.0,
    };

    let mut values = vec![0.0; 2 * m + 1];
    // m ≥ 1: inner Σ_{k=1}^{ℓ}, outer over ℓ = 0..m−1.
    let mut inner = NeumaierSum::new();
    let mut outer = NeumaierSum::new();
    for l in 0..m as i64 {
        if l >= 1 {
            inner.add(inner_weight(l));
        }
        outer.add(inner.value() / env.conductance(l));
        values[m + l as usize + 1] = outer.value();
    }
    // m ≤ −1: inner Σ_{k=0}^{ℓ−1} at −k, outer over ℓ = 1..|m|.
    let mut inner = NeumaierSum::new();
    let mut outer = NeumaierSum::new();
    for l in 1..=m as i64 {
        inner.add(inner_weight(-(l - 1)));
        outer.add(inner.value() / env.conductance(-l));
        values[m - l as usize] = outer.value();
    }

    let integrals = env.integrals();
    let expected_ratio = match variant {
        // ½ (∫1/c)(∫c̄) = (∫1/c)(∫c)
        CorrectorVariant::DiscreteP => {
            if integrals.mean_c.is_infinite() || integrals.mean_inv_c.is_infinite() {
                Moment::Infinite
            } else {
                Moment::Finite(0.5 * integrals.mean_inv_c.value() * integrals.mean_cbar().value())
            }
        }
        _ => integrals.mean_inv_c.scaled(0.5),
    };

    Ok(CorrectorTable {
        variant,
        environment: EnvironmentEcho::discrete(env),
        half_len: m,
        spacing: 1.0,
        values,
        slopes: Vec::new(),
        expected_ratio,
    })
}

/// Solution of `(P − I) f = 1` with `f(0) = f(1) = 0` on `[−M, M]`, in
/// O(M) by prefix sums.
pub fn build_discrete(env: &DiscreteEnvironment, range: u64) -> Result<CorrectorTable, CorrectorError> {
    discrete_table(env, range, CorrectorVariant::DiscreteP)
}

/// Solution of `L f = 1`, `L f(k) = c(k−1) f(k−1) + c(k) f(k+1) − c̄(k) f(k)`,
/// normalised by `f(0) = f(1) = 0`.
pub fn build_discrete_l(env: &DiscreteEnvironment, range: u64) -> Result<CorrectorTable, CorrectorError> {
    discrete_table(env, range, CorrectorVariant::DiscreteL)
}

/// The continuous corrector on `[−X, X]` with step `h`: composite Simpson
/// for the outer integral, the inner integral carried incrementally.
pub fn build_continuous(
    env: &ContinuousEnvironment,
    reach: f64,
    grid: f64,
) -> Result<CorrectorTable, CorrectorError> {
    if !(grid.is_finite() && grid > 0.0) {
        return Err(CorrectorError::InvalidGrid(grid));
    }
    if !(reach.is_finite() && reach >= grid) {
        return Err(CorrectorError::EmptyRange);
    }
    let n = (reach / grid).ceil() as usize;
    let h = grid;
    let mut values = vec![0.0; 2 * n + 1];
    let mut slopes = vec![0.0; 2 * n + 1];

    for sign in [1.0, -1.0] {
        // In the mirrored variable w = |x| both branches are the same
        // recurrence with the profiles read at sign·w.
        let at = |w: f64| env.coefficients(sign * w);
        let mut inner = NeumaierSum::new();
        let mut outer = NeumaierSum::new();
        let mut c0 = at(0.0);
        for i in 0..n {
            let w0 = i as f64 * h;
            let quarter = at(w0 + 0.25 * h);
            let mid = at(w0 + 0.5 * h);
            let c1 = at(w0 + h);
            let g0 = inner.value();
            let g_mid = g0 + h / 12.0 * 2.0 * (c0.gamma + 4.0 * quarter.gamma + mid.gamma);
            inner.add(h / 6.0 * 2.0 * (c0.gamma + 4.0 * mid.gamma + c1.gamma));
            let g1 = inner.value();
            let (f0, fm, f1) = (g0 / c0.lambda, g_mid / mid.lambda, g1 / c1.lambda);
            outer.add(h / 6.0 * (f0 + 4.0 * fm + f1));
            let idx = if sign > 0.0 { n + i + 1 } else { n - i - 1 };
            values[idx] = outer.value();
            slopes[idx] = sign * f1;
            c0 = c1;
        }
    }

    let integrals = env.integrals();
    Ok(CorrectorTable {
        variant: CorrectorVariant::Continuous,
        environment: EnvironmentEcho::continuous(env),
        half_len: n,
        spacing: h,
        values,
        slopes,
        expected_ratio: Moment::Finite(integrals.mean_inv_lambda.value() * integrals.mean_gamma.value()),
    })
}

/// Largest relative change of `f(±X)` when the grid step is halved.
pub fn richardson_change(env: &ContinuousEnvironment, reach: f64, grid: f64) -> Result<f64, CorrectorError> {
    let coarse = build_continuous(env, reach, grid)?;
    let fine = build_continuous(env, reach, grid / 2.0)?;
    let x = coarse.reach();
    Ok([x, -x]
        .iter()
        .map(|&x| {
            let (a, b) = (coarse.value_at(x).unwrap_or(0.0), fine.value_at(x).unwrap_or(0.0));
            (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub coordinate: f64,
    /// `(generator f)(x) − 1`.
    pub residual: f64,
    /// `residual` over `1 +` the magnitude of the terms it was formed from.
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_abs: f64,
    pub max_relative: f64,
    pub worst_coordinate: f64,
}

impl ResidualSummary {
    pub fn of(points: &[ResidualPoint]) -> Self {
        points.iter().fold(
            ResidualSummary {
                max_abs: 0.0,
                max_relative: 0.0,
                worst_coordinate: 0.0,
            },
            |acc, p| ResidualSummary {
                max_abs: acc.max_abs.max(p.residual.abs()),
                max_relative: acc.max_relative.max(p.relative),
                worst_coordinate: if p.relative > acc.max_relative {
                    p.coordinate
                } else {
                    acc.worst_coordinate
                },
            },
        )
    }
}

/// Pointwise `(P f)(k) − f(k) − 1` (or `L f(k) − 1`) for `|k| ≤ range`.
pub fn discrete_residuals(
    table: &CorrectorTable,
    env: &DiscreteEnvironment,
    range: u64,
) -> Result<Vec<ResidualPoint>, CorrectorError> {
    if table.variant == CorrectorVariant::Continuous {
        return Err(CorrectorError::VariantMismatch {
            expected: "discrete",
            actual: table.variant,
        });
    }
    if table.environment != EnvironmentEcho::discrete(env) {
        return Err(CorrectorError::EnvironmentMismatch);
    }
    if range as usize + 1 > table.half_len {
        return Err(CorrectorError::RangeOutsideTable {
            requested: range as f64,
            available: table.half_len as f64 - 1.0,
        });
    }
    let r = range as i64;
    let f = |k: i64| table.values[(k + table.half_len as i64) as usize];
    Ok((-r..=r)
        .map(|k| {
            let (fl, f0, fr) = (f(k - 1), f(k), f(k + 1));
            let (cl, cr) = (env.conductance(k - 1), env.conductance(k));
            let cbar = env.cbar(k);
            let size = fl.abs().max(f0.abs()).max(fr.abs());
            let (residual, scale) = match table.variant {
                CorrectorVariant::DiscreteP => ((cl * fl + cr * fr) / cbar - f0 - 1.0, size),
                _ => (cl * fl + cr * fr - cbar * f0 - 1.0, cbar * size),
            };
            ResidualPoint {
                coordinate: k as f64,
                residual,
                relative: residual.abs() / (1.0 + scale),
            }
        })
        .collect())
}

/// Worst residual of the discrete corrector equation over `|k| ≤ range`.
pub fn check_poisson(
    table: &CorrectorTable,
    env: &DiscreteEnvironment,
    range: u64,
) -> Result<ResidualSummary, CorrectorError> {
    Ok(ResidualSummary::of(&discrete_residuals(table, env, range)?))
}

/// `(2γ)⁻¹ (λ f')' − 1` at the grid nodes with `|x| ≤ reach`, the outer
/// derivative taken by a fourth-order central difference of the flux `λ f'`.
pub fn continuous_residuals(
    table: &CorrectorTable,
    env: &ContinuousEnvironment,
    reach: f64,
) -> Result<Vec<ResidualPoint>, CorrectorError> {
    if table.variant != CorrectorVariant::Continuous {
        return Err(CorrectorError::VariantMismatch {
            expected: "continuous",
            actual: table.variant,
        });
    }
    if table.environment != EnvironmentEcho::continuous(env) {
        return Err(CorrectorError::EnvironmentMismatch);
    }
    let h = table.spacing;
    let r = (reach / h).floor() as usize;
    if r + 2 > table.half_len {
        return Err(CorrectorError::RangeOutsideTable {
            requested: reach,
            available: (table.half_len as f64 - 2.0) * h,
        });
    }
    let n = table.half_len as i64;
    let flux = |i: i64| {
        let x = i as f64 * h;
        env.lambda(x) * table.slopes[(i + n) as usize]
    };
    let r = r as i64;
    Ok((-r..=r)
        .map(|i| {
            let x = i as f64 * h;
            let d = (-flux(i + 2) + 8.0 * flux(i + 1) - 8.0 * flux(i - 1) + flux(i - 2)) / (12.0 * h);
            let two_gamma = 2.0 * env.gamma(x);
            let residual = d / two_gamma - 1.0;
            ResidualPoint {
                coordinate: x,
                residual,
                relative: residual.abs() / (1.0 + flux(i).abs() / (two_gamma * h)),
            }
        })
        .collect())
}

/// Growth diagnostic for `f(x)/x²` at the table edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRatio {
    /// `f(X)/X²` and `f(−X)/X²`.
    pub plus: f64,
    pub minus: f64,
    /// The same at `X/2`.
    pub half_plus: f64,
    pub half_minus: f64,
    /// Limit implied by the medium averages; `Infinite` when one diverges.
    pub expected: Moment,
    /// Ratio larger at `X` than at `X/2` on both sides.
    pub growing: bool,
}

impl AsymptoticRatio {
    /// Worst relative deviation of `f(±X)/X²` from a finite expected limit.
    pub fn relative_error(&self) -> Option<f64> {
        match self.expected {
            Moment::Finite(e) => Some(((self.plus - e).abs().max((self.minus - e).abs())) / e),
            Moment::Infinite => None,
        }
    }
}

pub fn asymptotic_ratio(table: &CorrectorTable) -> AsymptoticRatio {
    let m = table.half_len as i64;
    let half = m / 2;
    let ratio = |i: i64| {
        let x = i as f64 * table.spacing;
        table.value(i).expect("index inside table") / (x * x)
    };
    let (plus, minus) = (ratio(m), ratio(-m));
    let (half_plus, half_minus) = (ratio(half.max(1)), ratio(-half.max(1)));
    AsymptoticRatio {
        plus,
        minus,
        half_plus,
        half_minus,
        expected: table.expected_ratio,
        growing: plus > half_plus && minus > half_minus,
    }
}
