//! Stationary two-sided finite Markov chain indexed by ℤ, queryable at any
//! site without materialising the sequence.
//!
//! Each transition `s_j → s_{j+1}` is driven by two counter-keyed uniforms.
//! The kernel is split as `P(a, ·) = ε ν(·) + (1 − ε) R(a, ·)` where
//! `ε ν(b) = min_a P(a, b)`. With probability ε (the "coin") the next state
//! is drawn from ν regardless of the current one; otherwise from the
//! residual row `R(a, ·)`. The state at `k` is therefore fixed by the most
//! recent regeneration before `k`, which lies a geometric number of steps
//! back. Going infinitely far back this way is coupling from the past, so
//! the resulting sequence is exactly the stationary chain.

use super::counter::CounterStream;
use super::EnvError;

const COIN_LANE: u64 = 0x434f_494e;
const DRAW_LANE: u64 = 0x4452_4157;

#[derive(Debug, Clone)]
pub(crate) struct MarkovSampler {
    values: Vec<f64>,
    regeneration: f64,
    regen_cdf: Vec<f64>,
    residual_cdf: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    coin: CounterStream,
    draw: CounterStream,
}

fn cdf(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// First index whose cumulative weight reaches `u` (`u` in (0, 1]).
fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u <= c).unwrap_or(cdf.len() - 1)
}

impl MarkovSampler {
    pub(crate) fn new(transition: &[Vec<f64>], values: &[f64], seed: u64) -> Result<Self, EnvError> {
        let n = values.len();
        if n == 0 {
            return Err(EnvError::invalid("markov", "at least one state is required"));
        }
        if transition.len() != n || transition.iter().any(|row| row.len() != n) {
            return Err(EnvError::invalid(
                "markov",
                format!("transition matrix must be {n}x{n} to match {n} values"),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EnvError::invalid("markov", "state values must be finite and > 0"));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(EnvError::invalid(
                    "markov",
                    format!("row {i} has a negative or non-finite entry"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(EnvError::invalid(
                    "markov",
                    format!("row {i} sums to {sum}, expected 1"),
                ));
            }
            rows.push(row.iter().map(|p| p / sum).collect::<Vec<_>>());
        }

        let common: Vec<f64> = (0..n)
            .map(|b| rows.iter().map(|r| r[b]).fold(f64::INFINITY, f64::min))
            .collect();
        let regeneration: f64 = common.iter().sum();
        if regeneration <= 0.0 {
            return Err(EnvError::invalid(
                "markov",
                "every row must put positive mass on at least one common state \
                 (one-step Doeblin condition); add a small uniform component to the rows",
            ));
        }
        let regen_cdf = cdf(&common);
        let residual_cdf = rows
            .iter()
            .map(|row| {
                let residual: Vec<f64> = row.iter().zip(&common).map(|(p, c)| (p - c).max(0.0)).collect();
                if residual.iter().sum::<f64>() <= 1e-15 {
                    regen_cdf.clone()
                } else {
                    cdf(&residual)
                }
            })
            .collect();

        Ok(Self {
            values: values.to_vec(),
            regeneration: regeneration.min(1.0),
            regen_cdf,
            residual_cdf,
            stationary: stationary_distribution(&rows),
            coin: CounterStream::new(seed, COIN_LANE),
            draw: CounterStream::new(seed, DRAW_LANE),
        })
    }

    pub(crate) fn state_at(&self, k: i64) -> usize {
        let mut j = k.wrapping_sub(1);
        while self.coin.open_unit(j) > self.regeneration {
            j = j.wrapping_sub(1);
        }
        let mut state = pick(&self.regen_cdf, self.draw.open_unit(j));
        let mut i = j.wrapping_add(1);
        while i != k {
            state = pick(&self.residual_cdf[state], self.draw.open_unit(i));
            i = i.wrapping_add(1);
        }
        state
    }

    pub(crate) fn value_at(&self, k: i64) -> f64 {
        self.values[self.state_at(k)]
    }

    pub(crate) fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Power iteration; converges geometrically at rate (1 − ε) under the
/// Doeblin condition checked at construction.
fn stationary_distribution(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for (a, row) in rows.iter().enumerate() {
            for (b, p) in row.iter().enumerate() {
                next[b] += pi[a] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).sum();
        pi = next;
        if change < 1e-16 {
            break;
        }
    }
    pi
}
