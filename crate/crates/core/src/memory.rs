//! Product-integration weights for `∫₀^{t_n} (t_n − τ)^{−γ} f(τ) dτ`.
//!
//! `f` is replaced by its piecewise-linear interpolant on the uniform grid
//! `t_j = j·dt` and the singular kernel is integrated exactly against each
//! hat function. With `α = 1 − γ` and `m = n − j` the weights are
//!
//! ```text
//! w(n, j) = dt^α / (α(α+1)) · a(n, j)
//! a(n, 0) = (n−1)^{α+1} − (n−1−α)·n^α
//! a(n, j) = (m+1)^{α+1} − 2m^{α+1} + (m−1)^{α+1}     (0 < j < n)
//! a(n, n) = 1
//! ```
//!
//! so interior weights depend on `n − j` only. Large arguments are summed by
//! binomial series to avoid cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeGrid", into = "RawTimeGrid")]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
struct RawTimeGrid {
    dt: f64,
    steps: usize,
}

impl TryFrom<RawTimeGrid> for TimeGrid {
    type Error = Error;
    fn try_from(r: RawTimeGrid) -> Result<Self> {
        TimeGrid::new(r.dt, r.steps)
    }
}

impl From<TimeGrid> for RawTimeGrid {
    fn from(g: TimeGrid) -> Self {
        RawTimeGrid {
            dt: g.dt,
            steps: g.steps,
        }
    }
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("dt", format!("{dt} must be > 0")));
        }
        if steps == 0 {
            return Err(invalid("steps", "at least one step is required"));
        }
        Ok(Self { dt, steps })
    }

    /// Grid with `steps` steps ending at `final_time`.
    pub fn covering(final_time: f64, steps: usize) -> Result<Self> {
        Self::new(final_time / steps.max(1) as f64, steps)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
    pub fn final_time(&self) -> f64 {
        self.time(self.steps)
    }
    /// Same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            dt: self.dt / factor as f64,
            steps: self.steps * factor,
        }
    }
}

/// Below this argument the closed forms are accurate enough.
const SERIES_FROM: f64 = 16.0;

/// `Σ_{k ≥ 2, k ∈ parity} C(β, k) s^k` for `|s| ≤ 1/16`.
fn binomial_tail(beta: f64, s: f64, even_only: bool) -> f64 {
    let mut coeff = beta; // C(β, 1)
    let mut power = s;
    let mut sum = 0.0;
    for k in 2..200 {
        coeff *= (beta - (k - 1) as f64) / k as f64;
        power *= s;
        if even_only && k % 2 == 1 {
            continue;
        }
        let term = coeff * power;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `(m+1)^β − 2m^β + (m−1)^β` for `m ≥ 1`.
fn second_difference(beta: f64, m: f64) -> f64 {
    if m < SERIES_FROM {
        (m + 1.0).powf(beta) - 2.0 * m.powf(beta) + (m - 1.0).powf(beta)
    } else {
        2.0 * m.powf(beta) * binomial_tail(beta, 1.0 / m, true)
    }
}

/// `(n−1)^{α+1} − (n−1−α)·n^α` for `n ≥ 1`.
fn start_coefficient(alpha: f64, n: f64) -> f64 {
    let beta = alpha + 1.0;
    if n < SERIES_FROM {
        (n - 1.0).powf(beta) - (n - 1.0 - alpha) * n.powf(alpha)
    } else {
        n.powf(beta) * binomial_tail(beta, -1.0 / n, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryWeights {
    gamma: f64,
    dt: f64,
    steps: usize,
    scale: f64,
    /// `a(n, 0)` for `n = 0..=steps`.
    start: Vec<f64>,
    /// `a(n, j)` at `m = n − j` for `m = 0..steps`; index 0 is the endpoint.
    interior: Vec<f64>,
}

/// Weights for `0 ≤ γ < 1`, step `dt` and up to `steps` steps.
pub fn build_weights(gamma: f64, dt: f64, steps: usize) -> Result<MemoryWeights> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("{gamma} must lie in [0, 1)")));
    }
    TimeGrid::new(dt, steps)?;
    let alpha = 1.0 - gamma;
    let beta = alpha + 1.0;
    let start = (0..=steps)
        .map(|n| if n == 0 { 0.0 } else { start_coefficient(alpha, n as f64) })
        .collect();
    let interior = (0..steps)
        .map(|m| if m == 0 { 1.0 } else { second_difference(beta, m as f64) })
        .collect();
    Ok(MemoryWeights {
        gamma,
        dt,
        steps,
        scale: dt.powf(alpha) / (alpha * beta),
        start,
        interior,
    })
}

impl MemoryWeights {
    pub fn for_grid(gamma: f64, grid: TimeGrid) -> Result<Self> {
        build_weights(gamma, grid.dt(), grid.steps())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `w(n, j)` for `0 ≤ j ≤ n ≤ steps`; zero when `n = 0`.
    pub fn weight(&self, n: usize, j: usize) -> f64 {
        assert!(j <= n && n <= self.steps, "weight index ({n}, {j}) out of range");
        if n == 0 {
            0.0
        } else if j == 0 {
            self.scale * self.start[n]
        } else {
            self.scale * self.interior[n - j]
        }
    }

    /// `w(n, 0..=n)`.
    pub fn row(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.weight(n, j)).collect()
    }

    /// `∫₀^{t_n} (t_n − τ)^{−γ} dτ = t_n^{1−γ}/(1−γ)`.
    pub fn kernel_mass(&self, n: usize) -> f64 {
        let alpha = 1.0 - self.gamma;
        (n as f64 * self.dt).powf(alpha) / alpha
    }
}

/// `Σ_j w(n, j)·f(t_j)` with `history = f(t_0), …, f(t_n)`.
pub fn fractional_integral(history: &[f64], weights: &MemoryWeights, n: usize) -> Result<f64> {
    if n > weights.steps() {
        return Err(invalid("n", format!("{n} exceeds the {} weight steps", weights.steps())));
    }
    if history.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: history.len(),
        });
    }
    Ok(history
        .iter()
        .enumerate()
        .map(|(j, f)| weights.weight(n, j) * f)
        .sum())
}
