//! Mild solutions of `u_t = Δ_G u + k₁ ∫₀^t (t−s)^{−γ} f(u(s)) ds + k₂ g(u)`
//! with `f(u) = |u|^{p₁−1}u`, `g(u) = |u|^{p₂−1}u` by default.
//!
//! Time stepping works on the Duhamel form
//! `u(t) = S(t)u₀ + ∫₀^t S(t−s) F(s) ds` with
//! `F(s) = k₁ ∫₀^s (s−τ)^{−γ} f(u(τ)) dτ + k₂ g(u(s))`:
//!
//! * exponential Euler: `u_{n+1} = S(dt)[u_n + dt·F_n]`;
//! * predictor-corrector: `u_{n+1} = S(dt)[u_n + dt/2·F_n] + dt/2·F̃_{n+1}`
//!   with `F̃_{n+1}` evaluated at the exponential-Euler prediction.
//!
//! The inner memory integral uses the product-integration weights of
//! [`crate::memory`] applied to the stored fields `f(u_j)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exponents::{alpha, GrushinDims, ProblemParams};
use crate::grid::{GridFunction, GridSpec};
use crate::memory::{MemoryWeights, TimeGrid};
use crate::semigroup::{PropagatorKind, SemigroupOperatorCache};

/// A source nonlinearity, extended to negative states as an odd function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `|u|^{p−1}u`.
    Power { p: f64 },
    /// Piecewise-linear interpolation of `(state, value)` nodes starting at
    /// state 0, continued beyond the last node with the last slope.
    Tabulated { points: Vec<[f64; 2]> },
}

impl Nonlinearity {
    pub fn power(p: f64) -> Self {
        Nonlinearity::Power { p }
    }

    pub fn tabulated(points: Vec<[f64; 2]>) -> Result<Self> {
        let n = Nonlinearity::Tabulated { points };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Power { p } => {
                if *p > 1.0 && p.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("p", format!("power {p} must be > 1")))
                }
            }
            Nonlinearity::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(invalid("points", "a table needs at least two nodes"));
                }
                if points[0][0] != 0.0 {
                    return Err(invalid("points", "the table must start at state 0"));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("points", "table entries must be finite"));
                }
                for w in points.windows(2) {
                    if w[1][0] <= w[0][0] {
                        return Err(invalid("points", "states must increase strictly"));
                    }
                    if w[1][1] < w[0][1] {
                        return Err(invalid(
                            "points",
                            format!("table decreases between states {} and {}", w[0][0], w[1][0]),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Power { p } => u.abs().powf(p - 1.0) * u,
            Nonlinearity::Tabulated { points } => {
                let s = u.abs();
                let k = points.partition_point(|q| q[0] <= s).clamp(1, points.len() - 1);
                let (a, b) = (points[k - 1], points[k]);
                let v = a[1] + (b[1] - a[1]) * (s - a[0]) / (b[0] - a[0]);
                if u < 0.0 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        GridFunction::from_raw(u.spec(), u.values().par_iter().map(|&v| self.eval(v)).collect())
    }
}

/// Pointwise `|u|^{p−1}u`.
pub fn nonlinear_term(u: &GridFunction, p: f64) -> GridFunction {
    Nonlinearity::power(p).apply(u)
}

/// Memory (`f`) and local (`g`) nonlinearities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sources {
    pub memory: Nonlinearity,
    pub local: Nonlinearity,
}

impl Sources {
    pub fn from_params(params: &ProblemParams) -> Self {
        Self {
            memory: Nonlinearity::power(params.p1()),
            local: Nonlinearity::power(params.p2()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ExpEuler,
    PredictorCorrector,
}

fn default_threshold() -> f64 {
    1e6
}
fn default_stride() -> usize {
    1
}
fn default_norm_q() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub grid: GridSpec,
    pub time: TimeGrid,
    pub params: ProblemParams,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_stride")]
    pub checkpoint_stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub propagator: PropagatorKind,
    /// Exponent `q` of the traced `L^q` norm and of the weighted norms
    /// `t^{α_i}‖u‖_{p_i q}`.
    #[serde(default = "default_norm_q")]
    pub norm_q: f64,
    /// Keep the states at every checkpoint.
    #[serde(default)]
    pub store_checkpoints: bool,
}

impl SolveConfig {
    pub fn new(grid: GridSpec, time: TimeGrid, params: ProblemParams) -> Self {
        Self {
            grid,
            time,
            params,
            blowup_threshold: default_threshold(),
            checkpoint_stride: default_stride(),
            scheme: Scheme::default(),
            propagator: PropagatorKind::default(),
            norm_q: default_norm_q(),
            store_checkpoints: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid("blowup_threshold", "must be > 0"));
        }
        if self.checkpoint_stride == 0 {
            return Err(invalid("checkpoint_stride", "must be >= 1"));
        }
        if !(self.norm_q >= 1.0) {
            return Err(invalid("norm_q", format!("{} must be >= 1", self.norm_q)));
        }
        Ok(())
    }

    /// `(α₁, α₂)` and `(r₁, r₂)` of the weighted norms on the `N = k = 1` grid.
    pub fn weighted_exponents(&self) -> ([f64; 2], [f64; 2]) {
        let qd = GrushinDims::default().homogeneous_dimension();
        let (p1, p2, q) = (self.params.p1(), self.params.p2(), self.norm_q);
        ([alpha(qd, p1, q), alpha(qd, p2, q)], [p1 * q, p2 * q])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Completed,
    BlowupDetected,
    NanAbort,
}

impl SolveStatus {
    pub fn code(self) -> u8 {
        match self {
            SolveStatus::Completed => 0,
            SolveStatus::BlowupDetected => 1,
            SolveStatus::NanAbort => 2,
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Completed => "completed",
            SolveStatus::BlowupDetected => "blowup_detected",
            SolveStatus::NanAbort => "nan_abort",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub lq_norms: Vec<f64>,
    /// `t^{α₁}‖u‖_{r₁}`.
    pub weighted_norms_1: Vec<f64>,
    /// `t^{α₂}‖u‖_{r₂}`.
    pub weighted_norms_2: Vec<f64>,
    pub status: SolveStatus,
    /// Crossing time of the blow-up threshold; `+∞` for completed runs.
    #[serde(with = "crate::floats")]
    pub t_max_estimate: f64,
}

impl SolveTrace {
    fn empty() -> Self {
        Self {
            times: Vec::new(),
            sup_norms: Vec::new(),
            lq_norms: Vec::new(),
            weighted_norms_1: Vec::new(),
            weighted_norms_2: Vec::new(),
            status: SolveStatus::Completed,
            t_max_estimate: f64::INFINITY,
        }
    }

    fn record(&mut self, t: f64, u: &GridFunction, config: &SolveConfig) -> Result<()> {
        let (a, r) = config.weighted_exponents();
        self.times.push(t);
        self.sup_norms.push(u.sup_norm());
        self.lq_norms.push(u.lp_norm(config.norm_q)?);
        self.weighted_norms_1.push(t.powf(a[0]) * u.lp_norm(r[0])?);
        self.weighted_norms_2.push(t.powf(a[1]) * u.lp_norm(r[1])?);
        Ok(())
    }

    pub fn max_sup_norm(&self) -> f64 {
        self.sup_norms.iter().copied().fold(0.0, f64::max)
    }

    /// Columns `t, sup_norm, lq_norm, weighted_norm_1, weighted_norm_2, status`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,sup_norm,lq_norm,weighted_norm_1,weighted_norm_2,status")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{}",
                self.times[k],
                self.sup_norms[k],
                self.lq_norms[k],
                self.weighted_norms_1[k],
                self.weighted_norms_2[k],
                self.status
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub t: f64,
    pub state: GridFunction,
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    /// Last finite state.
    pub final_state: GridFunction,
    pub trace: SolveTrace,
    pub checkpoints: Vec<Checkpoint>,
}

/// Shared discretization of one problem: propagator for `dt`, memory
/// weights and sources.
#[derive(Clone)]
pub struct Discretization {
    pub cache: Arc<SemigroupOperatorCache>,
    pub weights: MemoryWeights,
    pub sources: Sources,
    pub coeff1: f64,
    pub coeff2: f64,
}

impl Discretization {
    pub fn new(config: &SolveConfig, sources: Sources) -> Result<Self> {
        config.validate()?;
        sources.memory.validate()?;
        sources.local.validate()?;
        let cache = SemigroupOperatorCache::new(config.grid, config.time.dt(), config.propagator)?;
        Self::with_cache(config, sources, Arc::new(cache))
    }

    /// Reuses an existing propagator; it must match the grid and `dt`.
    pub fn with_cache(config: &SolveConfig, sources: Sources, cache: Arc<SemigroupOperatorCache>) -> Result<Self> {
        if cache.grid() != config.grid || cache.t() != config.time.dt() {
            return Err(invalid("cache", "propagator does not match the grid and step"));
        }
        Ok(Self {
            cache,
            weights: MemoryWeights::for_grid(config.params.gamma(), config.time)?,
            sources,
            coeff1: config.params.coeff1(),
            coeff2: config.params.coeff2(),
        })
    }

    fn uses_memory(&self) -> bool {
        self.coeff1 != 0.0
    }

    /// `F_n` for state `u` at step `n`, given the memory fields `f(u_0..u_n)`.
    fn forcing(&self, n: usize, u: &[f64], history: &[Vec<f64>]) -> Vec<f64> {
        let mut out: Vec<f64> = if self.coeff2 != 0.0 {
            u.par_iter().map(|&v| self.coeff2 * self.sources.local.eval(v)).collect()
        } else {
            vec![0.0; u.len()]
        };
        if self.uses_memory() && n > 0 {
            let w: Vec<f64> = (0..=n).map(|j| self.coeff1 * self.weights.weight(n, j)).collect();
            out.par_chunks_mut(1024).enumerate().for_each(|(c, chunk)| {
                let base = c * 1024;
                for (j, wj) in w.iter().enumerate() {
                    let g = &history[j][base..base + chunk.len()];
                    for (o, v) in chunk.iter_mut().zip(g) {
                        *o += wj * v;
                    }
                }
            });
        }
        out
    }

    fn memory_field(&self, u: &[f64]) -> Vec<f64> {
        u.par_iter().map(|&v| self.sources.memory.eval(v)).collect()
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| x + a * y).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Marches the mild solution with the power nonlinearities of `config.params`.
pub fn solve(u0: &GridFunction, config: &SolveConfig) -> Result<SolveRun> {
    let disc = Discretization::new(config, Sources::from_params(&config.params))?;
    solve_with(u0, config, &disc)
}

pub fn solve_with(u0: &GridFunction, config: &SolveConfig, disc: &Discretization) -> Result<SolveRun> {
    config.validate()?;
    if u0.spec() != config.grid {
        return Err(invalid("u0", "initial data is not on the configured grid"));
    }
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    if u0.sup_norm() >= config.blowup_threshold {
        return Err(invalid("blowup_threshold", "must exceed the initial sup norm"));
    }
    let grid = config.grid;
    let dt = config.time.dt();
    let steps = config.time.steps();
    let mut trace = SolveTrace::empty();
    let mut checkpoints = Vec::new();
    let mut u = u0.values().to_vec();
    let mut history: Vec<Vec<f64>> = Vec::new();
    if disc.uses_memory() {
        history.push(disc.memory_field(&u));
    }
    trace.record(0.0, u0, config)?;
    if config.store_checkpoints {
        checkpoints.push(Checkpoint {
            step: 0,
            t: 0.0,
            state: u0.clone(),
        });
    }
    for n in 0..steps {
        let f_n = disc.forcing(n, &u, &history);
        let next = match config.scheme {
            Scheme::ExpEuler => disc.cache.apply_values(&axpy(&u, dt, &f_n)),
            Scheme::PredictorCorrector => {
                let predicted = disc.cache.apply_values(&axpy(&u, dt, &f_n));
                if disc.uses_memory() {
                    history.push(disc.memory_field(&predicted));
                }
                let f_pred = disc.forcing(n + 1, &predicted, &history);
                if disc.uses_memory() {
                    history.pop();
                }
                let half = disc.cache.apply_values(&axpy(&u, 0.5 * dt, &f_n));
                axpy(&half, 0.5 * dt, &f_pred)
            }
        };
        let t = config.time.time(n + 1);
        if next.iter().any(|v| !v.is_finite()) {
            trace.status = SolveStatus::NanAbort;
            trace.t_max_estimate = t;
            break;
        }
        u = next;
        if disc.uses_memory() {
            history.push(disc.memory_field(&u));
        }
        let blown = sup(&u) >= config.blowup_threshold;
        let last = n + 1 == steps;
        if blown || last || (n + 1) % config.checkpoint_stride == 0 {
            let state = GridFunction::from_raw(grid, u.clone());
            trace.record(t, &state, config)?;
            if config.store_checkpoints {
                checkpoints.push(Checkpoint { step: n + 1, t, state });
            }
        }
        if blown {
            trace.status = SolveStatus::BlowupDetected;
            trace.t_max_estimate = t;
            break;
        }
    }
    Ok(SolveRun {
        final_state: GridFunction::from_raw(grid, u),
        trace,
        checkpoints,
    })
}

/// `Λ(u)(t_n)` for a trajectory `u(t_0..t_N)` by the recursion
/// `Λ_{n+1} = S(dt)[Λ_n + dt·F_n[u]]`, `Λ_0 = u_0`.
pub fn duhamel_map(u0: &[f64], trajectory: &[Vec<f64>], disc: &Discretization, dt: f64) -> Vec<Vec<f64>> {
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(trajectory.len());
    out.push(u0.to_vec());
    for n in 0..trajectory.len() - 1 {
        if disc.uses_memory() {
            history.push(disc.memory_field(&trajectory[n]));
        }
        let f_n = disc.forcing(n, &trajectory[n], &history);
        let next = disc.cache.apply_values(&axpy(&out[n], dt, &f_n));
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    /// `d_k = max_i sup_n t_n^{α_i}‖u_k(t_n) − u_{k−1}(t_n)‖_{r_i}` with `u_0 ≡ 0`.
    pub distances: Vec<f64>,
    /// `d_{k+1}/d_k`.
    pub ratios: Vec<f64>,
    /// Three consecutive increases of `d_k`.
    pub diverged: bool,
    /// `max_k max_i sup_n t_n^{α_i}‖u_k(t_n)‖_{r_i}`.
    pub max_weighted_norm: f64,
    /// `max_weighted_norm ≤ ball_multiple·‖u0‖_q` when a multiple is given.
    pub within_ball: Option<bool>,
    #[serde(skip)]
    pub final_iterate: Vec<GridFunction>,
}

impl PicardReport {
    /// Last state of the final iterate.
    pub fn final_state(&self) -> Option<&GridFunction> {
        self.final_iterate.last()
    }
}

fn weighted_distance(config: &SolveConfig, a: &[Vec<f64>], b: Option<&[Vec<f64>]>) -> Result<f64> {
    let (al, r) = config.weighted_exponents();
    let mut worst = 0.0f64;
    for n in 0..a.len() {
        let t = config.time.time(n);
        let diff: Vec<f64> = match b {
            Some(b) => a[n].iter().zip(&b[n]).map(|(x, y)| x - y).collect(),
            None => a[n].clone(),
        };
        let g = GridFunction::from_raw(config.grid, diff);
        for i in 0..2 {
            let v = if t == 0.0 && al[i] > 0.0 {
                0.0
            } else {
                t.powf(al[i]) * g.lp_norm(r[i])?
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Picard iterates `u_1 = S(t)u0`, `u_k = Λ(u_{k−1})` on `[0, T]` with the
/// step of `config.time`.
pub fn picard_iterate(
    u0: &GridFunction,
    final_time: f64,
    iterations: usize,
    config: &SolveConfig,
    ball_multiple: Option<f64>,
) -> Result<PicardReport> {
    let dt = config.time.dt();
    let steps = (final_time / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - final_time).abs() > 1e-9 * final_time.max(dt) {
        return Err(invalid("final_time", format!("{final_time} is not a positive multiple of dt = {dt}")));
    }
    if iterations == 0 {
        return Err(invalid("iterations", "at least one iteration is required"));
    }
    let mut cfg = config.clone();
    cfg.time = TimeGrid::new(dt, steps)?;
    let disc = Discretization::new(&cfg, Sources::from_params(&cfg.params))?;
    let u0v = u0.values().to_vec();
    let mut current: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    current.push(u0v.clone());
    for n in 0..steps {
        let next = disc.cache.apply_values(&current[n]);
        current.push(next);
    }
    let mut distances = vec![weighted_distance(&cfg, &current, None)?];
    let mut max_weighted = distances[0];
    let mut increases = 0;
    let mut diverged = false;
    for _ in 1..iterations {
        let next = duhamel_map(&u0v, &current, &disc, dt);
        if next.iter().flatten().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        let d = weighted_distance(&cfg, &next, Some(&current))?;
        max_weighted = max_weighted.max(weighted_distance(&cfg, &next, None)?);
        if d > *distances.last().expect("non-empty") {
            increases += 1;
        } else {
            increases = 0;
        }
        distances.push(d);
        current = next;
        if increases >= 3 {
            diverged = true;
            break;
        }
    }
    let ratios = distances
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let within_ball = match ball_multiple {
        Some(m) => Some(max_weighted <= m * u0.lp_norm(cfg.norm_q)?),
        None => None,
    };
    let stride = cfg.checkpoint_stride;
    let final_iterate = current
        .into_iter()
        .enumerate()
        .filter(|(n, _)| n % stride == 0 || *n == steps)
        .map(|(_, v)| GridFunction::from_raw(cfg.grid, v))
        .collect();
    Ok(PicardReport {
        distances,
        ratios,
        diverged,
        max_weighted_norm: max_weighted,
        within_ball,
        final_iterate,
    })
}

/// Ratio bound `d_{k+1}/d_k ≤ ½` of the contraction argument.
pub const CONTRACTION_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProbe {
    pub final_time: f64,
    /// Largest `d_{k+1}/d_k` for `k ≥ 2`.
    pub worst_ratio: f64,
    pub contracting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionWindow {
    /// Largest probed horizon on which the iteration contracts.
    pub final_time: Option<f64>,
    pub probes: Vec<WindowProbe>,
}

fn worst_ratio(report: &PicardReport) -> f64 {
    report.ratios.iter().skip(1).copied().fold(0.0, f64::max)
}

/// Doubles `T` from `dt` up to the configured horizon while the Picard
/// iteration contracts with factor ½.
pub fn contraction_window(u0: &GridFunction, config: &SolveConfig, iterations: usize) -> Result<ContractionWindow> {
    let dt = config.time.dt();
    let mut probes = Vec::new();
    let mut best = None;
    let mut steps = 1usize;
    while steps <= config.time.steps() {
        let t = steps as f64 * dt;
        let rep = picard_iterate(u0, t, iterations, config, None)?;
        let worst = worst_ratio(&rep);
        let contracting = !rep.diverged && worst <= CONTRACTION_FACTOR;
        probes.push(WindowProbe {
            final_time: t,
            worst_ratio: worst,
            contracting,
        });
        if !contracting {
            break;
        }
        best = Some(t);
        steps *= 2;
    }
    Ok(ContractionWindow {
        final_time: best,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `max_n ‖u(t_n) − Λ(u)(t_n)‖_∞`.
    pub max_residual: f64,
    /// `(t_n, residual)` per stored state.
    pub per_step: Vec<(f64, f64)>,
}

/// Recomputes the Duhamel right-hand side for `states = u(t_0..t_N)` (every
/// step of `config.time`) with the step halved: states are interpolated
/// linearly in time, the outer integral uses the trapezoid rule and the
/// memory integral uses weights for the fine step.
pub fn residual_check(states: &[GridFunction], config: &SolveConfig, sources: &Sources) -> Result<ResidualReport> {
    config.validate()?;
    let steps = config.time.steps();
    if states.len() != steps + 1 {
        return Err(invalid(
            "states",
            format!("need the state at every step ({} states), got {}", steps + 1, states.len()),
        ));
    }
    if states.iter().any(|s| s.spec() != config.grid) {
        return Err(invalid("states", "states are not on the configured grid"));
    }
    let h = 0.5 * config.time.dt();
    let mut fine_cfg = config.clone();
    fine_cfg.time = TimeGrid::new(h, 2 * steps)?;
    let disc = Discretization::new(&fine_cfg, sources.clone())?;
    let fine: Vec<Vec<f64>> = (0..=2 * steps)
        .map(|m| {
            let a = states[m / 2].values();
            if m % 2 == 0 {
                a.to_vec()
            } else {
                let b = states[m / 2 + 1].values();
                a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
            }
        })
        .collect();
    let mut history = Vec::new();
    let mut forcing = Vec::with_capacity(fine.len());
    for (m, u) in fine.iter().enumerate() {
        if disc.uses_memory() {
            history.push(disc.memory_field(u));
        }
        forcing.push(disc.forcing(m, u, &history));
    }
    let mut v = fine[0].clone();
    let mut per_step = vec![(0.0, 0.0)];
    for m in 0..2 * steps {
        // V_{m+1} = S(h)[V_m + h/2·F_m] + h/2·F_{m+1}
        let propagated = disc.cache.apply_values(&axpy(&v, 0.5 * h, &forcing[m]));
        v = axpy(&propagated, 0.5 * h, &forcing[m + 1]);
        if (m + 1) % 2 == 0 {
            let n = (m + 1) / 2;
            let r = sup(&axpy(&v, -1.0, states[n].values()));
            per_step.push((config.time.time(n), r));
        }
    }
    let max_residual = per_step.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ResidualReport { max_residual, per_step })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    /// `‖u0 − v0‖_∞`.
    pub data_distance: f64,
    /// `max_n ‖u(t_n) − v(t_n)‖_∞` over the common checkpoints.
    pub trajectory_distance: f64,
    /// `trajectory_distance / data_distance`.
    pub empirical_constant: f64,
}

/// Runs both data with one discretization and compares trajectories.
pub fn continuous_dependence(u0: &GridFunction, v0: &GridFunction, config: &SolveConfig) -> Result<DependenceReport> {
    let mut cfg = config.clone();
    cfg.store_checkpoints = true;
    let disc = Discretization::new(&cfg, Sources::from_params(&cfg.params))?;
    let a = solve_with(u0, &cfg, &disc)?;
    let b = solve_with(v0, &cfg, &disc)?;
    let data_distance = u0.sub(v0)?.sup_norm();
    let trajectory_distance = a
        .checkpoints
        .iter()
        .zip(&b.checkpoints)
        .map(|(x, y)| x.state.sub(&y.state).map(|d| d.sup_norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DependenceReport {
        data_distance,
        trajectory_distance,
        empirical_constant: trajectory_distance / data_distance,
    })
}

/// Grid used by the solver tests and benches: `[−4, 4]²`, `nx × ny` nodes.
pub fn desk_grid(nx: usize, ny: usize) -> Result<GridSpec> {
    GridSpec::new(4.0, 4.0, nx, ny)
}
