//! Heat semigroup `S(t) = exp(t·½(∂²_x + x²∂²_y))` on grid functions.
//!
//! The `y` direction is diagonalised by a DFT. Each mode `k` leaves a
//! one-dimensional problem in `x`, handled by one of two propagators:
//!
//! * [`PropagatorKind::FiniteDifference`] (default): the exact exponential of
//!   the discrete generator `½(D_xx − σ_k x²)`, where `D_xx` is the 3-point
//!   Laplacian closed by zero ghost values and `σ_k = (4/hy²) sin²(π k/ny)` is
//!   the symbol of the 3-point Laplacian in `y`. The full generator is a
//!   symmetric (for the trapezoid inner product) Metzler matrix, so the
//!   discrete semigroup is positive, contractive in `L¹`, `L²`, `L^∞`, and
//!   satisfies `S(s)S(t) = S(s+t)` to roundoff.
//! * [`PropagatorKind::Mehler`]: the sampled Mehler kernel at the continuous
//!   frequency `ξ_k = π|k|/Ly` times trapezoid weights.

use std::sync::Arc;

use faer::{Mat, Side};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::kernel::{ln_z_over_sinh, z_over_sinh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    #[default]
    FiniteDifference,
    Mehler,
}

/// Number of distinct `|k|` modes of a length-`ny` DFT.
fn distinct_modes(ny: usize) -> usize {
    ny / 2 + 1
}

fn mode_of(index: usize, ny: usize) -> usize {
    if index <= ny / 2 {
        index
    } else {
        ny - index
    }
}

/// Eigendecompositions of the per-mode generators, shared by the
/// propagators of every `t` on one grid.
pub struct ModalBasis {
    grid: GridSpec,
    sqrt_w: Vec<f64>,
    /// `(eigenvalues, eigenvectors)` of `W^{1/2} A_k W^{−1/2}` per `|k|`.
    modes: Vec<(Vec<f64>, Mat<f64>)>,
}

impl std::fmt::Debug for ModalBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModalBasis").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl ModalBasis {
    pub fn new(grid: GridSpec) -> Self {
        let nx = grid.nx();
        let hx = grid.hx();
        let hy = grid.hy();
        let w: Vec<f64> = (0..nx).map(|i| grid.x_weight(i)).collect();
        let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let xs = grid.xs();
        // W^{1/2} A_k W^{−1/2} = ½ W^{−1/2} T W^{−1/2} − ½σ_k x², T = tridiag(1,−2,1)/hx.
        let diag: Vec<f64> = w.iter().map(|wi| -1.0 / (hx * wi)).collect();
        let off: Vec<f64> = (0..nx - 1).map(|i| 0.5 / (hx * sqrt_w[i] * sqrt_w[i + 1])).collect();
        let modes = (0..distinct_modes(grid.ny()))
            .into_par_iter()
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / grid.ny() as f64).sin();
                let sigma = 4.0 * s * s / (hy * hy);
                let m = Mat::<f64>::from_fn(nx, nx, |i, j| {
                    if i == j {
                        diag[i] - 0.5 * sigma * xs[i] * xs[i]
                    } else if i + 1 == j {
                        off[i]
                    } else if j + 1 == i {
                        off[j]
                    } else {
                        0.0
                    }
                });
                let eig = m.self_adjoint_eigen(Side::Lower).expect("symmetric eigensolver converges");
                let lambda = (0..nx).map(|c| eig.S()[c]).collect();
                (lambda, eig.U().to_owned())
            })
            .collect();
        Self { grid, sqrt_w, modes }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Largest generator eigenvalue over all modes (at most zero).
    pub fn spectral_abscissa(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|(l, _)| l.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn propagator(&self, k: usize, t: f64) -> Vec<f64> {
        let nx = self.grid.nx();
        let (lambda, v) = &self.modes[k];
        let decay: Vec<f64> = lambda.iter().map(|l| (t * l).exp()).collect();
        let mut out = vec![0.0; nx * nx];
        // P = W^{−1/2} V e^{tΛ} Vᵀ W^{1/2}
        let scaled = Mat::<f64>::from_fn(nx, nx, |i, c| v[(i, c)] * decay[c]);
        let core = &scaled * v.transpose();
        for i in 0..nx {
            for j in 0..nx {
                out[i * nx + j] = core[(i, j)] * self.sqrt_w[j] / self.sqrt_w[i];
            }
        }
        out
    }
}

fn mehler_propagator(grid: GridSpec, k: usize, t: f64) -> Vec<f64> {
    let nx = grid.nx();
    let xs = grid.xs();
    let lambda = std::f64::consts::PI * k as f64 / grid.y_half_width();
    let z = lambda * t;
    // Same closed form as the kernel module, with the per-mode constants hoisted.
    let head = 0.5 * (ln_z_over_sinh(z) - (2.0 * std::f64::consts::PI * t).ln());
    let a = 0.5 * lambda * (0.5 * z).tanh();
    let b = 0.5 * z_over_sinh(z) / t;
    let mut out = vec![0.0; nx * nx];
    for i in 0..nx {
        for j in 0..=i {
            let d = xs[i] - xs[j];
            let m = (head - a * (xs[i] * xs[i] + xs[j] * xs[j]) - b * d * d).exp();
            out[i * nx + j] = m * grid.x_weight(j);
            out[j * nx + i] = m * grid.x_weight(i);
        }
    }
    out
}

/// Per-mode propagators of `S(t)` on one grid.
pub struct SemigroupOperatorCache {
    grid: GridSpec,
    t: f64,
    kind: PropagatorKind,
    /// Row-major `nx × nx` matrix per `|k|`.
    matrices: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    warnings: Vec<String>,
}

impl std::fmt::Debug for SemigroupOperatorCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemigroupOperatorCache")
            .field("grid", &self.grid)
            .field("t", &self.t)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("t", format!("{t} must be > 0")))
    }
}

impl SemigroupOperatorCache {
    pub fn new(grid: GridSpec, t: f64, kind: PropagatorKind) -> Result<Self> {
        check_time(t)?;
        match kind {
            PropagatorKind::FiniteDifference => Self::from_basis(&ModalBasis::new(grid), t),
            PropagatorKind::Mehler => {
                let matrices = (0..distinct_modes(grid.ny()))
                    .into_par_iter()
                    .map(|k| mehler_propagator(grid, k, t))
                    .collect();
                Ok(Self::assemble(grid, t, kind, matrices))
            }
        }
    }

    pub fn from_basis(basis: &ModalBasis, t: f64) -> Result<Self> {
        check_time(t)?;
        let matrices = (0..basis.modes.len())
            .into_par_iter()
            .map(|k| basis.propagator(k, t))
            .collect();
        Ok(Self::assemble(basis.grid, t, PropagatorKind::FiniteDifference, matrices))
    }

    fn assemble(grid: GridSpec, t: f64, kind: PropagatorKind, matrices: Vec<Vec<f64>>) -> Self {
        let mut planner = FftPlanner::new();
        let mut warnings = Vec::new();
        if t < grid.hx() * grid.hx() {
            warnings.push(format!(
                "t = {t} is below hx^2 = {}; the grid does not resolve the smoothing",
                grid.hx() * grid.hx()
            ));
        }
        Self {
            grid,
            t,
            kind,
            matrices,
            forward: planner.plan_fft_forward(grid.ny()),
            inverse: planner.plan_fft_inverse(grid.ny()),
            warnings,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn kind(&self) -> PropagatorKind {
        self.kind
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Propagator of mode `|k|` as a row-major `nx × nx` slice.
    pub fn mode_matrix(&self, k: usize) -> &[f64] {
        &self.matrices[k]
    }

    /// `S(t)u`.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        if u.spec() != self.grid {
            return Err(invalid("grid", "function and operator live on different grids"));
        }
        Ok(GridFunction::from_raw(self.grid, self.apply_values(u.values())))
    }

    pub(crate) fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        // spectrum[i * ny + m]
        let mut spectrum: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectrum
            .par_chunks_mut(ny)
            .for_each(|row| self.forward.process(row));
        let columns: Vec<Vec<Complex64>> = (0..ny)
            .into_par_iter()
            .map(|m| {
                let p = &self.matrices[mode_of(m, ny)];
                (0..nx)
                    .map(|i| {
                        let row = &p[i * nx..(i + 1) * nx];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (j, w) in row.iter().enumerate() {
                            acc += spectrum[j * ny + m] * *w;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let scale = 1.0 / ny as f64;
        let mut out = vec![0.0; nx * ny];
        out.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
            let mut line: Vec<Complex64> = (0..ny).map(|m| columns[m][i]).collect();
            self.inverse.process(&mut line);
            for (o, c) in row.iter_mut().zip(&line) {
                *o = c.re * scale;
            }
        });
        out
    }
}

/// `S(t)u` with a freshly built cache.
pub fn apply_semigroup(u: &GridFunction, t: f64, kind: PropagatorKind) -> Result<GridFunction> {
    SemigroupOperatorCache::new(u.spec(), t, kind)?.apply(u)
}

fn check_times(t_list: &[f64]) -> Result<()> {
    if t_list.len() < 3 {
        return Err(invalid("t_list", format!("{} times given, at least 3 needed", t_list.len())));
    }
    if t_list.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(invalid("t_list", "times must be positive"));
    }
    Ok(())
}

/// Least-squares line through `(ln t, ln ‖S(t)u0‖_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub p: f64,
    #[serde(with = "crate::floats")]
    pub q: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// `−(Q/2)(1/p − 1/q)` with `Q = 3`.
    pub predicted_slope: f64,
    /// `exp(intercept)/‖u0‖_p`.
    pub empirical_constant: f64,
    /// `(t, ‖S(t)u0‖_q)` pairs.
    pub series: Vec<(f64, f64)>,
}

/// Ordinary least squares `y ≈ a + b·x`; returns `(b, a, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Grid homogeneous dimension (`N = k = 1`).
const GRID_Q: f64 = 3.0;

/// `S(t_i)u` for every `t_i`, sharing the modal basis when there is one.
pub fn evolve_at_times(u: &GridFunction, t_list: &[f64], kind: PropagatorKind) -> Result<Vec<GridFunction>> {
    let basis = (kind == PropagatorKind::FiniteDifference).then(|| ModalBasis::new(u.spec()));
    t_list
        .iter()
        .map(|&t| match &basis {
            Some(b) => SemigroupOperatorCache::from_basis(b, t)?.apply(u),
            None => SemigroupOperatorCache::new(u.spec(), t, kind)?.apply(u),
        })
        .collect()
}

pub fn decay_slope_fit(
    u0: &GridFunction,
    p: f64,
    q: f64,
    t_list: &[f64],
    kind: PropagatorKind,
) -> Result<DecayFit> {
    check_times(t_list)?;
    if !(1.0 <= p && p <= q) {
        return Err(invalid("p", format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    let series = t_list
        .iter()
        .zip(evolve_at_times(u0, t_list, kind)?)
        .map(|(&t, v)| Ok((t, v.lp_norm(q)?)))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = series.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = series.iter().map(|s| s.1.ln()).collect();
    let (slope, intercept, residual) = linear_fit(&lx, &ly);
    let inv = |r: f64| if r.is_infinite() { 0.0 } else { 1.0 / r };
    Ok(DecayFit {
        p,
        q,
        slope,
        intercept,
        residual,
        predicted_slope: -0.5 * GRID_Q * (inv(p) - inv(q)),
        empirical_constant: intercept.exp() / u0.lp_norm(p)?,
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProbe {
    pub q: f64,
    #[serde(with = "crate::floats")]
    pub r: f64,
    /// `α = (Q/2)(1/q − 1/r)`.
    pub alpha: f64,
    /// `(t, t^α ‖S(t)φ‖_r)` in the order of the input times.
    pub series: Vec<(f64, f64)>,
    /// `max(hx², hy)`: below this time the grid cannot resolve the smoothing.
    pub resolution_floor: f64,
}

impl SmoothingProbe {
    /// Whether the probe decreases along the input order (with relative
    /// slack `tol`) for all times at or above the resolution floor.
    pub fn decreasing_above_floor(&self, tol: f64) -> bool {
        let kept: Vec<f64> = self
            .series
            .iter()
            .filter(|(t, _)| *t >= self.resolution_floor)
            .map(|s| s.1)
            .collect();
        kept.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
    }
}

pub fn smoothing_decay_probe(
    phi: &GridFunction,
    q: f64,
    r: f64,
    t_list: &[f64],
    kind: PropagatorKind,
) -> Result<SmoothingProbe> {
    if t_list.is_empty() {
        return Err(invalid("t_list", "no times given"));
    }
    if !(1.0 <= q && q < r) {
        return Err(invalid("r", format!("need 1 <= q < r, got q = {q}, r = {r}")));
    }
    let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let alpha = 0.5 * GRID_Q * (1.0 / q - inv_r);
    let series = t_list
        .iter()
        .zip(evolve_at_times(phi, t_list, kind)?)
        .map(|(&t, v)| Ok((t, t.powf(alpha) * v.lp_norm(r)?)))
        .collect::<Result<Vec<_>>>()?;
    let g = phi.spec();
    Ok(SmoothingProbe {
        q,
        r,
        alpha,
        series,
        resolution_floor: (g.hx() * g.hx()).max(g.hy()),
    })
}
