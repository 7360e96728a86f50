//! Ordering checks for mild solutions: ordered data and sources give ordered
//! solutions, supersolutions dominate, and nonpositive sources keep the
//! solution below the free evolution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::memory::TimeGrid;
use crate::semigroup::SemigroupOperatorCache;
use crate::solver::{duhamel_map, solve_with, Discretization, Nonlinearity, SolveConfig, SolveStatus, Sources};

/// A source nonlinearity together with the growth exponent of its
/// Lipschitz bound `|f(u) − f(v)| ≤ c|u − v|(|u|^{p−1} + |v|^{p−1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: Nonlinearity,
    pub growth_exponent: f64,
}

impl NonlinearitySpec {
    pub fn power(p: f64) -> Self {
        Self {
            kind: Nonlinearity::power(p),
            growth_exponent: p,
        }
    }

    /// Sampled monotonicity on `[0, range]` and the smallest growth
    /// constant `c` consistent with the samples.
    pub fn check_on_range(&self, range: f64, samples: usize) -> Result<f64> {
        self.kind.validate()?;
        let p = self.growth_exponent;
        if !(p >= 1.0) {
            return Err(invalid("growth_exponent", format!("{p} must be >= 1")));
        }
        let pts: Vec<f64> = (0..=samples).map(|k| range * k as f64 / samples as f64).collect();
        let mut c = 0.0f64;
        for w in pts.windows(2) {
            let (a, b) = (self.kind.eval(w[0]), self.kind.eval(w[1]));
            if b < a {
                return Err(Error::Precondition(format!(
                    "nonlinearity decreases on [{}, {}]",
                    w[0], w[1]
                )));
            }
            let bound = (w[1] - w[0]) * (w[0].powf(p - 1.0) + w[1].powf(p - 1.0));
            if bound > 0.0 {
                c = c.max((b - a) / bound);
            }
        }
        if !c.is_finite() {
            return Err(Error::Precondition("growth bound fails on the sampled range".into()));
        }
        Ok(c)
    }
}

/// Worst value of `v − u` over grid points and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    #[serde(with = "crate::floats")]
    pub min_defect: f64,
    /// `(t, x index, y index)` of the minimum.
    pub argmin: (f64, usize, usize),
    /// Entries with `v − u < −tolerance`.
    pub violation_count: usize,
    /// `1e−8 · max sup norm` over both runs.
    pub tolerance: f64,
    pub passed: bool,
    pub status_lower: SolveStatus,
    pub status_upper: SolveStatus,
}

/// Relative ordering tolerance.
pub const ORDER_TOL: f64 = 1e-8;
const PRECONDITION_SAMPLES: usize = 2000;

fn horizon(config: &SolveConfig, final_time: f64) -> Result<SolveConfig> {
    let dt = config.time.dt();
    let steps = (final_time / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - final_time).abs() > 1e-9 * final_time.max(dt) {
        return Err(invalid("final_time", format!("{final_time} is not a positive multiple of dt = {dt}")));
    }
    let mut cfg = config.clone();
    cfg.time = TimeGrid::new(dt, steps)?;
    cfg.store_checkpoints = true;
    Ok(cfg)
}

/// Checks `a ≤ b` pointwise on `[0, range]` and `a(μ) ≤ b(ν)` for sampled
/// `μ ≤ ν`.
fn check_pair(a: &NonlinearitySpec, b: &NonlinearitySpec, range: f64, name: &str) -> Result<()> {
    a.check_on_range(range, PRECONDITION_SAMPLES)?;
    b.check_on_range(range, PRECONDITION_SAMPLES)?;
    for k in 0..=PRECONDITION_SAMPLES {
        let mu = range * k as f64 / PRECONDITION_SAMPLES as f64;
        let (x, y) = (a.kind.eval(mu), b.kind.eval(mu));
        if x > y + 1e-14 * y.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "{name}: lower source exceeds upper source at state {mu} ({x} > {y})"
            )));
        }
    }
    Ok(())
}

pub struct ComparisonProblem<'a> {
    pub u0: &'a GridFunction,
    pub v0: &'a GridFunction,
    pub f: &'a NonlinearitySpec,
    pub g: &'a NonlinearitySpec,
    pub f_tilde: &'a NonlinearitySpec,
    pub g_tilde: &'a NonlinearitySpec,
    /// Upper end of the sampled state range; defaults to `2·sup v0`.
    pub state_range: Option<f64>,
}

/// Solves the `(u0, f, g)` and `(v0, f̃, g̃)` problems with one
/// discretization on `[0, T]` and reports the worst ordering defect.
pub fn compare_solutions(problem: &ComparisonProblem<'_>, final_time: f64, config: &SolveConfig) -> Result<OrderingReport> {
    let cfg = horizon(config, final_time)?;
    let (u0, v0) = (problem.u0, problem.v0);
    if cfg.params.coeff1() < 0.0 || cfg.params.coeff2() < 0.0 {
        return Err(Error::Precondition("coefficients must be nonnegative".into()));
    }
    let gap = v0.sub(u0)?;
    if u0.min() < 0.0 || gap.min() < 0.0 {
        return Err(Error::Precondition("data must satisfy 0 <= u0 <= v0".into()));
    }
    let range = problem.state_range.unwrap_or(2.0 * v0.sup_norm()).max(f64::MIN_POSITIVE);
    check_pair(problem.f, problem.f_tilde, range, "memory source")?;
    check_pair(problem.g, problem.g_tilde, range, "local source")?;

    let cache = Arc::new(SemigroupOperatorCache::new(cfg.grid, cfg.time.dt(), cfg.propagator)?);
    let lower = Discretization::with_cache(
        &cfg,
        Sources {
            memory: problem.f.kind.clone(),
            local: problem.g.kind.clone(),
        },
        cache.clone(),
    )?;
    let upper = Discretization::with_cache(
        &cfg,
        Sources {
            memory: problem.f_tilde.kind.clone(),
            local: problem.g_tilde.kind.clone(),
        },
        cache,
    )?;
    let (a, b) = rayon::join(|| solve_with(u0, &cfg, &lower), || solve_with(v0, &cfg, &upper));
    let (a, b) = (a?, b?);
    let scale = a.trace.max_sup_norm().max(b.trace.max_sup_norm());
    let tolerance = ORDER_TOL * scale;
    let mut min_defect = f64::INFINITY;
    let mut argmin = (0.0, 0, 0);
    let mut violation_count = 0;
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        let d = y.state.sub(&x.state)?;
        violation_count += d.values().iter().filter(|&&v| v < -tolerance).count();
        let m = d.min();
        if m < min_defect {
            min_defect = m;
            let (i, j) = d.argmin();
            argmin = (x.t, i, j);
        }
    }
    Ok(OrderingReport {
        min_defect,
        argmin,
        violation_count,
        tolerance,
        passed: min_defect >= -tolerance,
        status_lower: a.trace.status,
        status_upper: b.trace.status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    /// `max_k max (w_{k+1} − w_k)`; at most `tolerance` for a monotone descent.
    pub max_increase: f64,
    pub monotone: bool,
    /// `max_k max (u − w_k)`; at most `tolerance` when the solution bounds
    /// the iterates from below.
    pub max_undershoot: f64,
    pub bounded_below: bool,
    /// `max_n ‖w_k(t_n) − u(t_n)‖_∞` per iterate.
    pub distances_to_solution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub is_supersolution: bool,
    /// `min (v − Λ(v))` over checkpoints.
    pub worst_defect: f64,
    /// `(t, x index, y index)` of the worst defect.
    pub worst_location: (f64, usize, usize),
    pub tolerance: f64,
    pub descent: Option<DescentReport>,
}

/// Checks `v ≥ Λ(v)` for a trajectory given at every step of
/// `config.time` and, when it holds, runs the descent `w_1 = v`,
/// `w_k = Λ(w_{k−1})` against the computed solution.
pub fn supersolution_check(
    v: &[GridFunction],
    config: &SolveConfig,
    sources: &Sources,
    descent_iterations: usize,
) -> Result<SupersolutionReport> {
    let steps = config.time.steps();
    if v.len() != steps + 1 {
        return Err(invalid("v", format!("need {} states, got {}", steps + 1, v.len())));
    }
    let scale = v.iter().map(GridFunction::sup_norm).fold(0.0, f64::max);
    if v.iter().any(|s| s.min() < -POSITIVITY_TOL * scale) {
        return Err(Error::Precondition("v must be nonnegative".into()));
    }
    let dt = config.time.dt();
    let disc = Discretization::new(config, sources.clone())?;
    let traj: Vec<Vec<f64>> = v.iter().map(|s| s.values().to_vec()).collect();
    let image = duhamel_map(&traj[0], &traj, &disc, dt);
    let tolerance = ORDER_TOL * scale.max(f64::MIN_POSITIVE);
    let mut worst_defect = f64::INFINITY;
    let mut worst_location = (0.0, 0, 0);
    for (n, (a, b)) in traj.iter().zip(&image).enumerate() {
        let d = GridFunction::from_raw(config.grid, a.iter().zip(b).map(|(x, y)| x - y).collect());
        if d.min() < worst_defect {
            worst_defect = d.min();
            let (i, j) = d.argmin();
            worst_location = (config.time.time(n), i, j);
        }
    }
    let is_supersolution = worst_defect >= -tolerance;
    let descent = if is_supersolution && descent_iterations > 0 {
        let mut cfg = config.clone();
        cfg.store_checkpoints = true;
        cfg.checkpoint_stride = 1;
        let run = solve_with(&v[0], &cfg, &disc)?;
        if run.trace.status != SolveStatus::Completed {
            return Err(Error::Precondition(format!("reference solve ended with {}", run.trace.status)));
        }
        let u: Vec<&[f64]> = run.checkpoints.iter().map(|c| c.state.values()).collect();
        let mut w = traj;
        let mut max_increase = f64::NEG_INFINITY;
        let mut max_undershoot = f64::NEG_INFINITY;
        let mut distances = Vec::new();
        let mut measure = |w: &[Vec<f64>]| {
            let mut dist = 0.0f64;
            for (wn, un) in w.iter().zip(&u) {
                for (a, b) in wn.iter().zip(un.iter()) {
                    max_undershoot = max_undershoot.max(b - a);
                    dist = dist.max((a - b).abs());
                }
            }
            dist
        };
        distances.push(measure(&w));
        for _ in 1..descent_iterations {
            let next = duhamel_map(&w[0], &w, &disc, dt);
            for (a, b) in next.iter().zip(&w) {
                for (x, y) in a.iter().zip(b) {
                    max_increase = max_increase.max(x - y);
                }
            }
            distances.push(measure(&next));
            w = next;
        }
        Some(DescentReport {
            max_increase,
            monotone: max_increase <= tolerance,
            max_undershoot,
            bounded_below: max_undershoot <= tolerance,
            distances_to_solution: distances,
        })
    } else {
        None
    };
    Ok(SupersolutionReport {
        is_supersolution,
        worst_defect,
        worst_location,
        tolerance,
        descent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// `min (S(t)u0 − u(t))` over checkpoints.
    pub worst_defect: f64,
    /// `min u(t)` over checkpoints.
    pub min_solution: f64,
    pub status: SolveStatus,
    pub passed: bool,
}

/// Tolerance on `S(t)u0 − u(t)`.
pub const DOMINATION_TOL: f64 = 1e-8;
/// Tolerance on `u ≥ 0`.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// With `k₁, k₂ ≤ 0` and `u0 ≥ 0`, checks `0 ≤ u(t) ≤ S(t)u0`.
pub fn free_domination_check(u0: &GridFunction, final_time: f64, config: &SolveConfig) -> Result<DominationReport> {
    if config.params.coeff1() > 0.0 || config.params.coeff2() > 0.0 {
        return Err(Error::Precondition("coefficients must be nonpositive".into()));
    }
    if u0.min() < 0.0 {
        return Err(Error::Precondition("u0 must be nonnegative".into()));
    }
    let cfg = horizon(config, final_time)?;
    let disc = Discretization::new(&cfg, Sources::from_params(&cfg.params))?;
    let run = solve_with(u0, &cfg, &disc)?;
    let mut free = u0.clone();
    let mut step = 0;
    let mut worst_defect = f64::INFINITY;
    let mut min_solution = f64::INFINITY;
    for cp in &run.checkpoints {
        while step < cp.step {
            free = disc.cache.apply(&free)?;
            step += 1;
        }
        worst_defect = worst_defect.min(free.sub(&cp.state)?.min());
        min_solution = min_solution.min(cp.state.min());
    }
    let status = run.trace.status;
    Ok(DominationReport {
        worst_defect,
        min_solution,
        status,
        passed: worst_defect >= -DOMINATION_TOL && min_solution >= -POSITIVITY_TOL && status == SolveStatus::Completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;
    use crate::grid::{GridSpec, Profile};
    use crate::semigroup::ModalBasis;

    fn grid() -> GridSpec {
        GridSpec::new(4.0, 4.0, 33, 32).unwrap()
    }

    fn gaussian(a: f64) -> GridFunction {
        Profile::Gaussian {
            amplitude: a,
            center: [0.0, 0.0],
            widths: [0.7, 0.7],
        }
        .sample(grid())
        .unwrap()
    }

    fn config(k1: f64, k2: f64) -> SolveConfig {
        let p = ProblemParams::new(0.5, 3.0, 2.0, k1, k2).unwrap();
        SolveConfig::new(grid(), TimeGrid::new(1.0 / 64.0, 16).unwrap(), p)
    }

    #[test]
    fn ordered_data_give_ordered_solutions() {
        let (u0, v0) = (gaussian(0.5), gaussian(1.0));
        let f = NonlinearitySpec::power(3.0);
        let g = NonlinearitySpec::power(2.0);
        let pb = ComparisonProblem {
            u0: &u0,
            v0: &v0,
            f: &f,
            g: &g,
            f_tilde: &f,
            g_tilde: &g,
            state_range: None,
        };
        let rep = compare_solutions(&pb, 0.25, &config(1.0, 1.0)).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.violation_count, 0);
        // Swapping the roles reverses the ordering and is rejected up front.
        let swapped = ComparisonProblem { u0: &v0, v0: &u0, ..pb };
        assert!(compare_solutions(&swapped, 0.25, &config(1.0, 1.0)).is_err());
    }

    #[test]
    fn identical_problems_agree_exactly() {
        let u0 = gaussian(0.5);
        let f = NonlinearitySpec::power(3.0);
        let g = NonlinearitySpec::power(2.0);
        let pb = ComparisonProblem {
            u0: &u0,
            v0: &u0,
            f: &f,
            g: &g,
            f_tilde: &f,
            g_tilde: &g,
            state_range: None,
        };
        let rep = compare_solutions(&pb, 0.25, &config(1.0, 1.0)).unwrap();
        assert_eq!(rep.min_defect, 0.0);
        assert_eq!(rep.violation_count, 0);
    }

    #[test]
    fn unordered_sources_are_rejected() {
        let u0 = gaussian(0.5);
        let lo = NonlinearitySpec::power(2.0);
        let hi = NonlinearitySpec::power(3.0);
        // Below state 1, u² ≥ u³, so power 2 under power 3 fails.
        let pb = ComparisonProblem {
            u0: &u0,
            v0: &u0,
            f: &lo,
            g: &lo,
            f_tilde: &hi,
            g_tilde: &hi,
            state_range: Some(0.9),
        };
        assert!(matches!(
            compare_solutions(&pb, 0.25, &config(1.0, 1.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn solution_is_its_own_supersolution() {
        let mut cfg = config(1.0, 1.0);
        cfg.store_checkpoints = true;
        let disc = Discretization::new(&cfg, Sources::from_params(&cfg.params)).unwrap();
        let run = solve_with(&gaussian(0.5), &cfg, &disc).unwrap();
        let v: Vec<_> = run.checkpoints.into_iter().map(|c| c.state).collect();
        let rep = supersolution_check(&v, &cfg, &Sources::from_params(&cfg.params), 3).unwrap();
        assert!(rep.is_supersolution);
        assert!(rep.worst_defect.abs() < 1e-13);
        let d = rep.descent.unwrap();
        assert!(d.distances_to_solution.iter().all(|&x| x < 1e-13));
    }

    #[test]
    fn free_flow_is_supersolution_for_negative_sources() {
        let cfg = config(-1.0, -1.0);
        let u0 = gaussian(0.5);
        let basis = ModalBasis::new(grid());
        let v: Vec<GridFunction> = (0..=cfg.time.steps())
            .map(|n| {
                if n == 0 {
                    u0.clone()
                } else {
                    SemigroupOperatorCache::from_basis(&basis, cfg.time.time(n)).unwrap().apply(&u0).unwrap()
                }
            })
            .collect();
        let rep = supersolution_check(&v, &cfg, &Sources::from_params(&cfg.params), 12).unwrap();
        assert!(rep.is_supersolution, "{rep:?}");
        let d = rep.descent.unwrap();
        let last = *d.distances_to_solution.last().unwrap();
        assert!(last < 1e-3 * d.distances_to_solution[0], "{:?}", d.distances_to_solution);
    }

    #[test]
    fn free_domination_examples() {
        let u0 = gaussian(1.0);
        let rep = free_domination_check(&u0, 0.25, &config(0.0, 0.0)).unwrap();
        assert!(rep.worst_defect.abs() < 1e-15 && rep.passed);
        let rep = free_domination_check(&u0, 0.25, &config(-1.0, 0.0)).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(free_domination_check(&u0, 0.25, &config(1.0, 0.0)).is_err());
    }
}
