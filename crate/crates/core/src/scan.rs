//! Scans over `(p₁, p₂)` with refinement-checked blow-up labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exponents::{p1_star, p2_star, p2_star_star, p2_tilde, GrushinDims};
use crate::grid::Profile;
use crate::solver::{solve, SolveConfig, SolveStatus};

/// Relative agreement of `t_max` required under `dt/2` and grid ×1.5.
pub const REFINEMENT_TOL: f64 = 0.10;
pub const GRID_REFINEMENT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Completed,
    BlowupDetected,
    NanAbort,
    /// Blow-up seen on the base run but not reproduced under refinement.
    Inconclusive,
}

impl CellStatus {
    pub fn code(self) -> u8 {
        match self {
            CellStatus::Completed => 0,
            CellStatus::BlowupDetected => 1,
            CellStatus::NanAbort => 2,
            CellStatus::Inconclusive => 3,
        }
    }
}

impl From<SolveStatus> for CellStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Completed => CellStatus::Completed,
            SolveStatus::BlowupDetected => CellStatus::BlowupDetected,
            SolveStatus::NanAbort => CellStatus::NanAbort,
        }
    }
}

impl std::fmt::Display for CellStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellStatus::Completed => "completed",
            CellStatus::BlowupDetected => "blowup_detected",
            CellStatus::NanAbort => "nan_abort",
            CellStatus::Inconclusive => "inconclusive",
        })
    }
}

/// Blow-up times of the refined reruns; `+∞` when a rerun did not blow up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    #[serde(with = "crate::floats")]
    pub t_max_half_dt: f64,
    #[serde(with = "crate::floats")]
    pub t_max_fine_grid: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub p1: f64,
    pub p2: f64,
    pub status: CellStatus,
    /// `+∞` unless the final label is a blow-up.
    #[serde(with = "crate::floats")]
    pub t_max_estimate: f64,
    #[serde(with = "crate::floats")]
    pub max_sup_norm: f64,
    pub refinement: Option<RefinementCheck>,
}

fn within(reference: f64, other: f64) -> bool {
    other.is_finite() && (other - reference).abs() <= REFINEMENT_TOL * reference
}

fn blowup_time(profile: &Profile, config: &SolveConfig) -> Result<f64> {
    let run = solve(&profile.sample(config.grid)?, config)?;
    Ok(match run.trace.status {
        SolveStatus::BlowupDetected => run.trace.t_max_estimate,
        _ => f64::INFINITY,
    })
}

/// Solves once and, on blow-up, reruns with `dt/2` and with the grid refined
/// by 1.5; the blow-up label survives only if both reruns agree within 10%.
pub fn label_run(profile: &Profile, config: &SolveConfig) -> Result<CellOutcome> {
    let run = solve(&profile.sample(config.grid)?, config)?;
    let mut outcome = CellOutcome {
        p1: config.params.p1(),
        p2: config.params.p2(),
        status: run.trace.status.into(),
        t_max_estimate: run.trace.t_max_estimate,
        max_sup_norm: run.trace.max_sup_norm(),
        refinement: None,
    };
    if run.trace.status == SolveStatus::NanAbort {
        outcome.t_max_estimate = f64::INFINITY;
    }
    if run.trace.status != SolveStatus::BlowupDetected {
        return Ok(outcome);
    }
    let t_base = run.trace.t_max_estimate;
    let mut half = config.clone();
    half.time = config.time.refined(2);
    let mut fine = config.clone();
    fine.grid = config.grid.refined(GRID_REFINEMENT)?;
    let (a, b) = rayon::join(|| blowup_time(profile, &half), || blowup_time(profile, &fine));
    let (a, b) = (a?, b?);
    let stable = within(t_base, a) && within(t_base, b);
    outcome.refinement = Some(RefinementCheck {
        t_max_half_dt: a,
        t_max_fine_grid: b,
        stable,
    });
    if !stable {
        outcome.status = CellStatus::Inconclusive;
        outcome.t_max_estimate = f64::INFINITY;
    }
    Ok(outcome)
}

/// One labelled outcome per `(p₁, p₂)` pair, row-major in `p₁`.
pub fn phase_scan(p1_values: &[f64], p2_values: &[f64], base: &SolveConfig, profile: &Profile) -> Result<Vec<CellOutcome>> {
    if p1_values.is_empty() || p2_values.is_empty() {
        return Err(invalid("scan", "both exponent lists must be nonempty"));
    }
    let mut configs = Vec::with_capacity(p1_values.len() * p2_values.len());
    for &p1 in p1_values {
        for &p2 in p2_values {
            let mut c = base.clone();
            c.params = base.params.with_exponents(p1, p2)?;
            configs.push(c);
        }
    }
    base.validate()?;
    profile.sample(base.grid)?;
    configs
        .par_iter()
        .map(|c| {
            label_run(profile, c).or_else(|_| {
                Ok(CellOutcome {
                    p1: c.params.p1(),
                    p2: c.params.p2(),
                    status: CellStatus::NanAbort,
                    t_max_estimate: f64::INFINITY,
                    max_sup_norm: f64::NAN,
                    refinement: None,
                })
            })
        })
        .collect()
}

/// A regime boundary sampled as `(p₁, p₂)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayCurve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// `p₁ = p₁*`, `p₂ = p₂*`, `p₂ = p₂**` and `p₂ = p̃₂(p₁)` over the scan box.
pub fn overlay_curves(
    dims: GrushinDims,
    gamma: f64,
    p1_range: (f64, f64),
    p2_range: (f64, f64),
    samples: usize,
) -> Vec<OverlayCurve> {
    let q = dims.homogeneous_dimension();
    let n = samples.max(2);
    let along = |lo: f64, hi: f64| (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let p1s = p1_star(q, gamma);
    let horizontal = |name: &str, p2: f64| OverlayCurve {
        name: name.into(),
        points: along(p1_range.0, p1_range.1).map(|p1| (p1, p2)).collect(),
    };
    vec![
        OverlayCurve {
            name: "p1_star".into(),
            points: along(p2_range.0, p2_range.1).map(|p2| (p1s, p2)).collect(),
        },
        horizontal("p2_star", p2_star(q)),
        horizontal("p2_star_star", p2_star_star(q, gamma)),
        OverlayCurve {
            name: "p2_tilde".into(),
            points: along(p1_range.0, p1_range.1).map(|p1| (p1, p2_tilde(p1, gamma))).collect(),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ProblemParams;
    use crate::grid::GridSpec;
    use crate::memory::TimeGrid;

    fn base(k1: f64, k2: f64, dt: f64, steps: usize) -> SolveConfig {
        let grid = GridSpec::new(4.0, 4.0, 33, 32).unwrap();
        let params = ProblemParams::new(0.5, 3.0, 3.0, k1, k2).unwrap();
        let mut c = SolveConfig::new(grid, TimeGrid::new(dt, steps).unwrap(), params);
        c.checkpoint_stride = 16;
        c
    }

    fn bump(amplitude: f64) -> Profile {
        Profile::Gaussian {
            amplitude,
            center: [0.0, 0.0],
            widths: [0.5, 0.5],
        }
    }

    #[test]
    fn tilde_curve_passes_through_reference_point() {
        let curves = overlay_curves(GrushinDims::default(), 0.5, (1.0, 5.0), (1.0, 5.0), 5);
        let tilde = curves.iter().find(|c| c.name == "p2_tilde").unwrap();
        let (p1, p2) = tilde.points[2];
        assert_eq!(p1, 3.0);
        assert!((p2 - 7.0 / 3.0).abs() < 1e-15);
        let vertical = curves.iter().find(|c| c.name == "p1_star").unwrap();
        assert!(vertical.points.iter().all(|&(p, _)| p == 2.5));
    }

    #[test]
    fn absorbing_cells_complete() {
        let cells = phase_scan(&[2.0, 3.0], &[2.0, 3.0], &base(-1.0, -1.0, 1.0 / 64.0, 16), &bump(1.0)).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.status == CellStatus::Completed && c.t_max_estimate.is_infinite()));
    }

    #[test]
    fn stable_blowup_keeps_its_label() {
        let out = label_run(&bump(50.0), &base(0.0, 1.0, 5e-6, 100)).unwrap();
        assert_eq!(out.status, CellStatus::BlowupDetected);
        let r = out.refinement.unwrap();
        assert!(r.stable);
        assert!(within(out.t_max_estimate, r.t_max_half_dt) && within(out.t_max_estimate, r.t_max_fine_grid));
    }

    #[test]
    fn unresolved_blowup_is_demoted() {
        // Coarse explicit steps cross the threshold late; dt/2 moves the crossing.
        let mut cfg = base(0.0, 1.0, 1.5e-4, 8);
        cfg.blowup_threshold = 1e3;
        let out = label_run(&bump(50.0), &cfg).unwrap();
        assert_eq!(out.status, CellStatus::Inconclusive, "{out:?}");
        assert!(out.t_max_estimate.is_infinite());
    }
}
