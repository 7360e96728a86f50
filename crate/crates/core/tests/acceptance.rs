//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use grushin_core::comparison::{compare_solutions, free_domination_check, ComparisonProblem, NonlinearitySpec};
use grushin_core::exponents::{critical_exponents, p1_star, p2_tilde, q_sc1, q_sc2, QscBranch};
use grushin_core::kernel::{
    grushin_kernel, grushin_kernel_row, hermite_terms_for, kernel_property_report, mehler_hermite_oracle,
    mehler_kernel, KernelBox, ProbeOptions,
};
use grushin_core::memory::{build_weights, fractional_integral};
use grushin_core::scan::{label_run, phase_scan, CellStatus, REFINEMENT_TOL};
use grushin_core::semigroup::{apply_semigroup, decay_slope_fit};
use grushin_core::solver::{contraction_window, desk_grid, picard_iterate, residual_check, solve, Sources};
use grushin_core::{
    GridFunction, GridSpec, GrushinDims, KernelQuery, MehlerQuery, ProblemParams, Profile, PropagatorKind,
    QuadratureSpec, SolveConfig, SolveStatus, TimeGrid,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(grid: GridSpec, amplitude: f64, width: f64) -> GridFunction {
    Profile::Gaussian {
        amplitude,
        center: [0.0, 0.0],
        widths: [width, width],
    }
    .sample(grid)
    .unwrap()
}

fn params(gamma: f64, p1: f64, p2: f64, k1: f64, k2: f64) -> ProblemParams {
    ProblemParams::new(gamma, p1, p2, k1, k2).unwrap()
}

fn kernel_identities() -> Outcome {
    let spec = QuadratureSpec::default();
    let k = |q: &KernelQuery| grushin_kernel(q, &spec).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut scaling, mut symmetry) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let q = KernelQuery::scalar(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.2..1.5),
        )
        .unwrap();
        let base = k(&q);
        for r in [0.5f64, 2.0, 4.0] {
            scaling = scaling.max((r.powi(3) * k(&q.scaled(r)) - base).abs() / base);
        }
        let swapped = KernelQuery::scalar(q.x0[0], q.x[0], q.y, q.t).unwrap();
        let reflected = KernelQuery::scalar(q.x[0], q.x0[0], -q.y, q.t).unwrap();
        symmetry = symmetry.max((k(&swapped) - base).abs()).max((k(&reflected) - base).abs());
    }
    let mut normalization = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let rep = kernel_property_report(t, KernelBox::adapted(t), (161, 161), &spec, &ProbeOptions::default())
            .map_err(|e| e.to_string())?;
        normalization.push(rep.normalization);
    }
    let mut min_value = f64::INFINITY;
    for _ in 0..1000 {
        let q = KernelQuery::scalar(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.1..2.0),
        )
        .unwrap();
        min_value = min_value.min(k(&q));
    }
    let norm_ok = normalization.iter().all(|n| (n - 1.0).abs() < 1e-3);
    check(
        scaling < 1e-6 && symmetry < 1e-8 && norm_ok && min_value > 0.0,
        format!("scaling {scaling:.2e}, symmetry {symmetry:.2e}, normalization {normalization:?}, min sample {min_value:.3e}"),
    )
}

fn mehler_cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for i in 0..300 {
        let z = rng.gen_range(0.2..5.0);
        let lambda = 10f64.powf(rng.gen_range(-1.0..1.0));
        let dim = if i % 6 == 0 { 2 } else { 1 };
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let q = MehlerQuery::new(lambda, x, x0, z / lambda).unwrap();
        let terms = hermite_terms_for(&q, 1e-13, 1 << 16).unwrap();
        let oracle = mehler_hermite_oracle(&q, terms).unwrap().value;
        let direct = mehler_kernel(&q);
        worst = worst.max((oracle - direct).abs() / direct);
    }
    // λ → 0: the Gaussian heat kernel, with an O(λ²) defect.
    let (x, x0, t) = (1.2f64, -0.4f64, 0.7f64);
    let gauss = (-(x - x0) * (x - x0) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
    let defect = |lambda: f64| (mehler_kernel(&MehlerQuery::scalar(lambda, x, x0, t).unwrap()) - gauss).abs();
    let lambdas = [4e-2, 2e-2, 1e-2, 5e-3];
    let ratios: Vec<f64> = lambdas.windows(2).map(|w| defect(w[0]) / defect(w[1])).collect();
    let order_ok = ratios.iter().all(|r| (3.6..4.4).contains(r));
    check(
        worst < 1e-10 && order_ok,
        format!("worst relative gap {worst:.2e} over 300 queries, λ-halving defect ratios {ratios:.3?}"),
    )
}

fn chapman_kolmogorov() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (z_half, nz) = (5.0, 201);
    let (w_half, nw) = (6.0, 481);
    let hz = 2.0 * z_half / (nz - 1) as f64;
    let hw = 2.0 * w_half / (nw - 1) as f64;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (x, x0, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (s, t) = (rng.gen_range(0.2..0.5), rng.gen_range(0.2..0.5));
        let composed: f64 = (0..nz)
            .into_par_iter()
            .map(|i| {
                let z = -z_half + i as f64 * hz;
                // K(x, z, y − w; t) via evenness in y
                let a = grushin_kernel_row(&[x], &[z], t, -w_half - y, hw, nw, &spec).unwrap();
                let b = grushin_kernel_row(&[z], &[x0], s, -w_half, hw, nw, &spec).unwrap();
                a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() * hw * hz
            })
            .sum();
        let direct = grushin_kernel(&KernelQuery::scalar(x, x0, y, s + t).unwrap(), &spec).unwrap().value;
        worst = worst.max((composed - direct).abs());
    }
    check(worst < 1e-4, format!("worst gap {worst:.2e} over 10 points"))
}

fn smoothing_slopes() -> Outcome {
    let grid = desk_grid(129, 128).map_err(|e| e.to_string())?;
    let u0 = Profile::Bump {
        amplitude: 1.0,
        center: [0.0, 0.0],
        radii: [grid.hx(), grid.hy()],
    }
    .sample(grid)
    .unwrap();
    let times: Vec<f64> = (0..9).map(|i| 0.2 + 0.1 * i as f64).collect();
    let sup = decay_slope_fit(&u0, 1.0, f64::INFINITY, &times, PropagatorKind::Mehler).map_err(|e| e.to_string())?;
    let l2 = decay_slope_fit(&u0, 1.0, 2.0, &times, PropagatorKind::Mehler).map_err(|e| e.to_string())?;
    check(
        (sup.slope + 1.5).abs() <= 0.08 && (l2.slope + 0.75).abs() <= 0.08,
        format!("(1,∞) slope {:.4}, (1,2) slope {:.4}", sup.slope, l2.slope),
    )
}

fn memory_quadrature() -> Outcome {
    let mut affine = 0.0f64;
    for &gamma in &[0.0, 0.3, 0.5, 0.9] {
        let (dt, n) = (0.01, 200);
        let w = build_weights(gamma, dt, n).unwrap();
        let f: Vec<f64> = (0..=n).map(|j| 2.0 - 3.0 * j as f64 * dt).collect();
        let (a, t) = (1.0 - gamma, n as f64 * dt);
        let exact = 2.0 * t.powf(a) / a - 3.0 * t.powf(a + 1.0) / (a * (a + 1.0));
        affine = affine.max((fractional_integral(&f, &w, n).unwrap() - exact).abs());
    }
    // ∫₀¹ (1 − τ)^{−1/2} τ² dτ = Β(3, ½) = 16/15
    let exact = 16.0 / 15.0;
    let values: Vec<f64> = (0..5)
        .map(|h| {
            let n = 16usize << h;
            let dt = 1.0 / n as f64;
            let w = build_weights(0.5, dt, n).unwrap();
            let f: Vec<f64> = (0..=n).map(|j| (j as f64 * dt).powi(2)).collect();
            fractional_integral(&f, &w, n).unwrap()
        })
        .collect();
    let errors: Vec<f64> = values.iter().map(|v| (v - exact).abs()).collect();
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    // Error model C·dt^p fitted on the three coarsest levels predicts the two finest.
    let dt = |h: usize| 1.0 / (16usize << h) as f64;
    let p = orders[1];
    let c = errors[2] / dt(2).powf(p);
    let model_gap = (3..5)
        .map(|h| (errors[h] - c * dt(h).powf(p)).abs() / errors[h])
        .fold(0.0, f64::max);
    check(
        affine < 1e-12 && order >= 1.4 && model_gap < 0.1,
        format!(
            "affine error {affine:.1e}, orders {orders:.3?}, finest error {:.2e}, model misfit {:.1}%",
            errors[4],
            100.0 * model_gap
        ),
    )
}

fn linear_consistency() -> Outcome {
    let grid = desk_grid(65, 64).unwrap();
    let mut cfg = SolveConfig::new(grid, TimeGrid::new(1.0 / 64.0, 32).unwrap(), params(0.5, 3.0, 2.0, 0.0, 0.0));
    cfg.store_checkpoints = true;
    let u0 = gaussian(grid, 1.0, 0.7);
    let run = solve(&u0, &cfg).unwrap();
    let exact = apply_semigroup(&u0, cfg.time.final_time(), PropagatorKind::FiniteDifference).unwrap();
    let gap = run.final_state.sub(&exact).unwrap().sup_norm();
    let states: Vec<GridFunction> = run.checkpoints.iter().map(|c| c.state.clone()).collect();
    let residual = residual_check(&states, &cfg, &Sources::from_params(&cfg.params)).unwrap().max_residual;
    check(gap < 1e-10 && residual < 1e-10, format!("solve vs semigroup {gap:.2e}, residual {residual:.2e}"))
}

fn picard_contraction() -> Outcome {
    let grid = desk_grid(65, 64).unwrap();
    let cfg = SolveConfig::new(grid, TimeGrid::new(1.0 / 64.0, 32).unwrap(), params(0.5, 3.0, 2.0, 1.0, 1.0));
    let u0 = gaussian(grid, 0.3, 0.7);
    let window = contraction_window(&u0, &cfg, 6).unwrap();
    let t = window.final_time.ok_or("no contracting horizon found")?;
    let rep = picard_iterate(&u0, t, 10, &cfg, None).unwrap();
    let worst = rep.ratios.iter().skip(1).copied().fold(0.0, f64::max);
    let mut solve_cfg = cfg.clone();
    solve_cfg.time = TimeGrid::new(cfg.time.dt(), (t / cfg.time.dt()).round() as usize).unwrap();
    let run = solve(&u0, &solve_cfg).unwrap();
    let gap = rep.final_state().unwrap().sub(&run.final_state).unwrap().sup_norm();
    check(
        !rep.diverged && worst <= 0.6 && gap < 1e-10,
        format!("window T = {t}, worst ratio {worst:.3}, Picard vs solve {gap:.2e}"),
    )
}

fn comparison_principle() -> Outcome {
    let grid = desk_grid(65, 64).unwrap();
    let cfg = SolveConfig::new(grid, TimeGrid::new(1.0 / 64.0, 32).unwrap(), params(0.5, 3.0, 2.0, 1.0, 1.0));
    let (u0, v0) = (gaussian(grid, 0.5, 0.7), gaussian(grid, 1.0, 0.7));
    let (f, g) = (NonlinearitySpec::power(3.0), NonlinearitySpec::power(2.0));
    let equal = ComparisonProblem {
        u0: &u0,
        v0: &v0,
        f: &f,
        g: &g,
        f_tilde: &f,
        g_tilde: &g,
        state_range: None,
    };
    let a = compare_solutions(&equal, 0.5, &cfg).map_err(|e| e.to_string())?;
    // u^p ≤ u^p̃ for 0 ≤ u ≤ 1 when p ≥ p̃
    let data = gaussian(grid, 0.4, 0.7);
    let (f_hi, g_hi) = (NonlinearitySpec::power(4.0), NonlinearitySpec::power(3.0));
    let ordered = ComparisonProblem {
        u0: &data,
        v0: &data,
        f: &f_hi,
        g: &g_hi,
        f_tilde: &f,
        g_tilde: &g,
        state_range: Some(1.0),
    };
    let b = compare_solutions(&ordered, 0.5, &cfg).map_err(|e| e.to_string())?;
    check(
        a.passed && b.passed,
        format!(
            "equal nonlinearities min(v−u) {:.2e} ({} violations); ordered exponents min(v−u) {:.2e} ({} violations)",
            a.min_defect, a.violation_count, b.min_defect, b.violation_count
        ),
    )
}

fn free_domination() -> Outcome {
    let grid = desk_grid(129, 128).unwrap();
    let mut cfg = SolveConfig::new(grid, TimeGrid::new(1.0 / 256.0, 128).unwrap(), params(0.5, 2.0, 3.0, -1.0, -1.0));
    cfg.checkpoint_stride = 16;
    let rep = free_domination_check(&gaussian(grid, 2.0, 0.7), 0.5, &cfg).map_err(|e| e.to_string())?;
    check(
        rep.passed && rep.worst_defect >= -1e-8 && rep.min_solution >= -1e-10 && rep.status == SolveStatus::Completed,
        format!("worst defect {:.2e}, min u {:.2e}, status {}", rep.worst_defect, rep.min_solution, rep.status),
    )
}

fn positivity() -> Outcome {
    let grid = desk_grid(129, 128).unwrap();
    let mut cfg = SolveConfig::new(grid, TimeGrid::new(1.0 / 256.0, 128).unwrap(), params(0.5, 3.0, 2.0, 1.0, 1.0));
    cfg.store_checkpoints = true;
    cfg.checkpoint_stride = 4;
    let u0 = Profile::IndicatorMollified {
        amplitude: 0.3,
        center: [0.0, 0.0],
        half_widths: [1.0, 1.0],
        eps: 0.2,
    }
    .sample(grid)
    .unwrap();
    let run = solve(&u0, &cfg).unwrap();
    let min = run.checkpoints.iter().map(|c| c.state.min()).fold(f64::INFINITY, f64::min);
    check(
        min >= -1e-10 && run.trace.status == SolveStatus::Completed,
        format!("min over {} checkpoints {min:.2e}", run.checkpoints.len()),
    )
}

fn blowup_bookkeeping() -> Outcome {
    let grid = GridSpec::new(4.0, 4.0, 33, 32).unwrap();
    let mut cfg = SolveConfig::new(grid, TimeGrid::new(5e-6, 100).unwrap(), params(0.5, 2.0, 2.0, 0.0, 1.0));
    cfg.checkpoint_stride = 10;
    let profile = Profile::Gaussian {
        amplitude: 50.0,
        center: [0.0, 0.0],
        widths: [0.5, 0.5],
    };
    let mut cells = phase_scan(&[2.0, 3.0], &[2.0, 3.0, 4.0], &cfg, &profile).unwrap();
    // A coarse budget whose blow-up time moves under refinement.
    let mut coarse = cfg.clone();
    coarse.time = TimeGrid::new(1.5e-4, 8).unwrap();
    coarse.blowup_threshold = 1e3;
    coarse.params = params(0.5, 2.0, 3.0, 0.0, 1.0);
    cells.push(label_run(&profile, &coarse).unwrap());
    let mut absorbing = cfg.clone();
    absorbing.params = params(0.5, 2.0, 2.0, -1.0, -1.0);
    let quiet = Profile::Gaussian {
        amplitude: 1.0,
        center: [0.0, 0.0],
        widths: [0.5, 0.5],
    };
    let negative = phase_scan(&[2.0, 3.0], &[2.0, 3.0], &absorbing, &quiet).unwrap();
    let mut counts = [0usize; 4];
    let mut consistent = true;
    for c in &cells {
        counts[c.status.code() as usize] += 1;
        consistent &= match c.status {
            CellStatus::Completed | CellStatus::NanAbort => c.t_max_estimate.is_infinite(),
            CellStatus::BlowupDetected => c.refinement.is_some_and(|r| {
                r.stable
                    && (r.t_max_half_dt - c.t_max_estimate).abs() <= REFINEMENT_TOL * c.t_max_estimate
                    && (r.t_max_fine_grid - c.t_max_estimate).abs() <= REFINEMENT_TOL * c.t_max_estimate
            }),
            CellStatus::Inconclusive => c.refinement.is_some_and(|r| !r.stable) && c.t_max_estimate.is_infinite(),
        };
    }
    let all_global = negative.iter().all(|c| c.status == CellStatus::Completed);
    check(
        consistent && all_global && counts[1] > 0 && counts[3] > 0,
        format!(
            "{} cells: {} completed, {} stable blow-up, {} nan, {} inconclusive; absorbing cells all completed: {all_global}",
            cells.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3]
        ),
    )
}

fn exponent_golden() -> Outcome {
    let dims = GrushinDims::default();
    let rep = critical_exponents(dims, &params(0.5, 3.0, 7.0 / 3.0, 1.0, 1.0), None).unwrap();
    let table = [
        (rep.p_gamma, 2.5),
        (rep.p1_star, 2.5),
        (rep.p2_star, 5.0 / 3.0),
        (rep.p2_star_star, 2.0),
        (rep.p2_tilde, 7.0 / 3.0),
        (rep.q_sc1, 2.0),
    ];
    let worst = table.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let low = critical_exponents(dims, &params(0.2, 3.0, 2.0, 1.0, 1.0), None).unwrap();
    let switch = (low.p1_star - 5.0).abs() < 1e-12 && low.p_gamma < 5.0;
    let exact_switch = p1_star(3, Ratio::new(1i128, 5)) == Ratio::from_integer(5);
    let mut continuity = 0.0f64;
    for p1 in [1.5, 2.0, 3.0, 4.5, 7.0] {
        for gamma in [0.1, 0.5, 0.9] {
            continuity = continuity.max((q_sc1(3, p1, gamma) - q_sc2(3, p2_tilde(p1, gamma))).abs());
        }
    }
    let both = rep.q_sc.branch == QscBranch::Both;
    check(
        worst < 1e-12 && switch && exact_switch && continuity < 1e-12 && both,
        format!("table error {worst:.1e}, γ=0.2 p1* = {}, branch gap {continuity:.1e}", low.p1_star),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("kernel identities", kernel_identities),
        ("Mehler cross-validation", mehler_cross_validation),
        ("Chapman-Kolmogorov", chapman_kolmogorov),
        ("smoothing slopes", smoothing_slopes),
        ("memory quadrature", memory_quadrature),
        ("linear consistency", linear_consistency),
        ("Picard contraction", picard_contraction),
        ("comparison principle", comparison_principle),
        ("free-solution domination", free_domination),
        ("positivity preservation", positivity),
        ("blow-up bookkeeping", blowup_bookkeeping),
        ("exponent golden values", exponent_golden),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
