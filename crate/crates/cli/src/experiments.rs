
use grushin_core::comparison::{compare_solutions, free_domination_check, ComparisonProblem, NonlinearitySpec};
use grushin_core::exponents::{admissible_q_window, classify_regime, classify_regime_exact, critical_exponents};
use grushin_core::kernel::{kernel_property_report, KernelBox, ProbeOptions};
use grushin_core::scan::{overlay_curves, phase_scan};
use grushin_core::semigroup::{apply_semigroup, decay_slope_fit};
use grushin_core::solver::{contraction_window, picard_iterate, residual_check, solve, Sources};
use grushin_core::{CellStatus, GridFunction, GrushinDims, QuadratureSpec, SolveStatus, TimeGrid};
use serde_json::{json, Map, Value};

use crate::config::{CompareMode, ExperimentConfig, Kind};
use crate::failure::Failure;
use crate::output::{field, num, to_value, Artifacts};

pub struct Outcome {
    pub results: Value,
    pub warnings: Vec<String>,
    /// A solve ended in `nan_abort`.
    pub aborted: bool,
}

impl Outcome {
    fn new(results: Value) -> Self {
        Self {
            results,
            warnings: Vec::new(),
            aborted: false,
        }
    }
}

pub fn run(kind: Kind, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let mut outcome = match kind {
        Kind::Exponents => exponents(cfg)?,
        Kind::KernelCheck => kernel_check(cfg)?,
        Kind::DecayFit => decay_fit(cfg, out)?,
        Kind::Solve => solve_run(cfg, out)?,
        Kind::Picard => picard(cfg, out)?,
        Kind::Compare => compare(cfg)?,
        Kind::PhaseScan => scan(cfg, out)?,
    };
    if kind != Kind::Exponents && cfg.dims != GrushinDims::default() {
        outcome
            .warnings
            .push("grid experiments run on R x R; `dims` only affects exponent reports".into());
    }
    Ok(outcome)
}

fn insert(v: &mut Value, key: &str, item: Value) {
    v.as_object_mut().expect("results are objects").insert(key.into(), item);
}

fn initial_data(cfg: &ExperimentConfig) -> Result<GridFunction, Failure> {
    Ok(cfg.profile.sample(cfg.grid)?)
}

/// `T / dt` as a step count, required to be a whole number.
fn steps_for(final_time: f64, dt: f64) -> Result<usize, Failure> {
    let steps = (final_time / dt).round();
    if steps < 1.0 || (steps * dt - final_time).abs() > 1e-9 * final_time {
        return Err(Failure::config(format!("final_time {final_time} is not a multiple of dt {dt}")));
    }
    Ok(steps as usize)
}

fn exponents(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let params = cfg.params.resolve()?;
    let exact = cfg.params.exact()?;
    let nonneg = cfg.exponents.data_nonneg;
    let report = critical_exponents(cfg.dims, &params, cfg.exponents.q)?;
    let verdict = match &exact {
        Some(r) => classify_regime_exact(cfg.dims, r, nonneg),
        None => classify_regime(cfg.dims, &params, nonneg),
    };
    let mut results = to_value(&report);
    insert(&mut results, "verdict", to_value(&verdict.case_tag));
    insert(&mut results, "classification", to_value(&verdict));
    insert(&mut results, "exact_arithmetic", Value::Bool(exact.is_some()));
    let window = admissible_q_window(cfg.dims, params.p1(), params.gamma())?;
    insert(&mut results, "q_window", to_value(&window));
    Ok(Outcome::new(results))
}

fn kernel_check(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let k = &cfg.kernel_check;
    if !(k.t > 0.0) {
        return Err(Failure::config(format!("kernel_check.t = {} must be > 0", k.t)));
    }
    let mut domain = KernelBox::adapted(k.t);
    domain.x_half = k.x_half.unwrap_or(domain.x_half);
    domain.y_half = k.y_half.unwrap_or(domain.y_half);
    let spec = QuadratureSpec {
        nodes: k.nodes,
        ..QuadratureSpec::default()
    };
    let probe = ProbeOptions {
        pairs: k.pairs,
        sample_half_width: k.sample_half_width,
        seed: cfg.seed,
        ..ProbeOptions::default()
    };
    let report = kernel_property_report(k.t, domain, (k.nx, k.ny), &spec, &probe)?;
    let mut results = to_value(&report);
    insert(&mut results, "normalization_error", num((report.normalization - 1.0).abs()));
    let mut outcome = Outcome::new(results);
    outcome.warnings = report.warnings;
    Ok(outcome)
}

fn decay_fit(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let d = &cfg.decay_fit;
    let u0 = initial_data(cfg)?;
    let fit = decay_slope_fit(&u0, d.p, d.q, &d.times, cfg.solver.propagator)?;
    out.write("decay_series.csv", |w| {
        writeln!(w, "t,norm,log_t,log_norm")?;
        for &(t, n) in &fit.series {
            writeln!(w, "{},{},{},{}", field(t), field(n), field(t.ln()), field(n.ln()))?;
        }
        Ok(())
    })?;
    let mut results = to_value(&fit);
    insert(&mut results, "slope_error", num(fit.slope - fit.predicted_slope));
    Ok(Outcome::new(results))
}

fn solve_run(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let mut sc = cfg.solve_config()?;
    let u0 = initial_data(cfg)?;
    let mut warnings = Vec::new();
    if cfg.solver.residual_check {
        sc.store_checkpoints = true;
        if sc.checkpoint_stride != 1 {
            warnings.push("residual_check stores every step; checkpoint_stride set to 1".into());
            sc.checkpoint_stride = 1;
        }
    }
    let run = solve(&u0, &sc)?;
    let trace = &run.trace;
    out.write("trace.csv", |w| trace.write_csv(w))?;
    out.write("final_state.bin", |w| run.final_state.write_binary(w))?;
    out.write("final_state.csv", |w| run.final_state.write_csv(w))?;
    let reached = trace.times.last().copied().unwrap_or(0.0);
    let mut results = json!({
        "status": trace.status,
        "status_code": trace.status.code(),
        "t_max_estimate": num(trace.t_max_estimate),
        "final_time": num(reached),
        "max_sup_norm": num(trace.max_sup_norm()),
        "final_sup_norm": num(run.final_state.sup_norm()),
        "final_min": num(run.final_state.min()),
        "min_over_checkpoints": Value::Null,
        "checkpoints": trace.times.len(),
    });
    if !run.checkpoints.is_empty() {
        let m = run.checkpoints.iter().map(|c| c.state.min()).fold(f64::INFINITY, f64::min);
        insert(&mut results, "min_over_checkpoints", num(m));
    }
    let completed = trace.status == SolveStatus::Completed;
    if completed && sc.params.coeff1() == 0.0 && sc.params.coeff2() == 0.0 {
        let free = apply_semigroup(&u0, reached, sc.propagator)?;
        insert(&mut results, "free_evolution_defect", num(free.sub(&run.final_state)?.sup_norm()));
    }
    if cfg.solver.residual_check {
        if completed {
            let states: Vec<GridFunction> = run.checkpoints.iter().map(|c| c.state.clone()).collect();
            let rep = residual_check(&states, &sc, &Sources::from_params(&sc.params))?;
            insert(&mut results, "max_residual", num(rep.max_residual));
        } else {
            warnings.push(format!("residual check skipped: run ended with {}", trace.status));
        }
    }
    Ok(Outcome {
        results,
        warnings,
        aborted: trace.status == SolveStatus::NanAbort,
    })
}

fn picard(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let p = &cfg.picard;
    let sc = cfg.solve_config()?;
    let u0 = initial_data(cfg)?;
    let mut results = Map::new();
    let final_time = match p.final_time {
        Some(t) => Some(t),
        None => {
            let window = contraction_window(&u0, &sc, p.iterations)?;
            results.insert("window".into(), to_value(&window));
            window.final_time
        }
    };
    let Some(final_time) = final_time else {
        results.insert("contracting".into(), Value::Bool(false));
        let mut outcome = Outcome::new(Value::Object(results));
        outcome.warnings.push("no contracting horizon found; the first probe already fails".into());
        return Ok(outcome);
    };
    let report = picard_iterate(&u0, final_time, p.iterations, &sc, p.ball_multiple)?;
    out.write("picard.csv", |w| {
        writeln!(w, "k,distance,ratio")?;
        for (k, d) in report.distances.iter().enumerate() {
            let ratio = if k == 0 { f64::NAN } else { report.ratios[k - 1] };
            writeln!(w, "{},{},{}", k + 1, field(*d), field(ratio))?;
        }
        Ok(())
    })?;
    let worst = report.ratios.iter().skip(1).copied().fold(0.0, f64::max);
    let mut at_t = sc.clone();
    at_t.time = TimeGrid::new(sc.time.dt(), steps_for(final_time, sc.time.dt())?)?;
    let run = solve(&u0, &at_t)?;
    let gap = report
        .final_state()
        .map(|s| s.sub(&run.final_state).map(|d| d.sup_norm()))
        .transpose()?
        .unwrap_or(f64::NAN);
    results.insert("final_time".into(), num(final_time));
    results.insert("contracting".into(), Value::Bool(!report.diverged && worst <= grushin_core::solver::CONTRACTION_FACTOR));
    results.insert("worst_ratio".into(), num(worst));
    results.insert("report".into(), to_value(&report));
    results.insert("solve_status".into(), to_value(&run.trace.status));
    results.insert("solve_gap".into(), num(gap));
    results.insert("relative_solve_gap".into(), num(gap / run.final_state.sup_norm()));
    Ok(Outcome::new(Value::Object(results)))
}

fn compare(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let c = &cfg.compare;
    let sc = cfg.solve_config()?;
    let final_time = c.final_time.unwrap_or(sc.time.final_time());
    let upper = initial_data(cfg)?;
    let mut results = match c.mode {
        CompareMode::Ordering => {
            if !(0.0..=1.0).contains(&c.lower_scale) {
                return Err(Failure::config(format!("compare.lower_scale = {} not in [0, 1]", c.lower_scale)));
            }
            let lower = upper.scale(c.lower_scale);
            let [lp1, lp2] = c.lower_exponents.unwrap_or([sc.params.p1(), sc.params.p2()]);
            let (f, g) = (NonlinearitySpec::power(lp1), NonlinearitySpec::power(lp2));
            let (ft, gt) = (NonlinearitySpec::power(sc.params.p1()), NonlinearitySpec::power(sc.params.p2()));
            let problem = ComparisonProblem {
                u0: &lower,
                v0: &upper,
                f: &f,
                g: &g,
                f_tilde: &ft,
                g_tilde: &gt,
                state_range: c.state_range,
            };
            to_value(&compare_solutions(&problem, final_time, &sc)?)
        }
        CompareMode::Domination => to_value(&free_domination_check(&upper, final_time, &sc)?),
    };
    insert(&mut results, "mode", to_value(&c.mode));
    insert(&mut results, "final_time", num(final_time));
    Ok(Outcome::new(results))
}

fn scan(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, Failure> {
    let s = &cfg.phase_scan;
    let (p1s, p2s) = (s.p1.values("p1")?, s.p2.values("p2")?);
    let base = cfg.solve_config()?;
    let nonneg = initial_data(cfg)?.min() >= 0.0;
    let cells = phase_scan(&p1s, &p2s, &base, &cfg.profile)?;
    let tags = cells
        .iter()
        .map(|c| Ok(classify_regime(GrushinDims::default(), &base.params.with_exponents(c.p1, c.p2)?, nonneg).case_tag))
        .collect::<Result<Vec<_>, Failure>>()?;
    out.write("cells.csv", |w| {
        writeln!(w, "p1,p2,status,code,t_max_estimate,max_sup_norm,case_tag")?;
        for (c, tag) in cells.iter().zip(&tags) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                field(c.p1),
                field(c.p2),
                c.status,
                c.status.code(),
                field(c.t_max_estimate),
                field(c.max_sup_norm),
                tag
            )?;
        }
        Ok(())
    })?;
    let span = |v: &[f64]| (v[0], v[v.len() - 1]);
    let curves = overlay_curves(
        GrushinDims::default(),
        base.params.gamma(),
        span(&p1s),
        span(&p2s),
        s.overlay_samples,
    );
    out.write("overlay.csv", |w| {
        writeln!(w, "curve,p1,p2")?;
        for c in &curves {
            for &(a, b) in &c.points {
                writeln!(w, "{},{},{}", c.name, field(a), field(b))?;
            }
        }
        Ok(())
    })?;
    let count = |st: CellStatus| cells.iter().filter(|c| c.status == st).count();
    let mut cell_values = Vec::with_capacity(cells.len());
    for (c, tag) in cells.iter().zip(&tags) {
        let mut v = to_value(c);
        insert(&mut v, "case_tag", to_value(tag));
        cell_values.push(v);
    }
    let results = json!({
        "cells": cell_values,
        "total": cells.len(),
        "counts": {
            "completed": count(CellStatus::Completed),
            "blowup_detected": count(CellStatus::BlowupDetected),
            "nan_abort": count(CellStatus::NanAbort),
            "inconclusive": count(CellStatus::Inconclusive),
        },
        "overlay_curves": curves.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(results))
}
