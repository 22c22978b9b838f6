//! One function per subcommand. Each writes its tables and a JSON record
//! into the output directory and reports whether any point failed.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qfridge::dynamics::{
    distance_trajectory, qubit_temperature, steady_state_time, temperature_settling_time, TimeGrid,
    Trajectory,
};
use qfridge::liouvillian::{
    assemble_block_liouvillian, slowest_mode_set, solve_steady_state, spectral_decompose, Block,
    SpectralDecomposition,
};
use qfridge::model::{thermal_product_state, virtual_temperature};
use qfridge::mpemba::{next_eigenvalue, MpembaExperiment};
use qfridge::{Basis, RefrigeratorParams};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SweepSpec};
use crate::output::{json_num, json_opt, num, opt, Failure, OutputDir};

/// Whether the run completed without computational failures.
pub enum Outcome {
    Clean,
    Failed(String),
}

fn grid_for(cfg: &ExperimentConfig, spec: &SpectralDecomposition) -> qfridge::Result<TimeGrid> {
    let g = &cfg.time_grid;
    TimeGrid::relaxation_scaled(spec, g.start_factor, g.end_factor, g.points)
}

fn complex(z: qfridge::C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn trajectory_rows(t: &Trajectory) -> Vec<Vec<String>> {
    t.times
        .iter()
        .zip(&t.distances)
        .zip(&t.temperatures)
        .map(|((t, d), temp)| vec![num(*t), num(*d), num(*temp)])
        .collect()
}

const TRAJECTORY_HEADER: [&str; 3] = ["t", "distance", "qubit_temperature"];

pub fn spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.model;
    let blocks = assemble_block_liouvillian(&p)?;
    let spec = spectral_decompose(&blocks)?;
    let mut dir = OutputDir::create(out)?;

    dir.write_csv(
        "spectrum.csv",
        &["index", "re", "im", "block"],
        spec.modes.iter().enumerate().map(|(i, m)| {
            vec![
                i.to_string(),
                num(m.eigenvalue.re),
                num(m.eigenvalue.im),
                m.block.to_string(),
            ]
        }),
    )?;
    let residuals = spec.biorthonormality_residuals();
    dir.write_csv(
        "biorthonormality.csv",
        &["i", "j", "residual"],
        (0..residuals.nrows())
            .flat_map(|i| (0..residuals.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| vec![i.to_string(), j.to_string(), num(residuals[(i, j)])]),
    )?;

    let count = |f: fn(&Block) -> bool| spec.modes.iter().filter(|m| f(&m.block)).count();
    let (pop, pair, scalar) = (
        count(|b| matches!(b, Block::Population)),
        count(|b| matches!(b, Block::Pair(_))),
        count(|b| matches!(b, Block::Scalar(..))),
    );
    println!("modes: {pop} + {}x2 + {scalar} = {}", pair / 2, spec.len());

    let ergodic = spec.is_ergodic();
    let slow = slowest_mode_set(&spec);
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let mut outputs = json!({
        "mode_count": { "population": pop, "pair": pair, "scalar": scalar, "total": spec.len() },
        "stationary_count": spec.stationary_count(),
        "ergodic": ergodic,
        "max_biorthonormality_residual": max_residual,
        "slow_set": slow,
        "lambda2": slow.first().map(|&i| complex(spec.modes[i].eigenvalue)),
        "lambda3": next_eigenvalue(&spec, &slow).map(complex),
    });
    if ergodic {
        let tau = solve_steady_state(&blocks)?.in_basis(Basis::Product, &blocks.basis);
        let ts = qubit_temperature(&tau, p.e0)?.value();
        outputs["steady_qubit_temperature"] = json_num(ts);
        outputs["delta_T"] = json_num(ts - p.t_c);
    }
    let record = dir.finish("spectrum", cfg, outputs, Vec::new())?;
    println!("wrote {}", record.display());
    if !ergodic {
        return Ok(Outcome::Failed(format!(
            "{} stationary modes: the steady state is not unique",
            spec.stationary_count()
        )));
    }
    Ok(Outcome::Clean)
}

fn sweep_params(
    cfg: &ExperimentConfig,
    sweep: &SweepSpec,
) -> Result<Vec<(f64, f64, RefrigeratorParams)>> {
    sweep
        .points()
        .into_iter()
        .map(|(x, y)| {
            let mut p = cfg.model;
            sweep.x.param.apply(&mut p, x);
            sweep.y.param.apply(&mut p, y);
            p.validate().with_context(|| {
                format!("sweep point {}={x}, {}={y}", sweep.x.param, sweep.y.param)
            })?;
            Ok((x, y, p))
        })
        .collect()
}

fn failure(sweep: &SweepSpec, x: f64, y: f64, e: impl std::fmt::Display) -> Failure {
    let mut at = serde_json::Map::new();
    at.insert(sweep.x.param.name().into(), Value::from(x));
    at.insert(sweep.y.param.name().into(), Value::from(y));
    Failure {
        at: Value::Object(at),
        error: e.to_string(),
    }
}

fn finish_sweep(failures: &[Failure], total: usize) -> Outcome {
    if failures.is_empty() {
        Outcome::Clean
    } else {
        Outcome::Failed(format!("{} of {total} sweep points failed", failures.len()))
    }
}

fn steady_point(p: &RefrigeratorParams) -> qfridge::Result<f64> {
    let blocks = assemble_block_liouvillian(p)?;
    let tau = solve_steady_state(&blocks)?.in_basis(Basis::Product, &blocks.basis);
    Ok(qubit_temperature(&tau, p.e0)?.value())
}

pub fn steady_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sweep = &cfg.steady_sweep;
    let points = sweep_params(cfg, sweep)?;
    let results: Vec<_> = points.par_iter().map(|(_, _, p)| steady_point(p)).collect();

    let mut dir = OutputDir::create(out)?;
    let mut failures = Vec::new();
    let mut rows = Vec::with_capacity(points.len());
    let mut coolest: Option<(f64, f64, f64)> = None;
    for ((x, y, p), r) in points.iter().zip(results) {
        match r {
            Ok(ts) => {
                let dt = ts - p.t_c;
                if coolest.is_none_or(|c| dt < c.2) {
                    coolest = Some((*x, *y, dt));
                }
                rows.push(vec![num(*x), num(*y), num(dt), num(ts)]);
            }
            Err(e) => {
                failures.push(failure(sweep, *x, *y, e));
                rows.push(vec![num(*x), num(*y), String::new(), String::new()]);
            }
        }
    }
    dir.write_csv(
        "steady_sweep.csv",
        &[sweep.x.param.name(), sweep.y.param.name(), "delta_T", "T_s"],
        rows,
    )?;
    let outputs = json!({
        "points": points.len(),
        "coolest": coolest.map(|(x, y, dt)| json!({
            sweep.x.param.name(): x, sweep.y.param.name(): y, "delta_T": dt,
        })),
    });
    let outcome = finish_sweep(&failures, points.len());
    let record = dir.finish("steady_sweep", cfg, outputs, failures)?;
    println!("wrote {}", record.display());
    Ok(outcome)
}

pub fn evolve(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.model;
    let blocks = assemble_block_liouvillian(&p)?;
    let spec = spectral_decompose(&blocks)?;
    let grid = grid_for(cfg, &spec)?;
    let thermal = thermal_product_state(&p)?;
    let traj = distance_trajectory(&spec, &thermal, &grid, p.e0)?;

    let mut dir = OutputDir::create(out)?;
    dir.write_csv("trajectory.csv", &TRAJECTORY_HEADER, trajectory_rows(&traj))?;
    let mut failures = Vec::new();
    let mut keep = |what: &str, r: qfridge::Result<f64>| match r {
        Ok(t) => Some(t),
        Err(e) => {
            failures.push(Failure {
                at: Value::from(what),
                error: e.to_string(),
            });
            None
        }
    };
    let t_ss = keep("t_ss", steady_state_time(&traj, cfg.thresholds.epsilon));
    let t_cool = keep(
        "t_cool",
        temperature_settling_time(&traj, cfg.thresholds.temperature_tolerance),
    );
    let slow = slowest_mode_set(&spec);
    let outputs = json!({
        "initial_distance": traj.initial_distance(),
        "t_ss": json_opt(t_ss),
        "t_cool": json_opt(t_cool),
        "virtual_temperature": json_num(virtual_temperature(&p)?),
        "lambda2": slow.first().map(|&i| complex(spec.modes[i].eigenvalue)),
        "grid": { "points": grid.len(), "end": grid.times().last() },
    });
    let outcome = if failures.is_empty() {
        Outcome::Clean
    } else {
        Outcome::Failed("relaxation times could not be determined on this grid".into())
    };
    let record = dir.finish("evolve", cfg, outputs, failures)?;
    println!("wrote {}", record.display());
    Ok(outcome)
}

fn run_experiment(
    cfg: &ExperimentConfig,
    p: &RefrigeratorParams,
) -> qfridge::Result<MpembaExperiment> {
    MpembaExperiment::run_with_grid(
        p,
        cfg.family,
        &cfg.optimizer,
        cfg.thresholds.epsilon,
        |spec| grid_for(cfg, spec),
    )
}

/// An infeasible optimum or a missing crossing is a result, not a failure.
pub fn mpemba(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let e = run_experiment(cfg, &cfg.model)?;
    let s = &e.solution;
    let mut dir = OutputDir::create(out)?;
    dir.write_csv(
        "reference.csv",
        &TRAJECTORY_HEADER,
        trajectory_rows(&e.reference),
    )?;
    dir.write_csv(
        "candidate.csv",
        &TRAJECTORY_HEADER,
        trajectory_rows(&e.candidate),
    )?;

    let timing = e.timing();
    let verified = e.verify();
    let tol = cfg.thresholds.temperature_tolerance;
    let eps = cfg.thresholds.epsilon;
    let outputs = json!({
        "family": s.family,
        "feasible": s.feasible,
        "constraint_residual": s.constraint_residual,
        "distance_gain": s.distance_gain,
        "winning_start": s.start,
        "unitary_params": s.params,
        "initial_distance": { "reference": e.reference.initial_distance(), "candidate": e.candidate.initial_distance() },
        "lambda2": e.lambda2().map(complex),
        "lambda3": e.lambda3().map(complex),
        "t_m": timing.as_ref().ok().and_then(|t| t.t_m).map(json_num),
        "t_ss": {
            "reference": json_opt(steady_state_time(&e.reference, eps).ok()),
            "candidate": json_opt(steady_state_time(&e.candidate, eps).ok()),
        },
        "t_cool": {
            "reference": json_opt(temperature_settling_time(&e.reference, tol).ok()),
            "candidate": json_opt(temperature_settling_time(&e.candidate, tol).ok()),
        },
        "verification": match &verified {
            Ok(_) => json!({ "passed": true }),
            Err(err) => json!({ "passed": false, "reason": err.to_string() }),
        },
    });
    println!(
        "{}: feasible {}, residual {:.2e}, t_M {}, verification {}",
        s.family,
        s.feasible,
        s.constraint_residual,
        opt(timing.as_ref().ok().and_then(|t| t.t_m)),
        if verified.is_ok() { "passed" } else { "failed" },
    );
    let record = dir.finish("mpemba", cfg, outputs, Vec::new())?;
    println!("wrote {}", record.display());
    Ok(Outcome::Clean)
}

pub fn timing_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sweep = &cfg.timing_sweep;
    let points = sweep_params(cfg, sweep)?;
    let eps = cfg.thresholds.epsilon;
    let results: Vec<_> = points
        .par_iter()
        .map(|(_, _, p)| {
            let e = run_experiment(cfg, p)?;
            let t_m = if e.solution.feasible {
                e.timing().ok().and_then(|t| t.t_m)
            } else {
                None
            };
            let t_ss = steady_state_time(&e.candidate, eps).ok();
            Ok::<_, qfridge::Error>((t_m, t_ss, e.solution.feasible))
        })
        .collect();

    let mut dir = OutputDir::create(out)?;
    let mut failures = Vec::new();
    let mut rows = Vec::with_capacity(points.len());
    for ((x, y, _), r) in points.iter().zip(results) {
        match r {
            Ok((t_m, t_ss, feasible)) => rows.push(vec![
                num(*x),
                num(*y),
                opt(t_m),
                opt(t_ss),
                feasible.to_string(),
            ]),
            Err(e) => {
                failures.push(failure(sweep, *x, *y, e));
                rows.push(vec![
                    num(*x),
                    num(*y),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    dir.write_csv(
        "timing_sweep.csv",
        &[
            sweep.x.param.name(),
            sweep.y.param.name(),
            "t_M",
            "t_ss",
            "feasible",
        ],
        rows,
    )?;
    let outcome = finish_sweep(&failures, points.len());
    let record = dir.finish(
        "timing_sweep",
        cfg,
        json!({ "points": points.len() }),
        failures,
    )?;
    println!("wrote {}", record.display());
    Ok(outcome)
}

/// Rejects configurations whose model cannot be built at all.
pub fn check(cfg: &ExperimentConfig) -> Result<()> {
    if let Err(e) = cfg.validate() {
        bail!("invalid configuration: {e:#}");
    }
    Ok(())
}
