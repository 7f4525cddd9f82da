//! The computation behind each subcommand.

use nmgeo::dynamics::{
    closed_form_density, evolve_master_equation, expectations_sigma, f_z_from_g, non_markovianity_nt,
    qfi_theta, trace_distance, StateConvention,
};
use nmgeo::geomphase::{divergence_report, geometric_phase};
use nmgeo::gfunction::{cubic_roots, find_g_roots, markov_root_times, GSamples, GSolution};
use nmgeo::phasediagram::{blue_boundary, green_boundary, sweep, tangency_boundary, Region, SweepRow, JOIN_GAMMA};
use nmgeo::qsd::ensemble_density;
use nmgeo::{initial_state, DensityMatrix2, Grid, Result};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::output::{BoundaryRow, SeriesTable};

pub enum Output {
    Series(Box<SeriesTable>),
    Sweep(Vec<SweepRow>),
    Boundaries(Vec<BoundaryRow>),
}

/// Runs the configured command. The JSON value lands in the manifest.
pub fn execute(cfg: &RunConfig) -> Result<(Output, Value)> {
    match cfg.command {
        Command::Gfun => gfun(cfg),
        Command::Phase => phase(cfg),
        Command::Dynamics => dynamics(cfg),
        Command::Nonmarkov => nonmarkov(cfg),
        Command::Qfi => qfi(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Boundaries => boundaries(cfg),
        Command::MarkovLimit => markov_limit(cfg),
        Command::Qsd => qsd(cfg),
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::span(cfg.t_max, cfg.dt)
}

fn g_table(sol: &GSolution, grid: &Grid) -> SeriesTable {
    let s = GSamples::from_solution(sol, grid);
    let mut table = SeriesTable::new(grid.times().collect());
    table.g = Some(s.g);
    table.gp = Some(s.gp);
    table
}

fn with_f_z(mut table: SeriesTable, sol: &GSolution, grid: &Grid) -> SeriesTable {
    table.f_z = Some(f_z_from_g(sol, grid).f_z);
    table
}

fn gfun(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let roots: Vec<[f64; 2]> = cubic_roots(&cfg.params)?.iter().map(|x| [x.re, x.im]).collect();
    let info = json!({
        "method": format!("{:?}", sol.method()),
        "characteristic_roots": roots,
        "g_roots": find_g_roots(&sol, cfg.t_max),
    });
    Ok((Output::Series(Box::new(g_table(&sol, &grid))), info))
}

fn phase(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let series = geometric_phase(&sol, cfg.theta, &grid)?;
    let report = divergence_report(&sol, cfg.theta, cfg.t_max)?;
    let mut table = with_f_z(g_table(&sol, &grid), &sol, &grid);
    table.beta_i_clamped = Some(series.beta_i_clamped());
    table.beta = Some(series.beta.clone());
    table.pole = Some(series.pole.clone());
    let info = json!({
        "divergence_times": series.divergence_times,
        "divergence_checks": report,
        "consistency_error": series.consistency_error,
        "eta_branch": series.eta_branch,
    });
    Ok((Output::Series(Box::new(table)), info))
}

fn dynamics(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let coeffs = f_z_from_g(&sol, &grid);
    let rho0 = initial_state(cfg.theta)?.outer();
    let evolved = evolve_master_equation(&cfg.params, &rho0, &coeffs)?;
    let sigma = expectations_sigma(&evolved);

    // Equatorial antipodal pair: its distance is the optimum |g(t)|.
    let plus = DensityMatrix2::from_bloch(1.0, 0.0, 0.0);
    let minus = DensityMatrix2::from_bloch(-1.0, 0.0, 0.0);
    let mut distance = Vec::with_capacity(grid.len());
    let mut trace_error: f64 = 0.0;
    let mut closed_form_error: f64 = 0.0;
    for (k, t) in grid.times().enumerate() {
        let g = C64::new(sol.g(t), 0.0);
        let a = closed_form_density(&cfg.params, &plus, g, t);
        let b = closed_form_density(&cfg.params, &minus, g, t);
        distance.push(trace_distance(&a, &b));
        trace_error = trace_error.max((evolved.states[k].trace() - 1.0).norm());
        let exact = closed_form_density(&cfg.params, &rho0, g, t);
        closed_form_error = closed_form_error.max(evolved.states[k].max_abs_diff(&exact));
    }

    let mut table = with_f_z(g_table(&sol, &grid), &sol, &grid);
    table.sx = Some(sigma.x);
    table.sy = Some(sigma.y);
    table.sz = Some(sigma.z);
    table.d = Some(distance);
    let info = json!({
        "min_eigenvalue": evolved.min_eigenvalue,
        "max_trace_error": trace_error,
        "max_closed_form_error": closed_form_error,
    });
    Ok((Output::Series(Box::new(table)), info))
}

fn nonmarkov(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let report = non_markovianity_nt(&sol, &grid);
    let mut table = with_f_z(g_table(&sol, &grid), &sol, &grid);
    table.n_t = Some(report.n_t.clone());
    let info = json!({ "N_total": report.total, "backflow_windows": report.windows });
    Ok((Output::Series(Box::new(table)), info))
}

fn qfi(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let convention: StateConvention = cfg.convention.into();
    let values: Vec<f64> = grid.times().map(|t| qfi_theta(&sol, cfg.theta, t, convention)).collect();
    let mut growing = Vec::new();
    let mut open: Option<usize> = None;
    for k in 1..values.len() {
        if values[k] > values[k - 1] {
            open.get_or_insert(k - 1);
        } else if let Some(s) = open.take() {
            growing.push((grid.t(s), grid.t(k - 1)));
        }
    }
    if let Some(s) = open {
        growing.push((grid.t(s), grid.t_end()));
    }
    let mut table = with_f_z(g_table(&sol, &grid), &sol, &grid);
    table.qfi = Some(values);
    let info = json!({ "convention": format!("{convention:?}"), "growth_windows": growing });
    Ok((Output::Series(Box::new(table)), info))
}

fn run_sweep(cfg: &RunConfig) -> Result<(Output, Value)> {
    let rows = sweep(&cfg.sweep)?;
    let count = |r: Region| rows.iter().filter(|x| x.cell.as_ref().is_ok_and(|c| c.region == r)).count();
    let info = json!({
        "cells": rows.len(),
        "markov": count(Region::Markov),
        "non_markov_divergent": count(Region::NonMarkovDivergent),
        "non_markov_non_divergent": count(Region::NonMarkovNonDivergent),
        "errors": rows.iter().filter(|x| x.cell.is_err()).count(),
    });
    Ok((Output::Sweep(rows), info))
}

fn boundaries(cfg: &RunConfig) -> Result<(Output, Value)> {
    let gammas = cfg.sweep.gamma_w.values();
    let rows: Vec<BoundaryRow> = gammas
        .par_iter()
        .map(|&gamma_w| {
            let tangency = (gamma_w < JOIN_GAMMA).then(|| tangency_boundary(gamma_w).ok()).flatten();
            BoundaryRow {
                gamma_w,
                green: (gamma_w <= JOIN_GAMMA).then(|| green_boundary(gamma_w).ok()).flatten(),
                blue: blue_boundary(gamma_w).ok(),
                tangency_kappa: tangency.map(|t| t.kappa),
                tangency_t: tangency.map(|t| t.t),
            }
        })
        .collect();
    let missing: Vec<f64> = rows
        .iter()
        .filter(|r| r.gamma_w < JOIN_GAMMA && r.tangency_kappa.is_none())
        .map(|r| r.gamma_w)
        .collect();
    let info = json!({ "points": rows.len(), "tangency_not_converged": missing });
    Ok((Output::Boundaries(rows), info))
}

fn markov_limit(cfg: &RunConfig) -> Result<(Output, Value)> {
    let sol = GSolution::new(cfg.params)?;
    let grid = grid(cfg)?;
    let numeric = find_g_roots(&sol, cfg.t_max);
    let closed_form: Option<Vec<f64>> = (cfg.params.bath_coupling == 1.0 && cfg.params.kappa > 0.25).then(|| {
        let delta = cfg.params.kappa - 0.25;
        // Enough branches to cover the window: spacing per family is ≥ 2√2π/s.
        let s = (delta * (2.0 * delta + 1.0)).sqrt();
        let n_max = (cfg.t_max * s / (2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI)).ceil() as usize + 1;
        markov_root_times(delta, n_max).into_iter().filter(|&t| t <= cfg.t_max).collect()
    });
    let info = json!({ "g_roots": numeric, "closed_form_roots": closed_form });
    Ok((Output::Series(Box::new(g_table(&sol, &grid))), info))
}

fn qsd(cfg: &RunConfig) -> Result<(Output, Value)> {
    let grid = grid(cfg)?;
    let ens = ensemble_density(&cfg.params, cfg.theta, &grid, cfg.n_traj, cfg.seed)?;
    let mut table = SeriesTable::new(grid.times().collect());
    let bloch: Vec<[f64; 3]> = ens.mean.iter().map(|r| r.bloch()).collect();
    table.sx = Some(bloch.iter().map(|b| b[0]).collect());
    table.sy = Some(bloch.iter().map(|b| b[1]).collect());
    table.sz = Some(bloch.iter().map(|b| b[2]).collect());

    let mut max_dev: f64 = 0.0;
    if cfg.params.is_resonant() {
        let sol = GSolution::new(cfg.params)?;
        let rho0 = initial_state(cfg.theta)?.outer();
        table.g = Some(grid.times().map(|t| sol.g(t)).collect());
        for (k, t) in grid.times().enumerate() {
            let exact = closed_form_density(&cfg.params, &rho0, C64::new(sol.g(t), 0.0), t);
            max_dev = max_dev.max(ens.mean[k].max_abs_diff(&exact));
        }
    }
    let max_stderr = ens.stderr.iter().flatten().copied().fold(0.0, f64::max);
    let info = json!({
        "n_trajectories": ens.n_trajectories,
        "max_deviation_from_master_equation": cfg.params.is_resonant().then_some(max_dev),
        "max_stderr": max_stderr,
        "final_mean_norm_sqr": ens.mean_norm_sqr.last(),
    });
    Ok((Output::Series(Box::new(table)), info))
}
