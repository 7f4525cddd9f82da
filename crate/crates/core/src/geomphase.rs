//! Complex geometric phase of the ensemble-averaged evolution.
//!
//! With c = cosθ and
//!
//! ```text
//! η = [g(1+c) + (1−c)e^{iωt}] / [g(1−c) + (1+c)e^{iωt}]
//! φ_T = −(i/2) log g − (i/2) log η
//! φ_d = −½ωt c − (i/2)(c+1) log g
//! β   = φ_T − φ_d = ½[c(ωt + i log g) − i log η]
//! ```
//!
//! `log g` is real for g > 0 and takes +iπ for g < 0, so it jumps whenever g
//! changes sign. `log η` is followed continuously along the grid: η stays
//! finite at zeros of g, so only its winding needs tracking.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::POLE_G_TOL;
use crate::error::{Error, Result};
use crate::gfunction::{find_g_roots, GSolution};
use crate::model::Grid;

/// Plotting clamp for β_I.
pub const BETA_I_CLAMP: f64 = 50.0;

/// Offsets used to probe the growth of |β_I| next to a zero of g.
pub const DIVERGENCE_EPSILONS: [f64; 3] = [1e-3, 1e-5, 1e-7];

/// Phases along a grid. Pole samples (|g| < 1e-12) hold NaN in the complex
/// channels and `true` in `pole`.
#[derive(Clone, Debug)]
pub struct PhaseSeries {
    pub grid: Grid,
    pub theta: f64,
    pub total: Vec<C64>,
    pub dynamical: Vec<C64>,
    /// φ_T − φ_d.
    pub beta: Vec<C64>,
    pub beta_i: Vec<f64>,
    pub pole: Vec<bool>,
    pub divergence_times: Vec<f64>,
    /// Net winding of log η in units of 2πi at the last sample.
    pub eta_branch: i64,
    /// max |β_direct − (φ_T − φ_d)| over samples at least 1e-3 from a root.
    pub consistency_error: f64,
}

impl PhaseSeries {
    /// β_I with poles and large values clamped to ±[`BETA_I_CLAMP`].
    pub fn beta_i_clamped(&self) -> Vec<f64> {
        let c = self.theta.cos();
        self.beta_i
            .iter()
            .zip(&self.pole)
            .map(|(&b, &pole)| {
                if pole {
                    // ln|g| → −∞ dominates β_I = ½[c ln|g| − ln|η|].
                    -BETA_I_CLAMP * c.signum()
                } else {
                    b.clamp(-BETA_I_CLAMP, BETA_I_CLAMP)
                }
            })
            .collect()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) || !theta.is_finite() {
        return Err(Error::OutOfRangeAngle(theta));
    }
    Ok(())
}

/// True when cosθ = ±1 up to rounding, so that β cancels identically.
fn is_pole_state(theta: f64) -> bool {
    theta == 0.0 || theta == PI
}

fn log_g(g: f64) -> C64 {
    if g > 0.0 {
        C64::new(g.ln(), 0.0)
    } else {
        C64::new((-g).ln(), PI)
    }
}

fn eta(g: f64, c: f64, wt: f64) -> C64 {
    let rot = C64::from_polar(1.0, wt);
    (g * (1.0 + c) + (1.0 - c) * rot) / (g * (1.0 - c) + (1.0 + c) * rot)
}

/// Im β = ½[c ln|g| − ln|η|], independent of any branch choice.
pub fn beta_i_at(sol: &GSolution, theta: f64, t: f64) -> f64 {
    if is_pole_state(theta) {
        return 0.0;
    }
    let c = theta.cos();
    let g = sol.g(t);
    0.5 * (c * g.abs().ln() - eta(g, c, sol.params().omega * t).norm().ln())
}

/// Continuous log η along the samples, starting from log η(0) = 0.
fn unwrapped_log_eta(g: &[f64], c: f64, times: &[f64], omega: f64) -> (Vec<C64>, i64) {
    let mut out = Vec::with_capacity(g.len());
    let mut branch = 0i64;
    let mut prev_arg: Option<f64> = None;
    for (&gk, &t) in g.iter().zip(times) {
        let e = eta(gk, c, omega * t);
        let arg = e.arg();
        if let Some(pa) = prev_arg {
            let d = arg - pa;
            if d > PI {
                branch -= 1;
            } else if d < -PI {
                branch += 1;
            }
        }
        prev_arg = Some(arg);
        out.push(C64::new(e.norm().ln(), arg + 2.0 * PI * branch as f64));
    }
    (out, branch)
}

/// φ_T on a grid given samples of g.
pub fn total_phase(sol: &GSolution, theta: f64, g: &[f64], grid: &Grid) -> Result<Vec<C64>> {
    Ok(phases(sol, theta, g, grid)?.0)
}

/// φ_d on a grid given samples of g.
pub fn dynamical_phase(sol: &GSolution, theta: f64, g: &[f64], grid: &Grid) -> Result<Vec<C64>> {
    Ok(phases(sol, theta, g, grid)?.1)
}

type PhaseParts = (Vec<C64>, Vec<C64>, Vec<C64>, i64);

/// (φ_T, φ_d, β from the direct formula, η winding).
fn phases(sol: &GSolution, theta: f64, g: &[f64], grid: &Grid) -> Result<PhaseParts> {
    check_theta(theta)?;
    if g.len() != grid.len() {
        return Err(Error::InvalidGrid(format!("{} g samples for {} grid points", g.len(), grid.len())));
    }
    let omega = sol.params().omega;
    let c = theta.cos();
    let times: Vec<f64> = grid.times().collect();
    let nan = C64::new(f64::NAN, f64::NAN);
    let i = C64::new(0.0, 1.0);

    let dynamical: Vec<C64> = g
        .iter()
        .zip(&times)
        .map(|(&gk, &t)| {
            if theta == PI {
                return C64::new(0.5 * omega * t, 0.0);
            }
            if gk.abs() < POLE_G_TOL {
                return nan;
            }
            C64::new(-0.5 * omega * t * c, 0.0) - 0.5 * i * (c + 1.0) * log_g(gk)
        })
        .collect();

    if is_pole_state(theta) {
        let zeros = vec![C64::new(0.0, 0.0); g.len()];
        return Ok((dynamical.clone(), dynamical, zeros, 0));
    }

    let (log_eta, branch) = unwrapped_log_eta(g, c, &times, omega);
    let mut total = Vec::with_capacity(g.len());
    let mut direct = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        if g[k].abs() < POLE_G_TOL {
            total.push(nan);
            direct.push(nan);
            continue;
        }
        let lg = log_g(g[k]);
        total.push(-0.5 * i * lg - 0.5 * i * log_eta[k]);
        direct.push(0.5 * (c * (omega * times[k] + i * lg) - i * log_eta[k]));
    }
    Ok((total, dynamical, direct, branch))
}

/// Full phase series on `grid`, with divergence times from the zeros of g up
/// to the end of the grid.
pub fn geometric_phase(sol: &GSolution, theta: f64, grid: &Grid) -> Result<PhaseSeries> {
    let g: Vec<f64> = grid.times().map(|t| sol.g(t)).collect();
    let (total, dynamical, direct, eta_branch) = phases(sol, theta, &g, grid)?;
    let roots = find_g_roots(sol, grid.t_end());
    let beta: Vec<C64> = total.iter().zip(&dynamical).map(|(a, b)| a - b).collect();

    let mut consistency_error: f64 = 0.0;
    for (k, t) in grid.times().enumerate() {
        if roots.iter().any(|r| (r - t).abs() <= 1e-3) || g[k].abs() < POLE_G_TOL {
            continue;
        }
        consistency_error = consistency_error.max((beta[k] - direct[k]).norm());
    }

    let pole: Vec<bool> = g.iter().map(|v| v.abs() < POLE_G_TOL).collect();
    let beta_i = grid
        .times()
        .zip(&pole)
        .map(|(t, &p)| if p { f64::NAN } else { beta_i_at(sol, theta, t) })
        .collect();
    let divergence_times = if is_pole_state(theta) { Vec::new() } else { roots };

    Ok(PhaseSeries {
        grid: *grid,
        theta,
        total,
        dynamical,
        beta,
        beta_i,
        pole,
        divergence_times,
        eta_branch,
        consistency_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCheck {
    pub t_div: f64,
    /// |β_I| at t_div − ε and t_div + ε for each ε in [`DIVERGENCE_EPSILONS`].
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub passed: bool,
}

/// Growth check of |β_I| on both sides of every zero of g in (0, t_max].
pub fn divergence_report(sol: &GSolution, theta: f64, t_max: f64) -> Result<Vec<DivergenceCheck>> {
    check_theta(theta)?;
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
    }
    if is_pole_state(theta) {
        return Ok(Vec::new());
    }
    let strictly_growing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    Ok(find_g_roots(sol, t_max)
        .into_iter()
        .map(|t_div| {
            let left: Vec<f64> =
                DIVERGENCE_EPSILONS.iter().map(|e| beta_i_at(sol, theta, t_div - e).abs()).collect();
            let right: Vec<f64> =
                DIVERGENCE_EPSILONS.iter().map(|e| beta_i_at(sol, theta, t_div + e).abs()).collect();
            let passed = strictly_growing(&left) && strictly_growing(&right);
            DivergenceCheck { t_div, left, right, passed }
        })
        .collect())
}
