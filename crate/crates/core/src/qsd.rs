//! Linear quantum-state diffusion with the cavity noise z_t* and the colored
//! bath noise w_t*, and Monte-Carlo reconstruction of ρ_s.
//!
//! With Ō_z = F_zσ⁻ and Ō_w = F_wσ⁻ the stochastic Schrödinger equation is
//!
//! ```text
//! ∂ψ = [−iH_s + κσ⁻z_t* − κF_zσ⁺σ⁻ − i w_t* F_zσ⁻ − i z_t* F_wσ⁻] ψ
//! ```
//!
//! Each trajectory draws from its own ChaCha20 stream (seed = base seed,
//! stream = trajectory index), so results do not depend on scheduling.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{coefficients_from_g, f_ode_oracle, OCoefficients};
use crate::error::{Error, Result};
use crate::gfunction::{find_g_roots, GSolution};
use crate::model::{initial_state, DensityMatrix2, Grid, ModelParams, PureState2};

/// Trajectories per reduction chunk. Fixed so that summation order never
/// depends on the worker count.
const CHUNK: usize = 256;

pub const MIN_TRAJECTORIES: usize = 100;

const I: C64 = C64::new(0.0, 1.0);

/// One draw of both noises on a grid. `w_star[k]` is held constant on
/// [t_k, t_{k+1}).
#[derive(Clone, Debug)]
pub struct NoiseRealization {
    pub grid: Grid,
    /// The cavity Gaussian z (unit covariance); z_t* = −i z* e^{iω_c t}.
    pub z: C64,
    pub omega_c: f64,
    pub w_star: Vec<C64>,
    pub base_seed: u64,
    pub traj_index: u64,
}

impl NoiseRealization {
    pub fn z_star_at(&self, t: f64) -> C64 {
        -I * self.z.conj() * C64::from_polar(1.0, self.omega_c * t)
    }

    pub fn z_star(&self) -> Vec<C64> {
        self.grid.times().map(|t| self.z_star_at(t)).collect()
    }

    /// Both noises identically zero.
    pub fn zero(p: &ModelParams, grid: &Grid) -> Self {
        Self {
            grid: *grid,
            z: C64::new(0.0, 0.0),
            omega_c: p.omega_c,
            w_star: vec![C64::new(0.0, 0.0); grid.len()],
            base_seed: 0,
            traj_index: 0,
        }
    }
}

fn complex_gaussian(rng: &mut ChaCha20Rng, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

fn stream(base_seed: u64, traj_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(traj_index);
    rng
}

/// Draws z and a stationary Ornstein–Uhlenbeck path w with
/// M[w_t w_s*] = (γ_wΓ_w/2) e^{−γ_w|t−s| − iΩ_w(t−s)}, updated exactly.
pub fn sample_noises(p: &ModelParams, grid: &Grid, base_seed: u64, traj_index: u64) -> Result<NoiseRealization> {
    let p = p.validate()?;
    if p.is_markov_limit() {
        return Err(Error::InvalidInput("bath noise needs a finite gamma_w".into()));
    }
    if p.gamma_w * grid.dt >= 0.1 {
        return Err(Error::InvalidGrid(format!(
            "gamma_w*dt = {} must stay below 0.1",
            p.gamma_w * grid.dt
        )));
    }
    let mut rng = stream(base_seed, traj_index);
    let z = complex_gaussian(&mut rng, 1.0);
    let var = 0.5 * p.gamma_w * p.bath_coupling;
    let decay = (C64::new(-p.gamma_w, -p.omega_w) * grid.dt).exp();
    let step_var = var * (1.0 - (-2.0 * p.gamma_w * grid.dt).exp());
    let mut w = complex_gaussian(&mut rng, var);
    let mut w_star = Vec::with_capacity(grid.len());
    w_star.push(w.conj());
    for _ in 1..grid.len() {
        w = w * decay + complex_gaussian(&mut rng, step_var);
        w_star.push(w.conj());
    }
    Ok(NoiseRealization { grid: *grid, z, omega_c: p.omega_c, w_star, base_seed, traj_index })
}

#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub grid: Grid,
    /// Unnormalized state at every grid point.
    pub states: Vec<PureState2>,
    pub final_norm_sqr: f64,
}

fn rhs(p: &ModelParams, psi: PureState2, fz: C64, fw: C64, z_star: C64, w_star: C64) -> PureState2 {
    let half = 0.5 * p.omega;
    let e = (-I * half - p.kappa * fz) * psi.e;
    let g = I * half * psi.g + (p.kappa * z_star - I * w_star * fz - I * z_star * fw) * psi.e;
    PureState2 { e, g }
}

fn add(a: PureState2, h: f64, k: PureState2) -> PureState2 {
    PureState2 { e: a.e + k.e * h, g: a.g + k.g * h }
}

/// RK4 on the noise grid. `coeffs` must hold F_z and F_w on the noise grid
/// refined by two (so the midpoints are available).
pub fn evolve_trajectory(
    p: &ModelParams,
    psi0: PureState2,
    noises: &NoiseRealization,
    coeffs: &OCoefficients,
) -> Result<TrajectoryState> {
    let grid = noises.grid;
    let fine = grid.refined(2);
    if coeffs.grid.len() != fine.len() || (coeffs.grid.dt - fine.dt).abs() > 1e-12 * fine.dt {
        return Err(Error::InvalidGrid("coefficients must sit on the noise grid refined by 2".into()));
    }
    let f_w = coeffs
        .f_w
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trajectory needs F_w as well as F_z".into()))?;
    let coef = |j: usize| -> Result<(C64, C64)> {
        match (coeffs.f_z[j], f_w[j]) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::PoleInWindow(fine.t(j))),
        }
    };
    let mut psi = psi0;
    let mut states = Vec::with_capacity(grid.len());
    states.push(psi);
    let h = grid.dt;
    for k in 0..grid.n_steps {
        let t = grid.t(k);
        let w = noises.w_star[k];
        let (fz0, fw0) = coef(2 * k)?;
        let (fz1, fw1) = coef(2 * k + 1)?;
        let (fz2, fw2) = coef(2 * k + 2)?;
        let z0 = noises.z_star_at(t);
        let z1 = noises.z_star_at(t + 0.5 * h);
        let z2 = noises.z_star_at(t + h);
        let k1 = rhs(p, psi, fz0, fw0, z0, w);
        let k2 = rhs(p, add(psi, 0.5 * h, k1), fz1, fw1, z1, w);
        let k3 = rhs(p, add(psi, 0.5 * h, k2), fz1, fw1, z1, w);
        let k4 = rhs(p, add(psi, h, k3), fz2, fw2, z2, w);
        psi = PureState2 {
            e: psi.e + (k1.e + 2.0 * k2.e + 2.0 * k3.e + k4.e) * (h / 6.0),
            g: psi.g + (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g) * (h / 6.0),
        };
        states.push(psi);
    }
    Ok(TrajectoryState { grid, final_norm_sqr: psi.norm_sqr(), states })
}

/// F_z, F_w on the refined grid: from g at resonance, otherwise from the
/// coupled equations.
pub fn trajectory_coefficients(p: &ModelParams, grid: &Grid) -> Result<OCoefficients> {
    let fine = grid.refined(2);
    if p.is_resonant() {
        let sol = GSolution::new(*p)?;
        if let Some(&root) = find_g_roots(&sol, grid.t_end()).first() {
            return Err(Error::PoleInWindow(root));
        }
        Ok(coefficients_from_g(&sol, &fine))
    } else {
        let c = f_ode_oracle(p, &fine)?;
        match c.pole {
            Some(t) => Err(Error::PoleInWindow(t)),
            None => Ok(c),
        }
    }
}

/// Sample mean of ψψ† with per-entry standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleDensity {
    pub grid: Grid,
    pub n_trajectories: usize,
    pub mean: Vec<DensityMatrix2>,
    /// Standard error of (ee, eg, ge, gg); for complex entries this is
    /// √((Var Re + Var Im)/N).
    pub stderr: Vec<[f64; 4]>,
    pub mean_norm_sqr: Vec<f64>,
}

#[derive(Clone)]
struct Moments {
    sum: Vec<[C64; 4]>,
    sum_sq: Vec<[f64; 4]>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self { sum: vec![[C64::new(0.0, 0.0); 4]; n], sum_sq: vec![[0.0; 4]; n] }
    }

    fn push(&mut self, states: &[PureState2]) {
        for (k, psi) in states.iter().enumerate() {
            let entries = psi.outer().entries();
            for (i, v) in entries.iter().enumerate() {
                self.sum[k][i] += v;
                self.sum_sq[k][i] += v.norm_sqr();
            }
        }
    }

    fn absorb(&mut self, other: &Moments) {
        for k in 0..self.sum.len() {
            for i in 0..4 {
                self.sum[k][i] += other.sum[k][i];
                self.sum_sq[k][i] += other.sum_sq[k][i];
            }
        }
    }
}

/// Averages `n` trajectories from the initial state cos(θ/2)|e⟩ + sin(θ/2)|g⟩.
pub fn ensemble_density(
    p: &ModelParams,
    theta: f64,
    grid: &Grid,
    n: usize,
    base_seed: u64,
) -> Result<EnsembleDensity> {
    if n < MIN_TRAJECTORIES {
        return Err(Error::InvalidInput(format!("need at least {MIN_TRAJECTORIES} trajectories, got {n}")));
    }
    let p = p.validate()?;
    let psi0 = initial_state(theta)?;
    let coeffs = trajectory_coefficients(&p, grid)?;
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let partial: Vec<Result<Moments>> = chunks
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut m = Moments::new(grid.len());
            for j in lo..hi {
                let noise = sample_noises(&p, grid, base_seed, j as u64)?;
                m.push(&evolve_trajectory(&p, psi0, &noise, &coeffs)?.states);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(grid.len());
    for m in partial {
        total.absorb(&m?);
    }

    let nf = n as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut mean_norm_sqr = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let mu: Vec<C64> = total.sum[k].iter().map(|s| s / nf).collect();
        let mut se = [0.0; 4];
        for i in 0..4 {
            let var = ((total.sum_sq[k][i] - nf * mu[i].norm_sqr()) / (nf - 1.0)).max(0.0);
            se[i] = (var / nf).sqrt();
        }
        let rho = DensityMatrix2 { ee: mu[0], eg: mu[1], ge: mu[2], gg: mu[3] };
        mean_norm_sqr.push(rho.trace().re);
        mean.push(rho);
        stderr.push(se);
    }
    Ok(EnsembleDensity { grid: *grid, n_trajectories: n, mean, stderr, mean_norm_sqr })
}
