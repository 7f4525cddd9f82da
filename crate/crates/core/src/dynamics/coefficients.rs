//! O-operator coefficients F_z(t), F_w(t) of the exact ansatz Ō = F(t) σ⁻.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunction::GSolution;
use crate::model::{Grid, ModelParams};
use crate::ode::Dopri5;

/// |g| below which F_z = −g'/(κg) is treated as a pole.
pub const POLE_G_TOL: f64 = 1e-12;

/// |F_z| at which the coupled-ODE route declares that it reached a pole.
pub const POLE_BLOWUP: f64 = 1e8;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientSource {
    FromG,
    FromOdeOracle,
}

/// F_z (and optionally F_w) on a grid, together with the g(t) they imply.
///
/// Pole samples hold `None`. On the ODE route everything after `pole` is
/// unknown: the coefficient samples are `None` and `g` is NaN.
#[derive(Clone, Debug)]
pub struct OCoefficients {
    pub grid: Grid,
    pub kappa: f64,
    pub f_z: Vec<Option<C64>>,
    pub f_w: Option<Vec<Option<C64>>>,
    pub g: Vec<C64>,
    pub source: CoefficientSource,
    pub pole: Option<f64>,
}

impl OCoefficients {
    /// Index of the last sample the series actually covers.
    pub fn last_valid(&self) -> usize {
        self.g.iter().rposition(|g| g.re.is_finite() && g.im.is_finite()).unwrap_or(0)
    }
}

/// F_z = −g'/(κg) at one instant; `None` at a zero of g. Zero for κ = 0.
pub fn f_z_at(sol: &GSolution, t: f64) -> Option<C64> {
    let kappa = sol.params().kappa;
    if kappa == 0.0 {
        return Some(C64::new(0.0, 0.0));
    }
    let v = sol.eval(t);
    (v.g.abs() >= POLE_G_TOL).then(|| C64::new(-v.gp / (kappa * v.g), 0.0))
}

/// F_w = i[F_z' − κ − κF_z²] = −i(g'' + κ²g)/(κg) at one instant.
pub fn f_w_at(sol: &GSolution, t: f64) -> Option<C64> {
    let kappa = sol.params().kappa;
    if kappa == 0.0 {
        return Some(C64::new(0.0, 0.0));
    }
    let v = sol.eval(t);
    (v.g.abs() >= POLE_G_TOL).then(|| -I * ((v.gpp + kappa * kappa * v.g) / (kappa * v.g)))
}

/// F_z on a grid from the analytic g.
pub fn f_z_from_g(sol: &GSolution, grid: &Grid) -> OCoefficients {
    let f_z = grid.times().map(|t| f_z_at(sol, t)).collect();
    let g = grid.times().map(|t| C64::new(sol.g(t), 0.0)).collect();
    OCoefficients {
        grid: *grid,
        kappa: sol.params().kappa,
        f_z,
        f_w: None,
        g,
        source: CoefficientSource::FromG,
        pole: None,
    }
}

/// F_z and F_w on a grid from the analytic g (F_w from g'' directly).
pub fn coefficients_from_g(sol: &GSolution, grid: &Grid) -> OCoefficients {
    let mut c = f_z_from_g(sol, grid);
    c.f_w = Some(grid.times().map(|t| f_w_at(sol, t)).collect());
    c
}

/// F_w = i[F_z' − κ − κF_z²] with F_z' from a five-point stencil (one-sided
/// near the ends). Samples whose stencil touches a pole are `None`.
pub fn f_w_from_f_z(f_z: &[Option<C64>], grid: &Grid, kappa: f64) -> Vec<Option<C64>> {
    let n = f_z.len();
    let h = grid.dt;
    let deriv = |k: usize| -> Option<C64> {
        let at = |j: usize| f_z.get(j).copied().flatten();
        if n < 5 {
            return None;
        }
        if k >= 2 && k + 2 < n {
            Some((at(k - 2)? - at(k - 1)? * 8.0 + at(k + 1)? * 8.0 - at(k + 2)?) / (12.0 * h))
        } else if k < 2 {
            // Forward 4th-order stencil.
            let s = k;
            Some(
                (at(s)? * -25.0 + at(s + 1)? * 48.0 - at(s + 2)? * 36.0 + at(s + 3)? * 16.0
                    - at(s + 4)? * 3.0)
                    / (12.0 * h),
            )
        } else {
            let s = k;
            Some(
                (at(s)? * 25.0 - at(s - 1)? * 48.0 + at(s - 2)? * 36.0 - at(s - 3)? * 16.0
                    + at(s - 4)? * 3.0)
                    / (12.0 * h),
            )
        }
    };
    (0..n)
        .map(|k| {
            let fz = f_z[k]?;
            let d = deriv(k)?;
            Some(I * (d - kappa - kappa * fz * fz))
        })
        .collect()
}

/// Integrates the coupled equations
///
/// ```text
/// F_z' = κ − iF_w + i(ω − ω_c)F_z + κF_z²
/// F_w' = −i(γ_wΓ_w/2)F_z − (γ_w + iΩ_w)F_w + (iω + κF_z)F_w
/// ```
///
/// from F_z(0) = F_w(0) = 0, along with g' = −κF_z g. Detuning is allowed.
/// Reaching |F_z| > [`POLE_BLOWUP`] ends the run and records `pole`.
pub fn f_ode_oracle(p: &ModelParams, grid: &Grid) -> Result<OCoefficients> {
    let p = p.validate()?;
    if p.is_markov_limit() {
        return Err(Error::InvalidInput("coupled F_z/F_w equations need a finite gamma_w".into()));
    }
    let kappa = p.kappa;
    let detuning = p.omega - p.omega_c;
    let alpha_w0 = p.alpha_w0();
    let gamma_eff = C64::new(p.gamma_w, p.omega_w);
    let omega = p.omega;
    let rhs = move |_t: f64, y: &[C64; 3]| {
        let (fz, fw, g) = (y[0], y[1], y[2]);
        [
            kappa - I * fw + I * detuning * fz + kappa * fz * fz,
            -I * alpha_w0 * fz - gamma_eff * fw + (I * omega + kappa * fz) * fw,
            -kappa * fz * g,
        ]
    };
    let zero = C64::new(0.0, 0.0);
    let run = Dopri5::with_tolerances(1e-12, 1e-14).integrate(
        rhs,
        [zero, zero, C64::new(1.0, 0.0)],
        grid,
        |_, y| y[0].norm() > POLE_BLOWUP,
    )?;

    let n = grid.len();
    let mut f_z = Vec::with_capacity(n);
    let mut f_w = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for s in &run.samples {
        f_z.push(Some(s[0]));
        f_w.push(Some(s[1]));
        g.push(s[2]);
    }
    let nan = C64::new(f64::NAN, f64::NAN);
    f_z.resize(n, None);
    f_w.resize(n, None);
    g.resize(n, nan);
    Ok(OCoefficients {
        grid: *grid,
        kappa,
        f_z,
        f_w: Some(f_w),
        g,
        source: CoefficientSource::FromOdeOracle,
        pole: run.stopped_at.map(|(t, _)| t),
    })
}
