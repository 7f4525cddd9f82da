//! Time-local master equation of the qubit,
//!
//! ```text
//! ∂ρ = −i[H_s + κF_{z,I} σ⁺σ⁻, ρ] + 2κF_{z,R} D[σ⁻]ρ,   D[L]ρ = LρL† − ½{L†L, ρ}
//! ```
//!
//! All generators at different times commute (each one is a combination of
//! D[σ⁻] and commutators with σ_z), so the propagator between two times
//! depends only on the ratio of g values: with r = g(t₂)/g(t₁),
//! ρ_ee → |r|² ρ_ee, ρ_eg → r e^{−iω(t₂−t₁)} ρ_eg. Stepping with these ratios
//! never touches F_z, which is what keeps the zeros of g (poles of F_z)
//! harmless.

use num_complex::Complex64 as C64;

use super::coefficients::OCoefficients;
use crate::error::{Error, Result};
use crate::model::{DensityMatrix2, Grid, ModelParams};

/// Eigenvalue floor below which evolution reports a positivity failure.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// |g| treated as zero when choosing a propagator anchor.
const ANCHOR_TOL: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct DensitySeries {
    pub grid: Grid,
    pub states: Vec<DensityMatrix2>,
    /// Smallest eigenvalue seen along the run.
    pub min_eigenvalue: f64,
}

fn apply_ratio(rho: &DensityMatrix2, r: C64, phase: f64) -> DensityMatrix2 {
    let shrink = r.norm_sqr();
    let ee = rho.ee * shrink;
    let eg = rho.eg * r * C64::from_polar(1.0, -phase);
    DensityMatrix2 { ee, eg, ge: eg.conj(), gg: rho.gg + rho.ee * (1.0 - shrink) }
}

/// ρ(t) = Φ_t(ρ0) given g(t): the exact map of this model.
pub fn closed_form_density(p: &ModelParams, rho0: &DensityMatrix2, g: C64, t: f64) -> DensityMatrix2 {
    apply_ratio(rho0, g, p.omega * t)
}

/// Propagates ρ0 across the grid of `coeffs` step by step from g increments.
pub fn evolve_master_equation(
    p: &ModelParams,
    rho0: &DensityMatrix2,
    coeffs: &OCoefficients,
) -> Result<DensitySeries> {
    let grid = coeffs.grid;
    if let Some(t) = coeffs.pole {
        if coeffs.last_valid() + 1 < grid.len() {
            return Err(Error::PoleInWindow(t));
        }
    }
    let mut states = Vec::with_capacity(grid.len());
    let start = DensityMatrix2 { ge: rho0.eg.conj(), ..*rho0 };
    states.push(start);
    let mut min_eig = start.eigenvalues()[0];
    let mut anchor = 0usize;
    for k in 1..grid.len() {
        let g_now = coeffs.g[k];
        if !(g_now.re.is_finite() && g_now.im.is_finite()) {
            return Err(Error::IntegrationFailure { t: grid.t(k), reason: "g sample is not finite".into() });
        }
        let g_anchor = coeffs.g[anchor];
        let r = g_now / g_anchor;
        let next = apply_ratio(&states[anchor], r, p.omega * (grid.t(k) - grid.t(anchor)));
        let low = next.eigenvalues()[0];
        if low < -POSITIVITY_TOL {
            return Err(Error::PositivityLost { t: grid.t(k), min_eigenvalue: low });
        }
        min_eig = min_eig.min(low);
        states.push(next);
        if g_now.norm() > ANCHOR_TOL {
            anchor = k;
        }
    }
    Ok(DensitySeries { grid, states, min_eigenvalue: min_eig })
}

type M2 = [[C64; 2]; 2];

fn to_m2(r: &DensityMatrix2) -> M2 {
    [[r.ee, r.eg], [r.ge, r.gg]]
}

fn from_m2(m: &M2) -> DensityMatrix2 {
    DensityMatrix2 { ee: m[0][0], eg: m[0][1], ge: m[1][0], gg: m[1][1] }
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Right-hand side of the Lindblad-form master equation for a given F_z.
pub fn lindblad_rhs(p: &ModelParams, rho: &DensityMatrix2, f_z: C64) -> DensityMatrix2 {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let h: M2 = [
        [C64::new(0.5 * p.omega + p.kappa * f_z.im, 0.0), zero],
        [zero, C64::new(-0.5 * p.omega, 0.0)],
    ];
    let lower: M2 = [[zero, zero], [one, zero]];
    let raise: M2 = [[zero, one], [zero, zero]];
    let number = mul(&raise, &lower);
    let r = to_m2(rho);
    let rate = 2.0 * p.kappa * f_z.re;
    let hr = mul(&h, &r);
    let rh = mul(&r, &h);
    let jump = mul(&mul(&lower, &r), &raise);
    let nr = mul(&number, &r);
    let rn = mul(&r, &number);
    let mut out = [[zero; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = -i * (hr[a][b] - rh[a][b]) + rate * (jump[a][b] - 0.5 * (nr[a][b] + rn[a][b]));
        }
    }
    from_m2(&out)
}

fn axpy(a: &DensityMatrix2, h: f64, k: &DensityMatrix2) -> DensityMatrix2 {
    DensityMatrix2 { ee: a.ee + k.ee * h, eg: a.eg + k.eg * h, ge: a.ge + k.ge * h, gg: a.gg + k.gg * h }
}

/// Classical RK4 integration of [`lindblad_rhs`] with `substeps` steps per
/// grid interval and F_z supplied as a function of time. Fails if F_z is not
/// finite anywhere it is sampled (i.e. the run crosses a pole).
pub fn integrate_lindblad<F>(
    p: &ModelParams,
    rho0: &DensityMatrix2,
    grid: &Grid,
    substeps: usize,
    f_z: F,
) -> Result<DensitySeries>
where
    F: Fn(f64) -> Option<C64>,
{
    let substeps = substeps.max(1);
    let h = grid.dt / substeps as f64;
    let rate = |t: f64| -> Result<C64> {
        match f_z(t) {
            Some(v) if v.re.is_finite() && v.im.is_finite() => Ok(v),
            _ => Err(Error::IntegrationFailure { t, reason: "F_z is singular".into() }),
        }
    };
    let mut rho = *rho0;
    let mut states = vec![rho];
    let mut min_eig = rho.eigenvalues()[0];
    for k in 0..grid.n_steps {
        for s in 0..substeps {
            let t = grid.t(k) + s as f64 * h;
            let k1 = lindblad_rhs(p, &rho, rate(t)?);
            let k2 = lindblad_rhs(p, &axpy(&rho, 0.5 * h, &k1), rate(t + 0.5 * h)?);
            let k3 = lindblad_rhs(p, &axpy(&rho, 0.5 * h, &k2), rate(t + 0.5 * h)?);
            let k4 = lindblad_rhs(p, &axpy(&rho, h, &k3), rate(t + h)?);
            rho = DensityMatrix2 {
                ee: rho.ee + (k1.ee + 2.0 * k2.ee + 2.0 * k3.ee + k4.ee) * (h / 6.0),
                eg: rho.eg + (k1.eg + 2.0 * k2.eg + 2.0 * k3.eg + k4.eg) * (h / 6.0),
                ge: rho.ge + (k1.ge + 2.0 * k2.ge + 2.0 * k3.ge + k4.ge) * (h / 6.0),
                gg: rho.gg + (k1.gg + 2.0 * k2.gg + 2.0 * k3.gg + k4.gg) * (h / 6.0),
            };
        }
        min_eig = min_eig.min(rho.eigenvalues()[0]);
        states.push(rho);
    }
    Ok(DensitySeries { grid: *grid, states, min_eigenvalue: min_eig })
}

/// ⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩ along a density series.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn expectations_sigma(series: &DensitySeries) -> SigmaSeries {
    let mut out = SigmaSeries {
        x: Vec::with_capacity(series.states.len()),
        y: Vec::with_capacity(series.states.len()),
        z: Vec::with_capacity(series.states.len()),
    };
    for rho in &series.states {
        let [x, y, z] = rho.bloch();
        out.x.push(x);
        out.y.push(y);
        out.z.push(z);
    }
    out
}

/// D(ρ₁, ρ₂) = ½ Tr|ρ₁ − ρ₂|.
pub fn trace_distance(a: &DensityMatrix2, b: &DensityMatrix2) -> f64 {
    let diff = DensityMatrix2 { ee: a.ee - b.ee, eg: a.eg - b.eg, ge: a.ge - b.ge, gg: a.gg - b.gg };
    let [l0, l1] = diff.eigenvalues();
    0.5 * (l0.abs() + l1.abs())
}
