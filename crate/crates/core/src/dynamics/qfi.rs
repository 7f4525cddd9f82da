//! Quantum Fisher information of the evolved family ρ(t; θ).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::master::closed_form_density;
use crate::gfunction::GSolution;
use crate::model::DensityMatrix2;

/// Sums over eigenpairs with p_i + p_j at or below this are dropped.
pub const QFI_EIGEN_FLOOR: f64 = 1e-12;

/// Step for the central-difference fallback.
pub const QFI_FD_STEP: f64 = 1e-5;

/// How θ parametrises the initial pure state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateConvention {
    /// cos(θ/2)|e⟩ + sin(θ/2)|g⟩.
    Bloch,
    /// cosθ|g⟩ + sinθ|e⟩.
    #[default]
    QfiParameter,
}

impl StateConvention {
    /// Amplitudes (c_e, c_g) and their θ-derivatives.
    fn amplitudes(self, theta: f64) -> ((f64, f64), (f64, f64)) {
        match self {
            Self::Bloch => {
                let (s, c) = (0.5 * theta).sin_cos();
                ((c, s), (-0.5 * s, 0.5 * c))
            }
            Self::QfiParameter => {
                let (s, c) = theta.sin_cos();
                ((s, c), (c, -s))
            }
        }
    }
}

/// ρ(t; θ) for the resonant closed form.
pub fn evolved_family(sol: &GSolution, theta: f64, t: f64, convention: StateConvention) -> DensityMatrix2 {
    let ((ce, cg), _) = convention.amplitudes(theta);
    let rho0 = DensityMatrix2 {
        ee: C64::new(ce * ce, 0.0),
        eg: C64::new(ce * cg, 0.0),
        ge: C64::new(ce * cg, 0.0),
        gg: C64::new(cg * cg, 0.0),
    };
    closed_form_density(sol.params(), &rho0, C64::new(sol.g(t), 0.0), t)
}

/// ∂ρ(t; θ)/∂θ from the closed form.
pub fn evolved_family_derivative(
    sol: &GSolution,
    theta: f64,
    t: f64,
    convention: StateConvention,
) -> DensityMatrix2 {
    let ((ce, cg), (dce, dcg)) = convention.amplitudes(theta);
    let g = sol.g(t);
    let d_ee = 2.0 * ce * dce * g * g;
    let d_eg = C64::from_polar((dce * cg + ce * dcg) * g, -sol.params().omega * t);
    DensityMatrix2 { ee: C64::new(d_ee, 0.0), eg: d_eg, ge: d_eg.conj(), gg: C64::new(-d_ee, 0.0) }
}

/// Eigenpairs of a Hermitian 2×2 matrix, ascending.
fn eigh(rho: &DensityMatrix2) -> [(f64, [C64; 2]); 2] {
    let a = rho.ee.re;
    let d = rho.gg.re;
    let b = rho.eg;
    let mean = 0.5 * (a + d);
    let half = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    // The eigenvalue of smaller magnitude comes from det/λ rather than from
    // mean ∓ half, which would cancel to a few digits for nearly pure states.
    let det = a * d - b.norm_sqr();
    let (lo, hi) = if mean >= 0.0 {
        let hi = mean + half;
        (if hi > 0.0 { det / hi } else { mean - half }, hi)
    } else {
        let lo = mean - half;
        (lo, det / lo)
    };
    if b.norm() <= 1e-300 {
        let e = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let g = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        return if a <= d { [(a, e), (d, g)] } else { [(d, g), (a, e)] };
    }
    let vec_for = |lam: f64| {
        // Rows of (ρ − λ) give two candidate null vectors; take the better conditioned.
        let v1 = [b, C64::new(lam - a, 0.0)];
        let v2 = [C64::new(lam - d, 0.0), b.conj()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        let s = n.sqrt();
        [v[0] / s, v[1] / s]
    };
    [(lo, vec_for(lo)), (hi, vec_for(hi))]
}

/// F = Σ_{p_i+p_j > floor} 2|⟨i|∂ρ|j⟩|² / (p_i + p_j).
pub fn qfi_from_derivative(rho: &DensityMatrix2, d_rho: &DensityMatrix2) -> f64 {
    let pairs = eigh(rho);
    let m = [[d_rho.ee, d_rho.eg], [d_rho.ge, d_rho.gg]];
    let mut f = 0.0;
    for (pi, vi) in &pairs {
        for (pj, vj) in &pairs {
            let denom = pi + pj;
            if denom <= QFI_EIGEN_FLOOR {
                continue;
            }
            let mut elem = C64::new(0.0, 0.0);
            for r in 0..2 {
                for c in 0..2 {
                    elem += vi[r].conj() * m[r][c] * vj[c];
                }
            }
            f += 2.0 * elem.norm_sqr() / denom;
        }
    }
    f
}

/// F_θ(t) with the analytic θ-derivative.
pub fn qfi_theta(sol: &GSolution, theta: f64, t: f64, convention: StateConvention) -> f64 {
    let rho = evolved_family(sol, theta, t, convention);
    qfi_from_derivative(&rho, &evolved_family_derivative(sol, theta, t, convention))
}

/// F_θ(t) with ∂_θρ from a central difference of step `h`.
pub fn qfi_theta_fd(sol: &GSolution, theta: f64, t: f64, convention: StateConvention, h: f64) -> f64 {
    let plus = evolved_family(sol, theta + h, t, convention);
    let minus = evolved_family(sol, theta - h, t, convention);
    let scale = 0.5 / h;
    let d = DensityMatrix2 {
        ee: (plus.ee - minus.ee) * scale,
        eg: (plus.eg - minus.eg) * scale,
        ge: (plus.ge - minus.ge) * scale,
        gg: (plus.gg - minus.gg) * scale,
    };
    qfi_from_derivative(&evolved_family(sol, theta, t, convention), &d)
}
