//! The auxiliary decay function g(t) = exp[-κ ∫₀ᵗ F_z(s) ds].
//!
//! At resonance g obeys the linear third-order equation
//!
//! ```text
//! g''' = -γ_w g'' - ½(γ_w Γ_w + 2κ²) g' - γ_w κ² g,   g(0)=1, g'(0)=0, g''(0)=-κ²
//! ```
//!
//! whose characteristic polynomial, written in x = 2λ, is
//! x³ + 2γ_w x² + (4κ² + 2γ_w Γ_w) x + 8κ²γ_w. The closed-form root sum is
//!
//! ```text
//! g(t) = Σ_x e^{x t / 2} (2γ_wΓ_w + 2xγ_w + x²) / (4κ² + 2γ_wΓ_w + 4xγ_w + 3x²)
//! ```
//!
//! The e^{xt/2} exponent is the one consistent with the ODE: the modes of the
//! third-order equation are λ = x/2, and with that exponent the sum reproduces
//! all three initial conditions (the weights are N(x)/P'(x), which sum to one).

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams};
use crate::ode::Dopri5;

/// Relative pairwise root separation below which the root sum is abandoned.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Largest root-sum weight accepted by [`GSolution::new`]. Near a repeated
/// root the weights grow like 1/separation² and the sum loses digits to
/// cancellation well before the separation test trips.
pub const WEIGHT_LIMIT: f64 = 1e6;

/// Characteristic-polynomial coefficients (a, b, c) of x³ + a x² + b x + c.
fn cubic_coefficients(p: &ModelParams) -> (f64, f64, f64) {
    let k2 = p.kappa * p.kappa;
    (
        2.0 * p.gamma_w,
        4.0 * k2 + 2.0 * p.gamma_w * p.bath_coupling,
        8.0 * k2 * p.gamma_w,
    )
}

fn require_finite_resonant(p: &ModelParams) -> Result<()> {
    if !p.is_resonant() {
        return Err(Error::NotResonant);
    }
    if p.is_markov_limit() {
        return Err(Error::InvalidInput(
            "the characteristic cubic needs a finite gamma_w; use the Markov-limit closed form".into(),
        ));
    }
    Ok(())
}

fn polish(a: f64, b: f64, c: f64, mut x: C64) -> C64 {
    for _ in 0..4 {
        let f = ((x + a) * x + b) * x + c;
        let df = (3.0 * x + 2.0 * a) * x + b;
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        if step.norm() <= 1e-16 * x.norm().max(1e-300) {
            break;
        }
    }
    x
}

/// Roots of the monic cubic x³ + a x² + b x + c, sorted by (re, im).
pub(crate) fn solve_monic_cubic(a: f64, b: f64, c: f64) -> [C64; 3] {
    // One real root from the depressed cubic, then deflation.
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let x_real = if disc > 0.0 {
        let s = disc.sqrt();
        let u = if q > 0.0 { -(0.5 * q + s) } else { -0.5 * q + s };
        let u = u.cbrt();
        (if u == 0.0 { 0.0 } else { u - p / (3.0 * u) }) - shift
    } else if p == 0.0 {
        -shift
    } else {
        // Three real roots; deflate with the largest-magnitude one.
        let m = 2.0 * (-p / 3.0).sqrt();
        let phi = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        let third = 2.0 * std::f64::consts::PI / 3.0;
        [0.0, 1.0, 2.0]
            .map(|j| m * (phi - j * third).cos() - shift)
            .into_iter()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(-shift)
    };
    let r = polish(a, b, c, C64::new(x_real, 0.0)).re;

    // x² + B x + C with B = a + r, C = b + r B.
    let bq = a + r;
    let cq = b + r * bq;
    let dq = bq * bq - 4.0 * cq;
    let (r2, r3) = if dq >= 0.0 {
        let s = dq.sqrt();
        let big = -0.5 * (bq + bq.signum() * s);
        let other = if big != 0.0 { cq / big } else { 0.0 };
        (C64::new(big, 0.0), C64::new(other, 0.0))
    } else {
        let s = (-dq).sqrt();
        (C64::new(-0.5 * bq, 0.5 * s), C64::new(-0.5 * bq, -0.5 * s))
    };

    let mut roots = [C64::new(r, 0.0), polish(a, b, c, r2), polish(a, b, c, r3)];
    if dq < 0.0 {
        // Keep the pair exactly conjugate after polishing.
        let m = 0.5 * (roots[1] + roots[2].conj());
        roots[1] = m;
        roots[2] = m.conj();
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    roots
}

/// The three roots x₁..x₃ of the characteristic cubic.
pub fn cubic_roots(p: &ModelParams) -> Result<[C64; 3]> {
    require_finite_resonant(p)?;
    let (a, b, c) = cubic_coefficients(p);
    Ok(solve_monic_cubic(a, b, c))
}

/// Root-structure discriminant (up to a positive constant this is minus the
/// textbook cubic discriminant): D > 0 means one real root and a conjugate
/// pair, D ≤ 0 three real roots.
pub fn cubic_discriminant(p: &ModelParams) -> f64 {
    let gw = p.gamma_w;
    let big = p.bath_coupling;
    let k2 = p.kappa * p.kappa;
    let first = 36.0 * k2 - 9.0 * gw * big + 4.0 * gw * gw;
    let second = -6.0 * k2 - 3.0 * gw * big + 2.0 * gw * gw;
    gw * gw * first * first - 2.0 * second * second * second
}

/// The first-order form v' = M v with v = (g, g', g'').
pub fn rate_matrix(p: &ModelParams) -> Matrix3<f64> {
    let k2 = p.kappa * p.kappa;
    Matrix3::new(
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        -p.gamma_w * k2, -0.5 * (p.gamma_w * p.bath_coupling + 2.0 * k2), -p.gamma_w,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GMethod {
    RootSum,
    OdeFallback,
    MarkovLimit,
}

/// (g, g', g'') at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValues {
    pub g: f64,
    pub gp: f64,
    pub gpp: f64,
}

#[derive(Clone, Debug)]
enum Repr {
    Modes { lambdas: [C64; 3], weights: [C64; 3] },
    Matrix(Matrix3<f64>),
    Markov { big: f64, k2: f64, c2: f64 },
}

/// Analytic representation of g for one parameter point.
#[derive(Clone, Debug)]
pub struct GSolution {
    params: ModelParams,
    roots: Option<[C64; 3]>,
    method: GMethod,
    repr: Repr,
}

fn root_separation(roots: &[C64; 3]) -> f64 {
    let scale = roots.iter().map(|r| r.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut min = f64::INFINITY;
    for i in 0..3 {
        for j in (i + 1)..3 {
            min = min.min((roots[i] - roots[j]).norm());
        }
    }
    min / scale
}

impl GSolution {
    /// Picks the root sum when the roots are well separated, the matrix
    /// exponential otherwise, and the closed form in the Markov limit.
    pub fn new(params: ModelParams) -> Result<Self> {
        let params = params.validate()?;
        if !params.is_resonant() {
            return Err(Error::NotResonant);
        }
        if params.is_markov_limit() {
            return Ok(Self::markov(params));
        }
        match Self::root_sum(params) {
            Ok(sol) if sol.max_weight() <= WEIGHT_LIMIT => Ok(sol),
            Ok(_) => Self::ode_fallback(params),
            Err(Error::DegenerateRoots(_)) => Self::ode_fallback(params),
            Err(e) => Err(e),
        }
    }

    /// Root-sum representation; fails on (near-)repeated roots.
    pub fn root_sum(params: ModelParams) -> Result<Self> {
        let params = params.validate()?;
        let roots = cubic_roots(&params)?;
        let sep = root_separation(&roots);
        if sep < DEGENERACY_TOL {
            return Err(Error::DegenerateRoots(sep));
        }
        let gw = params.gamma_w;
        let big = params.bath_coupling;
        let k2 = params.kappa * params.kappa;
        let mut lambdas = [C64::new(0.0, 0.0); 3];
        let mut weights = [C64::new(0.0, 0.0); 3];
        for (i, &x) in roots.iter().enumerate() {
            let num = 2.0 * gw * big + 2.0 * x * gw + x * x;
            let den = 4.0 * k2 + 2.0 * gw * big + 4.0 * x * gw + 3.0 * x * x;
            lambdas[i] = 0.5 * x;
            weights[i] = num / den;
        }
        Ok(Self { params, roots: Some(roots), method: GMethod::RootSum, repr: Repr::Modes { lambdas, weights } })
    }

    /// v(t) = exp(M t) v(0); valid for any root structure.
    pub fn ode_fallback(params: ModelParams) -> Result<Self> {
        let params = params.validate()?;
        let roots = cubic_roots(&params)?;
        Ok(Self {
            params,
            roots: Some(roots),
            method: GMethod::OdeFallback,
            repr: Repr::Matrix(rate_matrix(&params)),
        })
    }

    fn markov(params: ModelParams) -> Self {
        let big = params.bath_coupling;
        let k2 = params.kappa * params.kappa;
        Self {
            params,
            roots: None,
            method: GMethod::MarkovLimit,
            repr: Repr::Markov { big, k2, c2: big * big - 16.0 * k2 },
        }
    }

    fn max_weight(&self) -> f64 {
        match &self.repr {
            Repr::Modes { weights, .. } => weights.iter().map(|w| w.norm()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn method(&self) -> GMethod {
        self.method
    }

    /// Characteristic roots x_i (absent in the Markov limit).
    pub fn roots(&self) -> Option<&[C64; 3]> {
        self.roots.as_ref()
    }

    /// Complex root sum before the imaginary residue is discarded.
    pub fn eval_complex(&self, t: f64) -> [C64; 3] {
        match &self.repr {
            Repr::Modes { lambdas, weights } => {
                let mut out = [C64::new(0.0, 0.0); 3];
                for (l, w) in lambdas.iter().zip(weights) {
                    let term = w * (l * t).exp();
                    out[0] += term;
                    out[1] += term * l;
                    out[2] += term * l * l;
                }
                out
            }
            _ => {
                let v = self.eval(t);
                [C64::new(v.g, 0.0), C64::new(v.gp, 0.0), C64::new(v.gpp, 0.0)]
            }
        }
    }

    pub fn eval(&self, t: f64) -> GValues {
        match &self.repr {
            Repr::Modes { .. } => {
                let [g, gp, gpp] = self.eval_complex(t);
                GValues { g: g.re, gp: gp.re, gpp: gpp.re }
            }
            Repr::Matrix(m) => {
                let v = (m * t).exp() * Vector3::new(1.0, 0.0, -self.params.kappa * self.params.kappa);
                GValues { g: v[0], gp: v[1], gpp: v[2] }
            }
            Repr::Markov { big, k2, c2 } => markov_values(*big, *k2, *c2, t),
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        self.eval(t).g
    }

    /// Slowest decay rate among the modes (≤ 0).
    pub fn slowest_rate(&self) -> f64 {
        match (&self.repr, &self.roots) {
            (Repr::Markov { big, c2, .. }, _) => {
                let re = if *c2 > 0.0 { c2.sqrt() } else { 0.0 };
                0.25 * (-big + re)
            }
            (_, Some(roots)) => roots.iter().map(|x| 0.5 * x.re).fold(f64::NEG_INFINITY, f64::max),
            _ => 0.0,
        }
    }

    /// Scan step for sign-change detection: a twentieth of the shortest
    /// characteristic time.
    pub fn scan_step(&self) -> f64 {
        let k = self.params.kappa.max(1e-12);
        let (rate_time, im_max) = match (&self.repr, &self.roots) {
            (Repr::Markov { big, c2, .. }, _) => {
                let im = if *c2 < 0.0 { 0.25 * (-c2).sqrt() } else { 0.0 };
                (4.0 / big, im)
            }
            (_, Some(roots)) => (
                1.0 / self.params.gamma_w,
                roots.iter().map(|x| x.im.abs()).fold(0.0, f64::max),
            ),
            _ => (1.0, 0.0),
        };
        let mut shortest = rate_time.min(1.0 / k);
        if im_max > 0.0 {
            shortest = shortest.min(2.0 * std::f64::consts::PI / im_max);
        }
        shortest / 20.0
    }
}

/// Real cosh/sinh pair of the Markov-limit closed form:
/// C = cosh(c t/4), S = sinh(c t/4)/c with c² = Γ_w² − 16κ² of either sign.
fn markov_cs(c2: f64, t: f64) -> (f64, f64) {
    let u2 = c2 * t * t / 16.0;
    if u2.abs() < 1e-6 {
        // Series keeps the Γ_w = 4κ case and its neighbourhood exact.
        let c = 1.0 + u2 / 2.0 + u2 * u2 / 24.0;
        let s = 0.25 * t * (1.0 + u2 / 6.0 + u2 * u2 / 120.0);
        (c, s)
    } else if c2 > 0.0 {
        let r = c2.sqrt();
        let u = 0.25 * r * t;
        (u.cosh(), u.sinh() / r)
    } else {
        let r = (-c2).sqrt();
        let u = 0.25 * r * t;
        (u.cos(), u.sin() / r)
    }
}

fn markov_values(big: f64, k2: f64, c2: f64, t: f64) -> GValues {
    let (c, s) = markov_cs(c2, t);
    let e = (-0.25 * big * t).exp();
    GValues {
        g: e * (big * s + c),
        gp: -4.0 * k2 * e * s,
        gpp: -k2 * e * (c - big * s),
    }
}

/// Memory-less bath limit γ_w → ∞:
/// g(t) = e^{−Γ_w t/4}[Γ_w sinh(c_M t/4)/c_M + cosh(c_M t/4)], c_M = √(Γ_w² − 16κ²),
/// continuous through Γ_w = 4κ where it becomes ¼e^{−Γ_w t/4}(Γ_w t + 4).
pub fn g_markov_limit(bath_coupling: f64, kappa: f64, t: f64) -> f64 {
    let k2 = kappa * kappa;
    markov_values(bath_coupling, k2, bath_coupling * bath_coupling - 16.0 * k2, t).g
}

/// (g, g', g'') sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GSamples {
    pub grid: Grid,
    pub g: Vec<f64>,
    pub gp: Vec<f64>,
    pub gpp: Vec<f64>,
}

impl GSamples {
    pub fn from_solution(sol: &GSolution, grid: &Grid) -> Self {
        let mut out = Self {
            grid: *grid,
            g: Vec::with_capacity(grid.len()),
            gp: Vec::with_capacity(grid.len()),
            gpp: Vec::with_capacity(grid.len()),
        };
        for t in grid.times() {
            let v = sol.eval(t);
            out.g.push(v.g);
            out.gp.push(v.gp);
            out.gpp.push(v.gpp);
        }
        out
    }
}

/// Integrates the third-order g equation directly (no characteristic roots).
/// In the Markov limit the second-order reduction g'' = −(Γ_w/2) g' − κ² g is
/// integrated instead.
pub fn g_ode_oracle(p: &ModelParams, grid: &Grid) -> Result<GSamples> {
    let p = p.validate()?;
    if !p.is_resonant() {
        return Err(Error::NotResonant);
    }
    let k2 = p.kappa * p.kappa;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let solver = Dopri5::with_tolerances(1e-13, 1e-15);
    let rows: Vec<[f64; 3]> = if p.is_markov_limit() {
        let half_big = 0.5 * p.bath_coupling;
        let run = solver.integrate(
            |_, y: &[C64; 2]| [y[1], -half_big * y[1] - k2 * y[0]],
            [one, zero],
            grid,
            |_, _| false,
        )?;
        run.samples
            .iter()
            .map(|y| [y[0].re, y[1].re, (-half_big * y[1] - k2 * y[0]).re])
            .collect()
    } else {
        let gw = p.gamma_w;
        let mid = 0.5 * (gw * p.bath_coupling + 2.0 * k2);
        let run = solver.integrate(
            |_, y: &[C64; 3]| [y[1], y[2], -gw * y[2] - mid * y[1] - gw * k2 * y[0]],
            [one, zero, C64::new(-k2, 0.0)],
            grid,
            |_, _| false,
        )?;
        run.samples.iter().map(|y| [y[0].re, y[1].re, y[2].re]).collect()
    };
    Ok(GSamples {
        grid: *grid,
        g: rows.iter().map(|r| r[0]).collect(),
        gp: rows.iter().map(|r| r[1]).collect(),
        gpp: rows.iter().map(|r| r[2]).collect(),
    })
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of g on (0, t_max], refined by bisection to |Δt| < 1e-10.
/// Tangential zeros are not reported.
pub fn find_g_roots(sol: &GSolution, t_max: f64) -> Vec<f64> {
    find_g_roots_with_step(sol, t_max, sol.scan_step())
}

/// As [`find_g_roots`] with an explicit scan step.
pub fn find_g_roots_with_step(sol: &GSolution, t_max: f64, step: f64) -> Vec<f64> {
    if t_max.is_nan() || t_max <= 0.0 || step.is_nan() || step <= 0.0 {
        return Vec::new();
    }
    let n = (t_max / step).ceil() as usize;
    let h = t_max / n as f64;
    let mut roots = Vec::new();
    let mut t_prev = 0.0;
    let mut g_prev = sol.g(0.0);
    for k in 1..=n {
        let t = if k == n { t_max } else { k as f64 * h };
        let g = sol.g(t);
        if g == 0.0 {
            // Exact grid hit: a root only if the sign differs on the far side.
            let ahead = sol.g((t + 0.5 * h).min(t_max + 0.5 * h));
            if (ahead > 0.0) != (g_prev > 0.0) && ahead != 0.0 {
                roots.push(t);
            }
            continue;
        }
        if (g > 0.0) != (g_prev > 0.0) {
            roots.push(bisect_root(|s| sol.g(s), t_prev, t, 1e-10));
        }
        t_prev = t;
        g_prev = g;
    }
    roots
}

/// Closed-form root times of the Markov-limit g (Γ_w = 1, κ = 1/4 + δ):
/// t = 2√2(nπ − atan φ)/s and t = 2√2(nπ + atan(1/φ))/s with
/// s = √(δ(2δ+1)), φ = √2 δ / s, for n = 0..=n_max, positive values only.
pub fn markov_root_times(delta: f64, n_max: usize) -> Vec<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Vec::new();
    }
    let s = (delta * (2.0 * delta + 1.0)).sqrt();
    let phi = std::f64::consts::SQRT_2 * delta / s;
    let scale = 2.0 * std::f64::consts::SQRT_2 / s;
    let pi = std::f64::consts::PI;
    let mut out: Vec<f64> = (0..=n_max)
        .flat_map(|n| {
            let n = n as f64;
            [scale * (n * pi - phi.atan()), scale * (n * pi + (1.0 / phi).atan())]
        })
        .filter(|t| *t > 0.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}
