//! Boundaries of the (γ_w, κ) phase diagram and the per-point classifier.
//!
//! All curves assume Γ_w = 1 and resonance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::non_markovianity_nt;
use crate::error::{Error, Result};
use crate::gfunction::{find_g_roots, GSolution};
use crate::model::{Grid, ModelParams};

/// γ_w at which the green and blue curves meet.
pub const JOIN_GAMMA: f64 = 27.0 / 16.0;

/// Upper end of the blue curve's domain.
pub const BLUE_GAMMA_MAX: f64 = 3.0;

/// N above which a point counts as non-Markovian.
pub const NM_THRESHOLD: f64 = 1e-6;

/// Default search window for divergences.
pub const DEFAULT_T_MAX: f64 = 200.0;

/// Approximate grid step for N on the classifier grid.
pub const CLASSIFY_DT: f64 = 0.01;

/// κ = √(γ_w(9 − 4γ_w))/6, the locus where the real root of the cubic
/// equals the real part of the complex pair. Real for γ_w ∈ (0, 9/4].
pub fn green_boundary(gamma_w: f64) -> Result<f64> {
    if !(gamma_w > 0.0 && gamma_w <= 2.25) {
        return Err(Error::OutOfDomain(gamma_w));
    }
    Ok((gamma_w * (9.0 - 4.0 * gamma_w)).max(0.0).sqrt() / 6.0)
}

/// Zero-discriminant curve for γ_w ∈ [27/16, 3]:
///
/// ```text
/// κ² = ⅓√(2γ³(2γ+27)) cos(θ_b/3) − ⅙γ(4γ+3),
/// sec θ_b = 8√(2γ)(2γ+27)^{3/2} / (8γ(4γ−135) − 729),   θ_b ∈ (π/2, π]
/// ```
///
/// θ_b → π at the join, where arccos loses half its digits. Writing
/// sec θ_b = den/num, the identity den² − num² = 27(16γ−27)³ gives
/// 1 + cos θ_b without cancellation, and θ_b = π − 2 asin√((1 + cos θ_b)/2).
pub fn blue_boundary(gamma_w: f64) -> Result<f64> {
    if !(JOIN_GAMMA..=BLUE_GAMMA_MAX).contains(&gamma_w) {
        return Err(Error::OutOfDomain(gamma_w));
    }
    let g = gamma_w;
    let den = 8.0 * (2.0 * g).sqrt() * (2.0 * g + 27.0).powf(1.5);
    let num = 8.0 * g * (4.0 * g - 135.0) - 729.0;
    let one_plus_cos = 27.0 * (16.0 * g - 27.0).powi(3) / (den * (den - num));
    let theta_b = std::f64::consts::PI - 2.0 * (0.5 * one_plus_cos).sqrt().asin();
    let k2 = (2.0 * g.powi(3) * (2.0 * g + 27.0)).sqrt() / 3.0 * (theta_b / 3.0).cos()
        - g * (4.0 * g + 3.0) / 6.0;
    if k2 < 0.0 {
        return Err(Error::NegativeKappaSquared(k2));
    }
    Ok(k2.sqrt())
}

/// A point where g' and g'' vanish together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub kappa: f64,
    pub t: f64,
    pub gp: f64,
    pub gpp: f64,
}

const TANGENCY_SCAN: usize = 50;
const TANGENCY_T_MAX: f64 = 60.0;
const TANGENCY_TOL: f64 = 1e-10;
/// Below this κ, g ≈ 1 makes every t a trivial solution.
const TANGENCY_KAPPA_MIN: f64 = 1e-4;

/// (g', g'') at (t, κ) with the slowest decay divided out.
fn tangency_residual(gamma_w: f64, t: f64, kappa: f64) -> Option<[f64; 2]> {
    let sol = GSolution::new(ModelParams::resonant(gamma_w, kappa)).ok()?;
    let v = sol.eval(t);
    let scale = (-sol.slowest_rate() * t).exp();
    let r = [v.gp * scale, v.gpp * scale];
    r.iter().all(|x| x.is_finite()).then_some(r)
}

fn newton_tangency(gamma_w: f64, mut t: f64, mut kappa: f64) -> Option<(f64, f64)> {
    let merit = |r: &[f64; 2]| r[0].hypot(r[1]);
    let mut r = tangency_residual(gamma_w, t, kappa)?;
    for _ in 0..100 {
        if merit(&r) <= TANGENCY_TOL {
            return Some((t, kappa));
        }
        let ht = 1e-6 * t.max(1.0);
        let hk = 1e-7 * kappa.max(1e-3);
        let rtp = tangency_residual(gamma_w, t + ht, kappa)?;
        let rtm = tangency_residual(gamma_w, t - ht, kappa)?;
        let rkp = tangency_residual(gamma_w, t, kappa + hk)?;
        let rkm = tangency_residual(gamma_w, t, (kappa - hk).max(0.0))?;
        let j = [
            [(rtp[0] - rtm[0]) / (2.0 * ht), (rkp[0] - rkm[0]) / (2.0 * hk)],
            [(rtp[1] - rtm[1]) / (2.0 * ht), (rkp[1] - rkm[1]) / (2.0 * hk)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dt = -(j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let dk = -(-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut lambda = 1.0;
        loop {
            let (tn, kn) = (t + lambda * dt, kappa + lambda * dk);
            if tn > 0.0 && kn > 0.0 {
                if let Some(rn) = tangency_residual(gamma_w, tn, kn) {
                    if merit(&rn) < merit(&r) {
                        t = tn;
                        kappa = kn;
                        r = rn;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return (merit(&r) <= 10.0 * TANGENCY_TOL).then_some((t, kappa));
            }
        }
    }
    (merit(&r) <= TANGENCY_TOL).then_some((t, kappa))
}

/// Smallest κ > 0 for which g has a horizontal inflection (g' = g'' = 0) at
/// some t > 0, for γ_w ∈ (0, 27/16). Seeds Newton from the local minima of
/// the residual on a 50×50 (t, κ) scan.
pub fn tangency_boundary(gamma_w: f64) -> Result<Tangency> {
    if !(gamma_w > 0.0 && gamma_w < JOIN_GAMMA) {
        return Err(Error::OutOfDomain(gamma_w));
    }
    let k_max = green_boundary(gamma_w)?;
    let n = TANGENCY_SCAN;
    let ts: Vec<f64> = (1..=n).map(|i| TANGENCY_T_MAX * i as f64 / n as f64).collect();
    let ks: Vec<f64> = (1..=n).map(|j| k_max * j as f64 / n as f64).collect();
    let mut merit = vec![vec![f64::INFINITY; n]; n];
    for (i, &t) in ts.iter().enumerate() {
        for (j, &k) in ks.iter().enumerate() {
            if let Some(r) = tangency_residual(gamma_w, t, k) {
                merit[i][j] = r[0].hypot(r[1]);
            }
        }
    }
    let mut seeds = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let m = merit[i][j];
            let mut is_min = m.is_finite();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    if merit[a as usize][b as usize] < m {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push((ts[i], ks[j]));
            }
        }
    }

    let mut best: Option<Tangency> = None;
    for &(t0, k0) in &seeds {
        let Some((t, kappa)) = newton_tangency(gamma_w, t0, k0) else { continue };
        if kappa < TANGENCY_KAPPA_MIN || t <= 0.0 {
            continue;
        }
        let sol = GSolution::new(ModelParams::resonant(gamma_w, kappa))?;
        let v = sol.eval(t);
        if best.is_none_or(|b| kappa < b.kappa) {
            best = Some(Tangency { kappa, t, gp: v.gp, gpp: v.gpp });
        }
    }
    best.ok_or_else(|| {
        let min = merit.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        Error::NoConvergence(format!(
            "no tangency for gamma_w={gamma_w}: {} seeds, smallest scan residual {min:.3e}",
            seeds.len()
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Markov,
    NonMarkovDivergent,
    NonMarkovNonDivergent,
}

impl Region {
    pub fn code(self) -> &'static str {
        match self {
            Self::Markov => "M",
            Self::NonMarkovDivergent => "NM_DIV",
            Self::NonMarkovNonDivergent => "NM_NODIV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub gamma_w: f64,
    pub kappa: f64,
    pub region: Region,
    pub t_first_divergence: Option<f64>,
    pub n_total: f64,
}

/// Classifies (γ_w, κ) with Γ_w = 1 by the zeros of g and N on [0, t_max].
pub fn classify_point(gamma_w: f64, kappa: f64, t_max: f64) -> Result<PhaseCell> {
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::InvalidInput(format!("t_max must be positive and finite, got {t_max}")));
    }
    let sol = GSolution::new(ModelParams::resonant(gamma_w, kappa))?;
    let steps = (t_max / CLASSIFY_DT).ceil() as usize;
    let grid = Grid::new(0.0, t_max / steps as f64, steps)?;
    let n_total = non_markovianity_nt(&sol, &grid).total;
    let t_first = find_g_roots(&sol, t_max).first().copied();
    let region = match (t_first, n_total > NM_THRESHOLD) {
        (Some(_), _) => Region::NonMarkovDivergent,
        (None, true) => Region::NonMarkovNonDivergent,
        (None, false) => Region::Markov,
    };
    Ok(PhaseCell { gamma_w, kappa, region, t_first_divergence: t_first, n_total })
}

/// Inclusive arithmetic range start, start + step, …, stop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let r = Self { start, stop, step };
        r.count()?;
        Ok(r)
    }

    fn count(&self) -> Result<usize> {
        let bad = |why: &str| Error::InvalidInput(format!("sweep {why}: start {}, stop {}, step {}", self.start, self.stop, self.step));
        if !(self.start > 0.0 && self.step > 0.0 && self.stop >= self.start) {
            return Err(bad("range must be positive with stop >= start and positive step"));
        }
        let n = (self.stop - self.start) / self.step;
        let r = n.round();
        if (n - r).abs() > 1e-6 * r.max(1.0) {
            return Err(bad("range is not a whole number of steps"));
        }
        Ok(r as usize + 1)
    }

    /// Node values, snapped to 12 decimals so 0.02 + 44·0.02 prints as 0.9.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count().unwrap_or(0);
        (0..n).map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub gamma_w: AxisRange,
    pub kappa: AxisRange,
    pub t_max: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma_w: AxisRange { start: 0.02, stop: 3.0, step: 0.02 },
            kappa: AxisRange { start: 0.005, stop: 0.6, step: 0.005 },
            t_max: DEFAULT_T_MAX,
        }
    }
}

/// One node of the sweep. `cell` carries the message if classification failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma_w: f64,
    pub kappa: f64,
    pub cell: std::result::Result<PhaseCell, String>,
}

/// Classifies every node, γ_w-major, on the current rayon pool. Rows come
/// back in grid order whatever the scheduling.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let gammas = {
        config.gamma_w.count()?;
        config.gamma_w.values()
    };
    let kappas = {
        config.kappa.count()?;
        config.kappa.values()
    };
    let nodes: Vec<(f64, f64)> =
        gammas.iter().flat_map(|&g| kappas.iter().map(move |&k| (g, k))).collect();
    Ok(nodes
        .into_par_iter()
        .map(|(gamma_w, kappa)| SweepRow {
            gamma_w,
            kappa,
            cell: classify_point(gamma_w, kappa, config.t_max).map_err(|e| e.to_string()),
        })
        .collect())
}

/// [`sweep`] on a dedicated pool with `threads` workers.
pub fn sweep_with_threads(config: &SweepConfig, threads: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| sweep(config))
}
