//! Adaptive Dormand–Prince 5(4) integrator for small complex systems.
//!
//! Output is produced on a uniform grid: every grid time is hit exactly by
//! shortening the step, so no interpolation error enters the sampled values.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::Grid;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order weights (also row 7 of the tableau, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 10_000_000 }
    }
}

/// Samples on the requested grid. When the stop predicate fired, `samples`
/// holds only the grid points reached before `stopped_at`.
#[derive(Clone, Debug)]
pub struct OdeRun<const N: usize> {
    pub samples: Vec<[C64; N]>,
    pub stopped_at: Option<(f64, [C64; N])>,
}

fn axpy<const N: usize>(y: &[C64; N], h: f64, terms: &[(f64, &[C64; N])]) -> [C64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        *o += acc * h;
    }
    out
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    /// Integrates `y' = f(t, y)` from `grid.t0`, sampling every grid point.
    ///
    /// `stop(t, y)` is checked after every accepted step; returning true ends
    /// the run early.
    pub fn integrate<const N: usize, F, S>(
        &self,
        f: F,
        y0: [C64; N],
        grid: &Grid,
        mut stop: S,
    ) -> Result<OdeRun<N>>
    where
        F: Fn(f64, &[C64; N]) -> [C64; N],
        S: FnMut(f64, &[C64; N]) -> bool,
    {
        let mut samples = Vec::with_capacity(grid.len());
        samples.push(y0);
        let mut t = grid.t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = self.initial_step(&f, t, &y, &k1).min(grid.dt);
        let mut steps = 0usize;

        for idx in 1..grid.len() {
            let target = grid.t(idx);
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::IntegrationFailure { t, reason: "step budget exhausted".into() });
                }
                let remaining = target - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let h_try = if last { remaining } else { h };
                if h_try <= 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::IntegrationFailure { t, reason: "step size underflow".into() });
                }

                let (y_new, k7, err) = self.step(&f, t, &y, &k1, h_try);
                if !err.is_finite() {
                    h = 0.2 * h_try;
                    continue;
                }
                if err <= 1.0 {
                    t = if last { target } else { t + h_try };
                    y = y_new;
                    k1 = k7;
                    if stop(t, &y) {
                        return Ok(OdeRun { samples, stopped_at: Some((t, y)) });
                    }
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // Keep h from collapsing to the tiny remainder of a grid interval.
                    h = if last { h.max(h_try * fac) } else { h_try * fac };
                } else {
                    h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                }
            }
            samples.push(y);
        }
        Ok(OdeRun { samples, stopped_at: None })
    }

    fn step<const N: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[C64; N],
        k1: &[C64; N],
        h: f64,
    ) -> ([C64; N], [C64; N], f64)
    where
        F: Fn(f64, &[C64; N]) -> [C64; N],
    {
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            t + h,
            &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);

        let mut acc = 0.0;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
            acc += (e.norm() / scale).powi(2);
        }
        (y_new, k7, (acc / N as f64).sqrt())
    }

    fn initial_step<const N: usize, F>(&self, f: &F, t: f64, y: &[C64; N], k1: &[C64; N]) -> f64
    where
        F: Fn(f64, &[C64; N]) -> [C64; N],
    {
        let scale = |v: &[C64; N]| {
            let mut acc = 0.0;
            for i in 0..N {
                let s = self.atol + self.rtol * y[i].norm();
                acc += (v[i].norm() / s).powi(2);
            }
            (acc / N as f64).sqrt()
        };
        let d0 = scale(y);
        let d1 = scale(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = axpy(y, h0, &[(1.0, k1)]);
        let k2 = f(t + h0, &y1);
        let mut diff = [C64::new(0.0, 0.0); N];
        for i in 0..N {
            diff[i] = k2[i] - k1[i];
        }
        let d2 = scale(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_with_rotation() {
        let lambda = C64::new(-0.3, 2.0);
        let grid = Grid::span(10.0, 0.1).unwrap();
        let run = Dopri5::default()
            .integrate(|_, y: &[C64; 1]| [lambda * y[0]], [C64::new(1.0, 0.0)], &grid, |_, _| false)
            .unwrap();
        assert_eq!(run.samples.len(), grid.len());
        for (k, s) in run.samples.iter().enumerate() {
            let exact = (lambda * grid.t(k)).exp();
            assert!((s[0] - exact).norm() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let grid = Grid::span(50.0, 0.5).unwrap();
        let run = Dopri5::default()
            .integrate(
                |_, y: &[C64; 2]| [y[1], -y[0]],
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                &grid,
                |_, _| false,
            )
            .unwrap();
        let last = run.samples.last().unwrap();
        assert!((last[0].re - 50f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn stop_predicate_ends_run_near_blowup() {
        // y' = 1 + y², y(0) = 0 → tan(t), pole at π/2.
        let grid = Grid::span(3.0, 0.01).unwrap();
        let run = Dopri5::default()
            .integrate(
                |_, y: &[C64; 1]| [C64::new(1.0, 0.0) + y[0] * y[0]],
                [C64::new(0.0, 0.0)],
                &grid,
                |_, y| y[0].norm() > 1e8,
            )
            .unwrap();
        let (t_stop, _) = run.stopped_at.unwrap();
        assert!((t_stop - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        assert_eq!(run.samples.len(), 158);
    }
}
