//! Trace-distance non-Markovianity. For this channel the optimal pair of
//! initial states evolves to a distance |g(t)|, so N_t is the accumulated
//! positive variation of |g| and the backflow windows are where |g| grows.

use serde::{Deserialize, Serialize};

use crate::gfunction::GSolution;
use crate::model::Grid;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonMarkovReport {
    pub grid: Grid,
    pub n_t: Vec<f64>,
    /// Maximal grid intervals (t_start, t_end) over which |g| increases.
    pub windows: Vec<(f64, f64)>,
    pub total: f64,
}

/// N_t from |g| sampled on `grid`.
pub fn non_markovianity_from_abs_g(abs_g: &[f64], grid: &Grid) -> NonMarkovReport {
    assert_eq!(abs_g.len(), grid.len(), "one |g| sample per grid point");
    let mut n_t = Vec::with_capacity(abs_g.len());
    let mut windows = Vec::new();
    let mut acc = 0.0;
    let mut open: Option<usize> = None;
    n_t.push(0.0);
    for k in 1..abs_g.len() {
        let inc = abs_g[k] - abs_g[k - 1];
        if inc > 0.0 {
            acc += inc;
            open.get_or_insert(k - 1);
        } else if let Some(s) = open.take() {
            windows.push((grid.t(s), grid.t(k - 1)));
        }
        n_t.push(acc);
    }
    if let Some(s) = open {
        windows.push((grid.t(s), grid.t_end()));
    }
    NonMarkovReport { grid: *grid, n_t, windows, total: acc }
}

/// N_t for the model behind `sol` on `grid`.
pub fn non_markovianity_nt(sol: &GSolution, grid: &Grid) -> NonMarkovReport {
    let abs_g: Vec<f64> = grid.times().map(|t| sol.g(t).abs()).collect();
    non_markovianity_from_abs_g(&abs_g, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn monotone_decay_has_no_backflow() {
        let grid = Grid::span(3.0, 1.0).unwrap();
        let r = non_markovianity_from_abs_g(&[1.0, 0.5, 0.25, 0.1], &grid);
        assert_eq!(r.total, 0.0);
        assert!(r.windows.is_empty());
    }

    #[test]
    fn windows_are_maximal_runs() {
        let grid = Grid::span(6.0, 1.0).unwrap();
        let r = non_markovianity_from_abs_g(&[1.0, 0.2, 0.4, 0.5, 0.1, 0.0, 0.3], &grid);
        assert_eq!(r.windows, vec![(1.0, 3.0), (5.0, 6.0)]);
        assert!((r.total - 0.6).abs() < 1e-15);
        assert_eq!(r.n_t.len(), 7);
    }

    #[test]
    fn markov_point_is_flat() {
        let sol = GSolution::new(ModelParams::resonant(0.9, 0.1)).unwrap();
        let r = non_markovianity_nt(&sol, &Grid::span(200.0, 0.01).unwrap());
        assert!(r.total <= 1e-9);
    }

    #[test]
    fn reference_windows_open_at_divergence_times() {
        let sol = GSolution::new(ModelParams::resonant(0.9, 0.43)).unwrap();
        let r = non_markovianity_nt(&sol, &Grid::span(20.0, 1e-3).unwrap());
        let starts: Vec<f64> = r.windows.iter().map(|w| w.0).collect();
        for (s, expected) in starts.iter().zip([5.1869, 8.8472, 14.8651]) {
            assert!((s - expected).abs() < 2e-3, "{s} vs {expected}");
        }
    }
}
