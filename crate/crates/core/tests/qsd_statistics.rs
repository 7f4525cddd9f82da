use nmgeo::qsd::{ensemble_density, evolve_trajectory, sample_noises, trajectory_coefficients};
use nmgeo::{initial_state, Grid, ModelParams};
use num_complex::Complex64 as C64;

const N: usize = 10_000;

fn divergent_point() -> ModelParams {
    ModelParams::resonant(0.9, 0.43)
}

fn mean(v: &[C64]) -> C64 {
    v.iter().sum::<C64>() / v.len() as f64
}

/// Sample mean and its standard error for complex samples.
fn mean_se(v: &[C64]) -> (C64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).norm_sqr()).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

struct Draws {
    grid: Grid,
    z: Vec<C64>,
    w: Vec<Vec<C64>>,
}

fn draws(p: &ModelParams) -> Draws {
    let grid = Grid::span(3.0, 0.01).unwrap();
    let mut z = Vec::with_capacity(N);
    let mut w = Vec::with_capacity(N);
    for j in 0..N {
        let n = sample_noises(p, &grid, 42, j as u64).unwrap();
        z.push(n.z);
        // Stored as w*; keep w itself.
        w.push(n.w_star.iter().map(|x| x.conj()).collect::<Vec<_>>());
    }
    Draws { grid, z, w }
}

#[test]
fn noise_means_vanish() {
    let d = draws(&divergent_point());
    let (m, se) = mean_se(&d.z);
    assert!(m.norm() <= 3.0 * se, "M[z] = {m}");
    for k in [0, 100, 300] {
        let col: Vec<C64> = d.w.iter().map(|w| w[k]).collect();
        let (m, se) = mean_se(&col);
        assert!(m.norm() <= 3.0 * se, "M[w(t={})] = {m}", d.grid.t(k));
    }
}

#[test]
fn stationary_variance_of_bath_noise() {
    let p = divergent_point();
    let d = draws(&p);
    let want = 0.5 * p.gamma_w * p.bath_coupling;
    for k in [0, 50, 150, 300] {
        let sq: Vec<C64> = d.w.iter().map(|w| C64::new(w[k].norm_sqr(), 0.0)).collect();
        let (m, se) = mean_se(&sq);
        assert!((m.re - want).abs() <= 3.0 * se, "t={}: {} vs {want}", d.grid.t(k), m.re);
    }
}

#[test]
fn bath_noise_decorrelates_at_memory_rate() {
    let p = divergent_point();
    let d = draws(&p);
    let var = 0.5 * p.gamma_w * p.bath_coupling;
    // Δt = 1 is 100 grid steps.
    for k in [0, 150] {
        let prod: Vec<C64> = d.w.iter().map(|w| w[k + 100] * w[k].conj()).collect();
        let (m, se) = mean_se(&prod);
        let want = var * C64::new(-p.gamma_w, -p.omega_w).exp();
        assert!((m - want).norm() <= 3.0 * se, "{m} vs {want}");
        assert!((m.norm() - var * (-p.gamma_w).exp()).abs() <= 3.0 * se);
    }
}

#[test]
fn cavity_noise_covariance() {
    let p = divergent_point();
    let grid = Grid::span(3.0, 0.01).unwrap();
    let noises: Vec<_> = (0..N).map(|j| sample_noises(&p, &grid, 42, j as u64).unwrap()).collect();
    let pairs = [(0, 0), (10, 0), (50, 20), (100, 0), (150, 75), (200, 10), (250, 250), (300, 100), (30, 290), (120, 180)];
    for (a, b) in pairs {
        let (t, s) = (grid.t(a), grid.t(b));
        // z_t = conj(z_t*), so M[z_t z_s*] = M[conj(z_t*) z_s*].
        let prod: Vec<C64> = noises.iter().map(|n| n.z_star_at(t).conj() * n.z_star_at(s)).collect();
        let (m, se) = mean_se(&prod);
        let want = C64::from_polar(1.0, -p.omega_c * (t - s));
        assert!((m - want).norm() <= 3.0 * se, "({t},{s}): {m} vs {want}");
    }
    let pseudo: Vec<C64> = noises.iter().map(|n| n.z * n.z).collect();
    let (m, se) = mean_se(&pseudo);
    assert!(m.norm() <= 3.0 * se);
}

#[test]
fn coarse_noise_grid_rejected() {
    let p = ModelParams::resonant(20.0, 0.43);
    assert!(sample_noises(&p, &Grid::span(1.0, 0.01).unwrap(), 1, 0).is_err());
}

#[test]
fn trajectory_starts_at_initial_state() {
    let p = divergent_point();
    let grid = Grid::span(2.0, 0.01).unwrap();
    let coeffs = trajectory_coefficients(&p, &grid).unwrap();
    let psi0 = initial_state(0.8).unwrap();
    for j in 0..5 {
        let s = evolve_trajectory(&p, psi0, &sample_noises(&p, &grid, 3, j).unwrap(), &coeffs).unwrap();
        assert_eq!(s.states[0], psi0);
    }
}

#[test]
fn pole_in_window_refused() {
    let grid = Grid::span(6.0, 0.01).unwrap();
    assert!(trajectory_coefficients(&divergent_point(), &grid).is_err());
}

#[test]
fn stderr_scales_with_root_two() {
    let p = divergent_point();
    let grid = Grid::span(2.0, 0.01).unwrap();
    let a = ensemble_density(&p, std::f64::consts::FRAC_PI_4, &grid, 2000, 5).unwrap();
    let b = ensemble_density(&p, std::f64::consts::FRAC_PI_4, &grid, 4000, 5).unwrap();
    let avg = |e: &nmgeo::qsd::EnsembleDensity| {
        e.stderr[1..].iter().map(|s| s.iter().sum::<f64>()).sum::<f64>() / (e.stderr.len() - 1) as f64
    };
    let ratio = avg(&a) / avg(&b);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.2, "ratio {ratio}");
    // The mean trace stays at one within three standard errors.
    for k in 0..grid.len() {
        let tr = a.mean[k].trace().re;
        let se = a.stderr[k][0] + a.stderr[k][3];
        assert!((tr - 1.0).abs() <= 3.0 * se + 1e-12, "t={}: tr={tr}", grid.t(k));
    }
}

#[test]
fn ensemble_independent_of_pool_size() {
    let p = divergent_point();
    let grid = Grid::span(1.0, 0.01).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble_density(&p, 1.0, &grid, 700, 99).unwrap())
    };
    let base = run(1);
    for threads in [2, 5] {
        let other = run(threads);
        for (x, y) in base.mean.iter().zip(&other.mean) {
            for (a, b) in x.entries().iter().zip(y.entries()) {
                assert_eq!((a.re.to_bits(), a.im.to_bits()), (b.re.to_bits(), b.im.to_bits()));
            }
        }
    }
}

#[test]
fn too_few_trajectories_rejected() {
    let grid = Grid::span(1.0, 0.01).unwrap();
    assert!(ensemble_density(&divergent_point(), 1.0, &grid, 99, 0).is_err());
}
