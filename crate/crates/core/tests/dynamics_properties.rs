use std::f64::consts::FRAC_PI_4;

use nmgeo::dynamics::{
    closed_form_density, evolve_master_equation, expectations_sigma, f_ode_oracle, f_w_from_f_z, f_z_at, f_z_from_g,
    integrate_lindblad, non_markovianity_nt, qfi_theta, qfi_theta_fd, trace_distance, StateConvention,
    QFI_FD_STEP,
};
use nmgeo::gfunction::{find_g_roots, GSolution};
use nmgeo::{initial_state, DensityMatrix2, Grid, ModelParams};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn divergent_point() -> ModelParams {
    ModelParams::resonant(0.9, 0.43)
}

fn random_bloch(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    [radius * s * phi.cos(), radius * s * phi.sin(), radius * z]
}

#[test]
fn trace_preserved_for_random_states() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(50.0, 0.01).unwrap();
    let coeffs = f_z_from_g(&sol, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let r = rng.random_range(0.0..=1.0);
        let [x, y, z] = random_bloch(&mut rng, r);
        let out = evolve_master_equation(&p, &DensityMatrix2::from_bloch(x, y, z), &coeffs).unwrap();
        for rho in &out.states {
            assert!((rho.trace() - 1.0).norm() <= 1e-10);
            assert!(rho.is_hermitian(1e-12));
        }
        assert!(out.min_eigenvalue >= -1e-9);
    }
}

#[test]
fn evolution_matches_closed_form_over_fifty() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(50.0, 0.01).unwrap();
    let rho0 = initial_state(FRAC_PI_4).unwrap().outer();
    let out = evolve_master_equation(&p, &rho0, &f_z_from_g(&sol, &grid)).unwrap();
    for (k, t) in grid.times().enumerate() {
        let g = sol.g(t);
        let rho = &out.states[k];
        assert!((rho.ee.re - rho0.ee.re * g * g).abs() <= 1e-7, "t={t}");
        assert!((rho.eg.norm() - rho0.eg.norm() * g.abs()).abs() <= 1e-7, "t={t}");
        let phase = rho0.eg * g * C64::from_polar(1.0, -p.omega * t);
        assert!((rho.eg - phase).norm() <= 1e-7, "t={t}");
    }
}

#[test]
fn lindblad_integrator_agrees_before_first_root() {
    // Independent route: RK4 on the Lindblad generator with F_z from g.
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(5.0, 0.01).unwrap();
    let rho0 = initial_state(FRAC_PI_4).unwrap().outer();
    let out = integrate_lindblad(&p, &rho0, &grid, 4, |t| f_z_at(&sol, t)).unwrap();
    for (k, t) in grid.times().enumerate() {
        let exact = closed_form_density(&p, &rho0, C64::new(sol.g(t), 0.0), t);
        assert!(out.states[k].max_abs_diff(&exact) <= 1e-7, "t={t}");
    }
}

#[test]
fn ground_state_is_dark() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(30.0, 0.01).unwrap();
    let out = evolve_master_equation(&p, &DensityMatrix2::ground(), &f_z_from_g(&sol, &grid)).unwrap();
    assert!(out.states.iter().all(|r| r.max_abs_diff(&DensityMatrix2::ground()) == 0.0));
}

#[test]
fn f_z_routes_agree_before_first_pole() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(20.0, 0.001).unwrap();
    let from_g = f_z_from_g(&sol, &grid);
    let oracle = f_ode_oracle(&p, &grid).unwrap();
    let first_root = find_g_roots(&sol, 20.0)[0];
    let pole = oracle.pole.expect("oracle runs into the first zero of g");
    assert!((pole - first_root).abs() <= 1e-3, "pole {pole} vs root {first_root}");
    let mut compared = 0;
    for (k, t) in grid.times().enumerate() {
        if t >= pole {
            assert!(oracle.f_z[k].is_none());
            continue;
        }
        let (Some(a), Some(b)) = (from_g.f_z[k], oracle.f_z[k]) else { continue };
        if b.norm() > 1e3 {
            continue;
        }
        assert!((a - b).norm() <= 1e-6, "t={t}: {a} vs {b}");
        compared += 1;
    }
    assert!(compared > 5000);
}

#[test]
fn f_w_finite_difference_matches_oracle() {
    for (gw, k) in [(0.9, 0.1), (0.3, 0.23), (2.0, 0.2), (0.5, 0.15)] {
        let p = ModelParams::resonant(gw, k);
        let sol = GSolution::new(p).unwrap();
        let grid = Grid::span(50.0, 0.01).unwrap();
        let oracle = f_ode_oracle(&p, &grid).unwrap();
        assert!(oracle.pole.is_none());
        let f_w = f_w_from_f_z(&f_z_from_g(&sol, &grid).f_z, &grid, k);
        let want = oracle.f_w.as_ref().unwrap();
        assert!(f_w[0].unwrap().norm() <= 1e-8);
        for (j, t) in grid.times().enumerate() {
            let d = (f_w[j].unwrap() - want[j].unwrap()).norm();
            assert!(d <= 1e-6, "({gw},{k}) t={t}: {d:e}");
        }
    }
}

#[test]
fn f_z_starts_with_slope_kappa() {
    for (gw, k) in [(0.9, 0.43), (0.3, 0.23), (2.5, 0.7)] {
        let sol = GSolution::new(ModelParams::resonant(gw, k)).unwrap();
        assert!(f_z_at(&sol, 0.0).unwrap().norm() < 1e-15);
        let h = 1e-6;
        let slope = (f_z_at(&sol, h).unwrap().re - f_z_at(&sol, -h).unwrap().re) / (2.0 * h);
        assert!((slope - k).abs() <= 1e-4 * k, "{slope} vs {k}");
    }
}

#[test]
fn oracle_imaginary_part_stays_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = Grid::span(50.0, 0.01).unwrap();
    for _ in 0..20 {
        let p = ModelParams::resonant(rng.random_range(0.1..=3.0), rng.random_range(0.05..=1.0));
        let sol = GSolution::new(p).unwrap();
        let oracle = f_ode_oracle(&p, &grid).unwrap();
        for (k, t) in grid.times().enumerate() {
            if let Some(f) = oracle.f_z[k] {
                if sol.g(t).abs() > 1e-6 && f.norm() < 1e6 {
                    assert!(f.im.abs() <= 1e-8 * f.norm().max(1.0), "{p:?} t={t}: {f}");
                }
            }
        }
    }
}

#[test]
fn detuned_oracle_runs() {
    let p = ModelParams { omega: 1.5, ..divergent_point() };
    let c = f_ode_oracle(&p, &Grid::span(20.0, 0.01).unwrap()).unwrap();
    assert_eq!(c.f_z[0], Some(C64::new(0.0, 0.0)));
}

#[test]
fn sign_lock_on_fine_grid() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(200.0, 1e-3).unwrap();
    for t in grid.times() {
        let v = sol.eval(t);
        if v.g.abs() <= 1e-9 {
            continue;
        }
        let re = f_z_at(&sol, t).unwrap().re;
        if re.abs() < 1e-10 {
            continue;
        }
        let d_abs_g = v.g.signum() * v.gp;
        assert_eq!(d_abs_g > 0.0, re < 0.0, "t={t}");
    }
}

#[test]
fn random_pairs_never_beat_optimum() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
    for _ in 0..200 {
        let [x, y, z] = random_bloch(&mut rng, 1.0);
        let a = DensityMatrix2::from_bloch(x, y, z);
        let b = DensityMatrix2::from_bloch(-x, -y, -z);
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-12);
        for &t in &times {
            let g = C64::new(sol.g(t), 0.0);
            let d = trace_distance(&closed_form_density(&p, &a, g, t), &closed_form_density(&p, &b, g, t));
            assert!(d <= g.norm() + 1e-8, "t={t}");
        }
    }
}

#[test]
fn equatorial_pair_attains_abs_g() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let grid = Grid::span(30.0, 0.01).unwrap();
    let coeffs = f_z_from_g(&sol, &grid);
    let a = evolve_master_equation(&p, &DensityMatrix2::from_bloch(1.0, 0.0, 0.0), &coeffs).unwrap();
    let b = evolve_master_equation(&p, &DensityMatrix2::from_bloch(-1.0, 0.0, 0.0), &coeffs).unwrap();
    for (k, t) in grid.times().enumerate() {
        assert!((trace_distance(&a.states[k], &b.states[k]) - sol.g(t).abs()).abs() <= 1e-8);
    }
}

#[test]
fn sigma_continuous_across_roots() {
    let p = divergent_point();
    let sol = GSolution::new(p).unwrap();
    let dt = 1e-3;
    let grid = Grid::span(20.0, dt).unwrap();
    let rho0 = initial_state(FRAC_PI_4).unwrap().outer();
    let out = evolve_master_equation(&p, &rho0, &f_z_from_g(&sol, &grid)).unwrap();
    let s = expectations_sigma(&out);
    // Analytic slope bounds from σ_z = 2ρ_ee(0)g² − 1 and |ρ_eg| = |ρ_eg(0)||g|.
    let mut slope_xy: f64 = 0.0;
    let mut slope_z: f64 = 0.0;
    for t in grid.times() {
        let v = sol.eval(t);
        slope_xy = slope_xy.max(2.0 * rho0.eg.norm() * (v.gp.abs() + p.omega * v.g.abs()));
        slope_z = slope_z.max(4.0 * rho0.ee.re * (v.g * v.gp).abs());
    }
    for root in find_g_roots(&sol, 20.0) {
        let k = (root / dt) as usize;
        for j in k.saturating_sub(3)..(k + 3).min(grid.n_steps) {
            assert!((s.x[j + 1] - s.x[j]).abs() <= 10.0 * dt * slope_xy);
            assert!((s.y[j + 1] - s.y[j]).abs() <= 10.0 * dt * slope_xy);
            assert!((s.z[j + 1] - s.z[j]).abs() <= 10.0 * dt * slope_z);
        }
    }
    for k in 0..grid.len() {
        let n = (s.x[k].powi(2) + s.y[k].powi(2) + s.z[k].powi(2)).sqrt();
        assert!(n <= 1.0 + 1e-9);
    }
}

#[test]
fn markov_point_has_no_backflow() {
    let sol = GSolution::new(ModelParams::resonant(0.9, 0.1)).unwrap();
    let grid = Grid::span(200.0, 0.01).unwrap();
    let r = non_markovianity_nt(&sol, &grid);
    assert!(r.n_t.iter().all(|&n| n.abs() <= 1e-9));
    assert!(r.windows.is_empty());
    for t in grid.times() {
        assert!(f_z_at(&sol, t).unwrap().re >= -1e-12, "t={t}");
    }
}

#[test]
fn exception_point_backflows_without_roots() {
    let sol = GSolution::new(ModelParams::resonant(0.3, 0.23)).unwrap();
    let grid = Grid::span(200.0, 0.01).unwrap();
    assert!(find_g_roots(&sol, 200.0).is_empty());
    let r = non_markovianity_nt(&sol, &grid);
    assert!(r.total > 1e-6, "N = {}", r.total);
    assert!(!r.windows.is_empty());
}

#[test]
fn n_t_flat_outside_windows() {
    let sol = GSolution::new(divergent_point()).unwrap();
    let grid = Grid::span(200.0, 0.01).unwrap();
    let r = non_markovianity_nt(&sol, &grid);
    for k in 0..grid.n_steps {
        let (a, b) = (grid.t(k), grid.t(k + 1));
        let inside = r.windows.iter().any(|&(s, e)| a >= s - 1e-12 && b <= e + 1e-12);
        let step = r.n_t[k + 1] - r.n_t[k];
        assert!(step >= 0.0);
        if !inside {
            assert!(step <= 1e-9, "t={a}: {step:e}");
        }
    }
}

#[test]
fn qfi_fixed_points() {
    let sol = GSolution::new(divergent_point()).unwrap();
    for theta in [0.2, FRAC_PI_4, 1.3] {
        assert!((qfi_theta(&sol, theta, 0.0, StateConvention::QfiParameter) - 4.0).abs() < 1e-12);
    }
    let free = GSolution::new(ModelParams::resonant(0.9, 0.0)).unwrap();
    for t in [0.0, 3.0, 50.0] {
        assert!((qfi_theta(&free, 0.7, t, StateConvention::QfiParameter) - 4.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn qfi_fallback_agrees(theta in 0.05f64..3.0, t in 0.0f64..40.0, bloch in any::<bool>()) {
        let sol = GSolution::new(divergent_point()).unwrap();
        let conv = if bloch { StateConvention::Bloch } else { StateConvention::QfiParameter };
        let a = qfi_theta(&sol, theta, t, conv);
        let f = qfi_theta_fd(&sol, theta, t, conv, QFI_FD_STEP);
        if a > 1e-3 {
            prop_assert!((a - f).abs() <= 1e-4 * a, "{a} vs {f}");
        }
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn evolved_states_stay_physical(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, t in 0.0f64..100.0) {
        let r = (x * x + y * y + z * z).sqrt().max(1.0);
        let rho0 = DensityMatrix2::from_bloch(x / r, y / r, z / r);
        let sol = GSolution::new(divergent_point()).unwrap();
        let rho = closed_form_density(&divergent_point(), &rho0, C64::new(sol.g(t), 0.0), t);
        prop_assert!((rho.trace() - 1.0).norm() <= 1e-12);
        prop_assert!(rho.is_hermitian(1e-12));
        prop_assert!(rho.eigenvalues()[0] >= -1e-9);
    }
}
