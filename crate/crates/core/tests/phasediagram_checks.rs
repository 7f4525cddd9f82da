use nmgeo::gfunction::{cubic_discriminant, cubic_roots, find_g_roots, GSolution};
use nmgeo::phasediagram::{
    blue_boundary, classify_point, green_boundary, sweep, tangency_boundary, AxisRange, Region, SweepConfig,
    JOIN_GAMMA, NM_THRESHOLD,
};
use nmgeo::ModelParams;

#[test]
fn green_line_at_reference_memory() {
    assert!((green_boundary(0.9).unwrap() - 4.86f64.sqrt() / 6.0).abs() < 1e-15);
    assert!(green_boundary(1e-9).unwrap() < 1e-4);
    assert!(green_boundary(2.3).is_err());
}

#[test]
fn classifier_follows_green_line() {
    let green = green_boundary(0.9).unwrap();
    let kappas = AxisRange::new(0.02, 0.6, 0.02).unwrap().values();
    let cells: Vec<_> = kappas.iter().map(|&k| classify_point(0.9, k, 200.0).unwrap()).collect();
    let rank = |r: Region| match r {
        Region::Markov => 0,
        Region::NonMarkovNonDivergent => 1,
        Region::NonMarkovDivergent => 2,
    };
    assert!(cells.windows(2).all(|w| rank(w[0].region) <= rank(w[1].region)));
    let first_div = cells.iter().position(|c| c.region == Region::NonMarkovDivergent).unwrap();
    assert!(cells[..first_div].iter().any(|c| c.region == Region::NonMarkovNonDivergent));
    assert!(cells[0].region == Region::Markov);
    assert!((kappas[first_div] - green).abs() <= 0.02, "{} vs {green}", kappas[first_div]);
}

#[test]
fn divergence_band_follows_blue_line() {
    for gw in AxisRange::new(1.72, 3.0, 0.08).unwrap().values() {
        let blue = blue_boundary(gw).unwrap();
        for k in AxisRange::new(0.02, 0.6, 0.02).unwrap().values() {
            if (k - blue).abs() <= 0.02 {
                continue;
            }
            let c = classify_point(gw, k, 200.0).unwrap();
            assert_eq!(c.region == Region::NonMarkovDivergent, k > blue, "({gw}, {k}) blue={blue}");
        }
    }
}

#[test]
fn blue_line_is_discriminant_zero() {
    for gw in [JOIN_GAMMA, 1.8, 2.2, 2.6, 3.0] {
        let k = blue_boundary(gw).unwrap();
        let p = ModelParams::resonant(gw, k);
        let d = cubic_discriminant(&p);
        // Both terms vanish together at the join, so compare against γ_w⁶,
        // the homogeneous degree of the expression.
        let t1 = (gw * (36.0 * k * k - 9.0 * gw + 4.0 * gw * gw)).powi(2);
        let t2 = 2.0 * (6.0 * k * k + 3.0 * gw - 2.0 * gw * gw).abs().powi(3);
        let scale = t1.max(t2).max(gw.powi(6));
        assert!(d.abs() <= 1e-6 * scale, "γ={gw}: D={d:e}");
        // A repeated root appears there.
        let r = cubic_roots(&p).unwrap();
        let close = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).any(|(i, j)| (r[i] - r[j]).norm() < 1e-3);
        assert!(close, "{r:?}");
    }
    assert!(blue_boundary(1.5).is_err() && blue_boundary(3.1).is_err());
}

#[test]
fn tangency_point_solves_both_equations() {
    for gw in [0.1, 0.5, 0.9, 1.5] {
        let tan = tangency_boundary(gw).unwrap();
        assert!(tan.gp.abs() <= 1e-9 && tan.gpp.abs() <= 1e-9, "γ={gw}: {tan:?}");
        let v = GSolution::new(ModelParams::resonant(gw, tan.kappa)).unwrap().eval(tan.t);
        assert!(v.gp.abs() <= 1e-9 && v.gpp.abs() <= 1e-9);
    }
}

#[test]
fn tangency_separates_markov_from_non_markov() {
    for gw in [0.1, 0.3, 0.5, 0.9, 1.2, 1.6] {
        let k = tangency_boundary(gw).unwrap().kappa;
        let below = classify_point(gw, 0.9 * k, 200.0).unwrap();
        let above = classify_point(gw, 1.1 * k, 200.0).unwrap();
        assert!(below.n_total <= 1e-9, "γ={gw}: N below = {:e}", below.n_total);
        assert_eq!(below.region, Region::Markov);
        assert!(above.n_total > NM_THRESHOLD, "γ={gw}: N above = {:e}", above.n_total);
    }
    assert_ne!(classify_point(0.5, 0.4, 200.0).unwrap().region, Region::Markov);
}

#[test]
fn divergent_cells_carry_verified_roots() {
    let cfg = SweepConfig {
        gamma_w: AxisRange::new(0.1, 3.0, 0.1).unwrap(),
        kappa: AxisRange::new(0.05, 1.0, 0.05).unwrap(),
        t_max: 200.0,
    };
    let rows = sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 30 * 20);
    for r in &rows {
        let c = r.cell.as_ref().unwrap();
        if let Some(t) = c.t_first_divergence {
            assert_eq!(c.region, Region::NonMarkovDivergent);
            let sol = GSolution::new(ModelParams::resonant(r.gamma_w, r.kappa)).unwrap();
            assert!(sol.g(t).abs() <= 1e-8);
            assert_eq!(find_g_roots(&sol, 200.0)[0], t);
        }
    }
}

/// The three region invariants, checked on every cell of a sweep across the
/// divergent band. Cells just above the blue line at large γ_w have their first
/// zero of g late in the window, where |g| has already decayed, so N_total can
/// sit far below the non-Markovian threshold. This test reports those cells.
#[test]
fn region_invariants_hold_across_blue_band() {
    let cfg = SweepConfig {
        gamma_w: AxisRange::new(1.7, 3.0, 0.1).unwrap(),
        kappa: AxisRange::new(0.01, 1.0, 0.01).unwrap(),
        t_max: 200.0,
    };
    let mut broken = Vec::new();
    for r in sweep(&cfg).unwrap() {
        let c = r.cell.unwrap();
        let ok = match c.region {
            Region::Markov => c.n_total <= NM_THRESHOLD && c.t_first_divergence.is_none(),
            Region::NonMarkovDivergent => c.t_first_divergence.is_some() && c.n_total > NM_THRESHOLD,
            Region::NonMarkovNonDivergent => c.n_total > NM_THRESHOLD && c.t_first_divergence.is_none(),
        };
        if !ok {
            broken.push(format!("({}, {}) {:?} t0={:?} N={:e}", r.gamma_w, r.kappa, c.region, c.t_first_divergence, c.n_total));
        }
    }
    assert!(broken.is_empty(), "{} cells violate the region invariants:\n{}", broken.len(), broken.join("\n"));
}

#[test]
fn sweep_rows_in_grid_order() {
    let cfg = SweepConfig {
        gamma_w: AxisRange::new(0.3, 1.2, 0.1).unwrap(),
        kappa: AxisRange::new(0.1, 1.0, 0.1).unwrap(),
        t_max: 200.0,
    };
    let rows = sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r.cell.is_ok()));
    let again = nmgeo::phasediagram::sweep_with_threads(&cfg, 3).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!((a.gamma_w, a.kappa), (b.gamma_w, b.kappa));
        assert_eq!(a.cell, b.cell);
    }
}
