//! Independent checks of the distance-data pipeline: shooting between
//! displaced endpoints, closed forms, and convergence rates.

use lensjet_core::boundary::{
    normal_derivative_tau, tangential_derivative_tau, BoundaryDistanceDataset,
};
use lensjet_core::geodesic::{chord_between, interior_distance, ShootingOptions};
use lensjet_core::jet::{
    recover_c1, run_pipeline, second_normal_derivatives, stencil_estimate, NormalDerivatives,
};
use lensjet_core::{StripMetric, WarpFunction};

fn exp_metric() -> StripMetric {
    StripMetric::new(WarpFunction::exp_decay(1.0, 1.0).unwrap())
}

fn exp_ds() -> BoundaryDistanceDataset {
    BoundaryDistanceDataset::oracle(exp_metric(), 0.0)
}

// one-sided weights on 0, d, 2d, 3d
const D1: [f64; 3] = [-1.5, 2.0, -0.5];
const D2: [f64; 4] = [2.0, -5.0, 4.0, -1.0];

fn shoot(m: &StripMetric, x: f64, s: f64, y: f64, t: f64) -> f64 {
    interior_distance(m, (x, s), (y, t), &ShootingOptions::for_metric(m)).unwrap()
}

#[test]
fn closed_form_chord_lengths() {
    // f = e^{-y}: displacement 4w / sqrt(1 - w^2), length 4 artanh(w)
    let m = exp_metric();
    for d in [0.002, 0.01, 0.05, 0.3] {
        let c = chord_between(&m, 0.1, 0.1 + d).unwrap();
        let w = d / (16.0 + d * d).sqrt();
        let t = 4.0 * w.atanh();
        assert!(
            (c.length - t).abs() <= 1e-15 * t,
            "d = {d}: {} vs {t}",
            c.length
        );
        let gap = deficit_series(w);
        assert!(
            (c.deficit - gap).abs() <= 1e-12 * gap,
            "d = {d}: {} vs {gap}",
            c.deficit
        );
    }
}

// 4w / sqrt(1 - w^2) - 4 artanh(w), summed termwise to avoid cancellation
fn deficit_series(w: f64) -> f64 {
    let (mut sum, mut central, mut pow) = (0.0, 1.0, w);
    for n in 1..60 {
        central *= (2 * n - 1) as f64 / (2 * n) as f64;
        pow *= w * w;
        sum += pow * (central - 1.0 / (2 * n + 1) as f64);
    }
    4.0 * sum
}

#[test]
fn normal_derivative_matches_shooting() {
    let m = exp_metric();
    let ds = exp_ds();
    let (x, y) = (0.04, 0.0);
    let got = normal_derivative_tau(&ds, x, y).unwrap();
    let dl = 1e-3;
    let fd: f64 = (0..3)
        .map(|i| D1[i] * shoot(&m, x, i as f64 * dl, y, 0.0))
        .sum::<f64>()
        / dl;
    assert!((got - fd).abs() < 1e-5, "{got} vs {fd}");
    assert!(got > -1.0 && got < 0.0);
    let c = ds.chord(x, y).unwrap().unwrap();
    assert!((tangential_derivative_tau(&ds, x, y).unwrap() - c.clairaut).abs() < 1e-6);
}

#[test]
fn second_order_normal_data_matches_shooting() {
    let m = exp_metric();
    let ds = exp_ds();
    let (x, y) = (0.03, 0.0);
    let t = second_normal_derivatives(&ds, x, y, -1.0).unwrap();
    let dl = 2e-3;
    let rho = |s: f64, u: f64| shoot(&m, x, s, y, u).powi(2);
    let grid: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| rho(i as f64 * dl, j as f64 * dl)).collect())
        .collect();
    let rho_x: f64 = (0..3).map(|i| D1[i] * grid[i][0]).sum::<f64>() / dl;
    let rho_y: f64 = (0..3).map(|j| D1[j] * grid[0][j]).sum::<f64>() / dl;
    let rho_xx: f64 = (0..4).map(|i| D2[i] * grid[i][0]).sum::<f64>() / (dl * dl);
    let rho_yy: f64 = (0..4).map(|j| D2[j] * grid[0][j]).sum::<f64>() / (dl * dl);
    let mut rho_xy = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            rho_xy += D1[i] * D1[j] * grid[i][j];
        }
    }
    rho_xy /= dl * dl;
    for (name, a, b) in [
        ("rho_x", t.rho_x, rho_x),
        ("rho_y", t.rho_y, rho_y),
        ("rho_xx", t.rho_xx, rho_xx),
        ("rho_xy", t.rho_xy, rho_xy),
        ("rho_yy", t.rho_yy, rho_yy),
    ] {
        assert!((a - b).abs() < 1e-4, "{name}: {a} vs {b}");
    }
}

#[test]
fn swap_symmetry_of_normal_data() {
    let ds = exp_ds();
    for (x, y) in [(0.02, -0.01), (-0.03, 0.0), (0.01, 0.035)] {
        let a = second_normal_derivatives(&ds, x, y, -1.0).unwrap();
        let b = second_normal_derivatives(&ds, y, x, -1.0).unwrap();
        assert!((a.tau_x - b.tau_y).abs() < 1e-8);
        assert!((a.tau_xx - b.tau_yy).abs() < 1e-8);
        assert!(
            (a.tau_xy - b.tau_xy).abs() < 1e-8,
            "{} vs {}",
            a.tau_xy,
            b.tau_xy
        );
    }
}

#[test]
fn euclidean_coincidence_value() {
    // flat strip, interior pair on a vertical line: rho = (s - t)^2
    let m = StripMetric::new(WarpFunction::flat(1.0).unwrap());
    let dl = 1e-2;
    let rho = |s: f64| shoot(&m, 0.3, 0.5 + s, 0.3, 0.5).powi(2);
    let second = (rho(dl) - 2.0 * rho(0.0) + rho(-dl)) / (dl * dl);
    assert!((second - 2.0).abs() < 1e-8, "{second}");
}

#[test]
fn coincident_sums_vanish_quadratically() {
    // W_k(s) = d^k g_11 / dn^k * s^2 + O(s^4), truth (1, -1, 1, -1)
    let ds = exp_ds();
    let jet = [1.0, -1.0, 1.0];
    for k in 1..=3 {
        for s in [0.02, 0.01] {
            let mut nd = NormalDerivatives::new(&ds, &jet[..k]);
            let w = nd.coincident_sum(k, s, 0.0).unwrap();
            let want = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!(
                (w / (s * s) - want).abs() < 2e-2 * (k * k) as f64,
                "k={k} s={s}: {}",
                w / (s * s)
            );
        }
    }
}

#[test]
fn order_one_stencil_converges_quadratically() {
    let ds = exp_ds();
    let e = |h: f64| stencil_estimate(&ds, &[1.0], 1, h).unwrap() + 1.0;
    for h in [0.02, 0.01] {
        let ratio = e(h) / e(0.5 * h);
        assert!((3.5..4.5).contains(&ratio), "h={h}: ratio {ratio}");
    }
}

#[test]
fn tabulated_round_trip_reproduces_low_orders() {
    let ds = exp_ds();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tau.csv");
    ds.export_csv(&path, 161).unwrap();
    let back = BoundaryDistanceDataset::from_csv(&path).unwrap();
    let a = run_pipeline(&ds, 1).unwrap();
    let b = run_pipeline(&back, 1).unwrap();
    assert_eq!(b.orders.len(), 2, "{:?}", b.stopped);
    for (x, y) in a.orders.iter().zip(&b.orders) {
        assert!(
            (x.value - y.value).abs() < 1e-3,
            "order {}: {} vs {}",
            x.k,
            x.value,
            y.value
        );
    }
    assert!(b.eikonal_residual_max.is_none());
    assert!(recover_c1(&back).is_ok());
}

#[test]
fn quadratic_and_tanh_presets() {
    let quad = BoundaryDistanceDataset::oracle_with_window(
        StripMetric::new(WarpFunction::quadratic(0.4).unwrap()),
        0.0,
        0.05,
    );
    let r = run_pipeline(&quad, 2).unwrap();
    let v = r.values();
    assert!(
        (v[1] + 2.0).abs() < 1e-4 && (v[2] - 2.0).abs() < 1e-2,
        "{v:?}"
    );

    let tanh = BoundaryDistanceDataset::oracle(
        StripMetric::new(WarpFunction::tanh_drop(1.0).unwrap()),
        0.0,
    );
    let r = run_pipeline(&tanh, 2).unwrap();
    assert!(r.values()[2].abs() < 1e-2, "{:?}", r.values());
}
