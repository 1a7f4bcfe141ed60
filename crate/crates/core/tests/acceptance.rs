//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lensjet_core::boundary::detect_nonconcave;
use lensjet_core::descriptor::{WarpDescriptor, PRESET_NAMES};
use lensjet_core::equimeasurable::{
    build_f1, build_f2, verify_section5, Section5Params, VerifyOptions, DEFAULT_F2_SAMPLES,
};
use lensjet_core::geodesic::hessian_rho_check;
use lensjet_core::jet::{recover_symmetric_tensor, run_pipeline};
use lensjet_core::lens::{build_lens_table, chebyshev_grid, compare_lens, uniform_grid};
use lensjet_core::warp::jet_compare;
use lensjet_core::{
    BoundaryDistanceDataset, JetComparison, LensMethod, Side, StripMetric, Verdict, WarpFunction,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn preset(name: &str) -> StripMetric {
    StripMetric::new(WarpDescriptor::preset(name).build().unwrap())
}

fn lens_equivalence() -> Outcome {
    let grid = uniform_grid(101, -0.99, 0.99);
    let a = build_lens_table(&preset("cos1"), &grid, LensMethod::Quadrature).map_err(err)?;
    let b = build_lens_table(&preset("cos2"), &grid, LensMethod::Quadrature).map_err(err)?;
    let d = compare_lens(&a, &b).map_err(err)?;
    check(
        d.max_dt <= 1e-8 && d.max_ddx <= 1e-8,
        format!("sup|dT| = {:.2e}, sup|d dx| = {:.2e}", d.max_dt, d.max_ddx),
    )
}

fn jet_difference() -> Outcome {
    let j1 = preset("cos1")
        .ground_truth_jet(Side::Bottom, 3)
        .map_err(err)?;
    let j2 = preset("cos2")
        .ground_truth_jet(Side::Bottom, 3)
        .map_err(err)?;
    let first = jet_compare(&j1, &j2, 1e-12).map_err(err)?;
    let (a, b) = (j1.values[2], j2.values[2]);
    check(
        first == JetComparison::FirstDifference(2)
            && (a - 1.0).abs() < 1e-14
            && (b - 4.0).abs() < 1e-14,
        format!("{first:?}, order-2 values {a} vs {b}"),
    )
}

fn section5() -> Outcome {
    let p = build_f1(Section5Params::default()).map_err(err)?;
    let f2 = build_f2(&p, DEFAULT_F2_SAMPLES).map_err(err)?;
    let r = verify_section5(&p, &f2, &VerifyOptions::default()).map_err(err)?;
    let lens = r.lens.map_or(f64::INFINITY, |d| d.max());
    check(
        r.equimeasure_gap <= 1e-6
            && (r.f1_slope_at_0 - 1.0).abs() <= 1e-6
            && r.f2_slope_at_0.abs() <= 1e-4
            && lens <= 1e-6,
        format!(
            "measure gap {:.2e} over {} levels, f1'(0) = {:.9}, f2'(0) = {:.2e}, lens sup {:.2e}",
            r.equimeasure_gap, r.levels, r.f1_slope_at_0, r.f2_slope_at_0, lens
        ),
    )
}

fn jet_recovery() -> Outcome {
    let exp = BoundaryDistanceDataset::oracle_with_window(
        StripMetric::new(WarpFunction::exp_decay(1.0, 1.0).map_err(err)?),
        0.0,
        0.05,
    );
    let quad = BoundaryDistanceDataset::oracle_with_window(
        StripMetric::new(WarpFunction::quadratic(0.4).map_err(err)?),
        0.0,
        0.05,
    );
    let re = run_pipeline(&exp, 3).map_err(err)?;
    let rq = run_pipeline(&quad, 2).map_err(err)?;
    let (e, q) = (re.values(), rq.values());
    if e.len() < 4 || q.len() < 3 {
        return Err(format!(
            "stopped early: {:?} / {:?}",
            re.stopped, rq.stopped
        ));
    }
    check(
        (e[0] - 1.0).abs() <= 1e-8
            && (e[1] + 1.0).abs() <= 1e-4
            && (e[2] - 1.0).abs() <= 1e-2
            && (e[3] + 1.0).abs() <= 0.2
            && (q[1] + 2.0).abs() <= 1e-4
            && (q[2] - 2.0).abs() <= 1e-2,
        format!(
            "exp: [{:.10}, {:.8}, {:.6}, {:.4}], quadratic: [{:.8}, {:.6}]",
            e[0], e[1], e[2], e[3], q[1], q[2]
        ),
    )
}

fn mechanisms() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let grid = chebyshev_grid(50, 0.99);
    let (mut drift, mut lens_gap) = (0.0f64, 0.0f64);
    for name in PRESET_NAMES.into_iter().filter(|n| *n != "flat") {
        let m = preset(name);
        let o = build_lens_table(&m, &grid, LensMethod::Ode).map_err(err)?;
        drift = drift.max(o.max_clairaut_drift.unwrap_or(f64::INFINITY));
        let q = build_lens_table(&m, &grid, LensMethod::Quadrature).map_err(err)?;
        lens_gap = lens_gap.max(compare_lens(&q, &o).map_err(err)?.max());
    }
    ok &= drift <= 1e-9 && lens_gap <= 1e-7;
    notes.push(format!(
        "Clairaut drift {drift:.2e}, quadrature vs ODE {lens_gap:.2e}"
    ));

    let mut eik = 0.0f64;
    for w in [
        WarpFunction::exp_decay(1.0, 1.0),
        WarpFunction::quadratic(0.4),
        WarpFunction::tanh_drop(1.0),
    ] {
        let ds = BoundaryDistanceDataset::oracle_with_window(
            StripMetric::new(w.map_err(err)?),
            0.0,
            0.05,
        );
        let r = run_pipeline(&ds, 0).map_err(err)?;
        eik = eik.max(r.eikonal_residual_max.unwrap_or(f64::INFINITY));
    }
    ok &= eik <= 1e-6;
    notes.push(format!("eikonal residual {eik:.2e}"));

    for (name, p, v) in [
        ("cos1", (0.0, 1.0), (0.6, 0.8)),
        ("exp-decay", (0.2, 0.5), (1.0, 0.3)),
    ] {
        let m = preset(name);
        let gap = |h: f64| hessian_rho_check(&m, p, v, h).map(|(l, r)| (r - l).abs());
        let (g1, g2) = (gap(0.04).map_err(err)?, gap(0.02).map_err(err)?);
        let ratio = g1 / g2;
        ok &= (3.5..=4.5).contains(&ratio);
        notes.push(format!("{name} hessian ratio {ratio:.3}"));
    }
    check(ok, notes.join(", "))
}

fn tensor_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for n in 2..=4 {
        for _ in 0..20 {
            let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let a = &b + b.transpose();
            let count = n * (n + 1) / 2 + 2;
            let samples: Vec<(Vec<f64>, f64)> = (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let x = nalgebra::DVector::from_column_slice(&v);
                    let q = (x.transpose() * &a * &x)[(0, 0)];
                    (v, q)
                })
                .collect();
            let got = recover_symmetric_tensor(&samples, n).map_err(err)?;
            worst = worst.max((got - &a).amax());
        }
    }
    check(
        worst <= 1e-10,
        format!("60 trials, max entry error {worst:.2e}"),
    )
}

fn detector() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in PRESET_NAMES {
        let m = preset(name);
        let sff = m.second_fundamental_form(Side::Bottom);
        let ds = BoundaryDistanceDataset::oracle(m, 0.0);
        let (verdict, _) = detect_nonconcave(&ds, 1e-9).map_err(err)?;
        let expect = if sff > 1e-4 {
            Verdict::NonconcaveEvidence
        } else {
            Verdict::NoEvidence
        };
        if verdict != expect {
            ok = false;
            notes.push(format!("{name}: {} with II = {sff:.2e}", verdict.label()));
        }
        match name {
            "cos1" | "flat" => ok &= verdict == Verdict::NoEvidence,
            "exp-decay" => ok &= verdict == Verdict::NonconcaveEvidence,
            _ => {}
        }
    }
    check(
        ok,
        if notes.is_empty() {
            format!("{} presets agree with II sign", PRESET_NAMES.len())
        } else {
            notes.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        (
            "1 lens equivalence",
            lens_equivalence,
            Duration::from_secs(5),
        ),
        ("2 jet difference", jet_difference, Duration::from_secs(1)),
        ("3 C1 construction", section5, Duration::from_secs(30)),
        ("4 jet recovery", jet_recovery, Duration::from_secs(60)),
        ("5 mechanism checks", mechanisms, Duration::MAX),
        ("6 tensor solver", tensor_solver, Duration::from_secs(1)),
        ("7 concavity detector", detector, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let t = Instant::now();
        let out = run();
        let el = t.elapsed();
        let (tag, detail) = match out {
            Ok(d) if el <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d} (over time budget)")),
            Err(d) => ("FAIL", d),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "{tag} criterion {name}: {detail} [{:.2} s]",
            el.as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
