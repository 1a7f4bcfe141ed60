use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use lensjet_core::descriptor::WarpDescriptor;
use lensjet_core::equimeasurable::{
    build_f1, build_f2, verify_section5, Section5Params, VerifyOptions, DEFAULT_F2_SAMPLES,
};
use lensjet_core::geodesic::chord_between;
use lensjet_core::jet::run_pipeline;
use lensjet_core::lens::{
    build_lens_table_from, chebyshev_grid, compare_lens, level_grid, sublevel_sweep, uniform_grid,
};
use lensjet_core::{
    BoundaryDistanceDataset, LensMethod, LensTable, Side, StripMetric, Verdict, WarpFunction,
};

use crate::output::{Failure, Sink};
use crate::positive;

type Outcome = Result<(bool, Value), Failure>;

fn warp(arg: &str) -> Result<WarpFunction, Failure> {
    Ok(WarpDescriptor::resolve(arg)?.build()?)
}

fn side(s: &str) -> Result<Side, String> {
    match s {
        "bottom" => Ok(Side::Bottom),
        "top" => Ok(Side::Top),
        _ => Err(format!("side must be bottom or top, not '{s}'")),
    }
}

fn unit_bound(s: &str) -> Result<f64, String> {
    match positive(s)? {
        v if v < 1.0 => Ok(v),
        v => Err(format!("{v} is not below 1")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LensCompareArgs {
    /// Preset name or warp JSON file.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    pub directions: u64,
    /// Directions range over (-bound, bound).
    #[arg(long, default_value_t = 0.99, value_parser = unit_bound)]
    pub bound: f64,
    /// Use a uniform grid instead of Chebyshev points.
    #[arg(long)]
    pub uniform: bool,
    #[arg(long, default_value = "bottom", value_parser = side)]
    pub side: Side,
}

fn write_lens(sink: &Sink, tables: &[(&str, &LensTable)]) -> Result<(), Failure> {
    let Some(p) = sink.path("lens.csv") else {
        return Ok(());
    };
    let mut w = csv::Writer::from_path(p)?;
    w.write_record([
        "strip",
        "method",
        "entry_u",
        "T",
        "delta_x",
        "exit_side",
        "exit_u",
    ])?;
    for (strip, t) in tables {
        let method = if t.method == LensMethod::Ode {
            "ode"
        } else {
            "quadrature"
        };
        for r in &t.records {
            w.write_record([
                strip.to_string(),
                method.to_string(),
                format!("{:.16e}", r.entry_u),
                format!("{:.16e}", r.length),
                format!("{:.16e}", r.delta_x),
                r.exit_side.label().to_string(),
                format!("{:.16e}", r.exit_u),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn lens_compare(args: &LensCompareArgs, tol: Option<f64>, sink: &Sink) -> Outcome {
    let tol = tol.unwrap_or(1e-8);
    let ma = StripMetric::new(warp(&args.a)?);
    let mb = StripMetric::new(warp(&args.b)?);
    let n = args.directions as usize;
    let grid = if args.uniform {
        uniform_grid(n, -args.bound, args.bound)
    } else {
        chebyshev_grid(n, args.bound)
    };
    let table = |m: &StripMetric, method| build_lens_table_from(m, &grid, method, args.side);
    let (aq, ao) = (
        table(&ma, LensMethod::Quadrature)?,
        table(&ma, LensMethod::Ode)?,
    );
    let (bq, bo) = (
        table(&mb, LensMethod::Quadrature)?,
        table(&mb, LensMethod::Ode)?,
    );
    write_lens(sink, &[("a", &aq), ("a", &ao), ("b", &bq), ("b", &bo)])?;
    let quad = compare_lens(&aq, &bq)?;
    let ode = compare_lens(&ao, &bo)?;
    let holds = quad.max() <= tol && ode.max() <= tol;
    Ok((
        holds,
        json!({
            "tol": tol,
            "directions": grid.len(),
            "quadrature": quad,
            "ode": ode,
            "method_agreement": { "a": compare_lens(&aq, &ao)?, "b": compare_lens(&bq, &bo)? },
            "max_clairaut_drift": { "a": ao.max_clairaut_drift, "b": bo.max_clairaut_drift },
        }),
    ))
}

#[derive(Debug, Args, Serialize)]
pub struct BuildC1Args {
    /// Start of the blend into the plateau (at least 4).
    #[arg(long, default_value_t = 4.0, value_parser = positive)]
    pub blend_start: f64,
    /// Samples of the rising branch of f2.
    #[arg(long, default_value_t = DEFAULT_F2_SAMPLES as u64, value_parser = clap::value_parser!(u64).range(2..))]
    pub samples: u64,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub levels: u64,
    #[arg(long, default_value_t = 51, value_parser = clap::value_parser!(u64).range(2..))]
    pub directions: u64,
}

pub fn build_c1(args: &BuildC1Args, tol: Option<f64>, sink: &Sink) -> Outcome {
    let p = build_f1(Section5Params {
        blend_start: args.blend_start,
    })?;
    let f2 = build_f2(&p, args.samples as usize)?;
    let mut opts = VerifyOptions {
        levels: args.levels as usize,
        directions: args.directions as usize,
        ..VerifyOptions::default()
    };
    if let Some(t) = tol {
        opts.equimeasure_tol = t;
        opts.lens_tol = t;
    }
    let report = verify_section5(&p, &f2, &opts)?;
    if let Some(d) = WarpDescriptor::from_sampled(&f2) {
        sink.json("f2.json", &d)?;
    }
    sink.json("report.json", &report)?;
    Ok((report.passed, json!({ "options": opts, "report": report })))
}

#[derive(Debug, Args, Serialize)]
pub struct JetRecoverArgs {
    /// Preset name or warp JSON file; distances come from the exact chords.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub warp: Option<String>,
    /// Tabulated distances (CSV with its .json sidecar).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Highest order to recover.
    #[arg(long = "K", default_value_t = 2)]
    pub k: usize,
    /// Half-width of the boundary window (default 5% of the strip width).
    #[arg(long, value_parser = positive, conflicts_with = "data")]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Also tabulate the distances on this many nodes per axis.
    #[arg(long, value_parser = clap::value_parser!(u64).range(4..))]
    pub export_nodes: Option<u64>,
}

/// Default accepted error per order.
const ORDER_TOL: [f64; 4] = [1e-8, 1e-4, 1e-2, 0.2];

pub fn jet_recover(args: &JetRecoverArgs, tol: Option<f64>, sink: &Sink) -> Outcome {
    let ds = match (&args.warp, &args.data) {
        (Some(w), None) => {
            let m = StripMetric::new(warp(w)?);
            let eps = args.eps.unwrap_or(0.05 * m.length());
            BoundaryDistanceDataset::oracle_with_window(m, args.x0, eps)
        }
        (None, Some(path)) => BoundaryDistanceDataset::from_csv(path)?,
        _ => {
            return Err(Failure::Usage(
                "give exactly one of --warp and --data".into(),
            ))
        }
    };
    if let (Some(n), Some(p)) = (args.export_nodes, sink.path("tau.csv")) {
        ds.export_csv(&p, n as usize)?;
    }
    let report = run_pipeline(&ds, args.k)?;
    sink.json("jet.json", &report)?;
    if report.verdict == Verdict::NonconcaveEvidence {
        if let Some(why) = &report.stopped {
            return Err(Failure::Numerical(why.clone()));
        }
    }
    let holds = report.orders.iter().all(|o| {
        let t = tol.unwrap_or(*ORDER_TOL.get(o.k).unwrap_or(&1.0));
        o.abs_err.is_none_or(|e| e <= t)
    });
    Ok((holds, serde_json::to_value(&report)?))
}

#[derive(Debug, Args, Serialize)]
pub struct SublevelArgs {
    #[arg(long)]
    pub a: String,
    /// Second warp; its column is compared with the first.
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub levels: u64,
    /// Level range; defaults to the range of values of the warps.
    #[arg(long, allow_negative_numbers = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hi: Option<f64>,
}

pub fn sublevel(args: &SublevelArgs, tol: Option<f64>, sink: &Sink) -> Outcome {
    let mut ws = vec![warp(&args.a)?];
    if let Some(b) = &args.b {
        ws.push(warp(b)?);
    }
    let lo = args
        .lo
        .unwrap_or_else(|| ws.iter().map(|w| w.range().0).fold(f64::INFINITY, f64::min));
    let hi = args.hi.unwrap_or_else(|| {
        ws.iter()
            .map(|w| w.range().1)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Failure::Usage(format!("empty level range [{lo}, {hi}]")));
    }
    let levels = level_grid(lo, hi, args.levels as usize);
    let refs: Vec<&WarpFunction> = ws.iter().collect();
    let measures = sublevel_sweep(&refs, &levels);
    let rows: Vec<Vec<f64>> = levels
        .iter()
        .zip(&measures)
        .map(|(r, m)| std::iter::once(*r).chain(m.iter().copied()).collect())
        .collect();
    let header: &[&str] = if ws.len() == 2 {
        &["r", "m1", "m2"]
    } else {
        &["r", "m1"]
    };
    sink.csv("sublevel.csv", header, &rows)?;
    if ws.len() == 1 {
        return Ok((true, json!({ "levels": levels.len(), "lo": lo, "hi": hi })));
    }
    let tol = tol.unwrap_or(1e-8);
    let (gap, worst) = measures
        .iter()
        .zip(&levels)
        .map(|(m, r)| ((m[0] - m[1]).abs(), *r))
        .fold((0.0f64, lo), |a, b| if b.0 > a.0 { b } else { a });
    Ok((
        gap <= tol,
        json!({ "levels": levels.len(), "lo": lo, "hi": hi, "tol": tol, "max_gap": gap, "worst_level": worst }),
    ))
}

#[derive(Debug, Args, Serialize)]
pub struct ChordArgs {
    #[arg(long)]
    pub warp: String,
    #[arg(long, allow_negative_numbers = true)]
    pub x1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x2: f64,
}

pub fn chord(args: &ChordArgs, sink: &Sink) -> Outcome {
    let m = StripMetric::new(warp(&args.warp)?);
    let c = chord_between(&m, args.x1, args.x2)?;
    sink.json("chord.json", &c)?;
    Ok((true, serde_json::to_value(c)?))
}
