use std::process::{Command, Output};

use serde_json::Value;

fn lensjet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lensjet"))
        .args(args)
        .env_remove("LENSJET_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn lens_compare_exit_codes() {
    let same = lensjet(&[
        "lens-compare",
        "--a",
        "cos1",
        "--b",
        "cos2",
        "--directions",
        "101",
        "--tol",
        "1e-8",
    ]);
    assert_eq!(code(&same), 0, "{}", String::from_utf8_lossy(&same.stderr));
    let s = summary(&same);
    assert!(s["result"]["quadrature"]["max_dt"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["config"]["command"]["name"], "lens-compare");

    assert_eq!(
        code(&lensjet(&["lens-compare", "--a", "cos1", "--b", "flat"])),
        1
    );

    let twin = summary(&lensjet(&["lens-compare", "--a", "cos1", "--b", "cos1"]));
    assert_eq!(twin["result"]["quadrature"]["max_dt"], 0.0);
    assert_eq!(twin["result"]["ode"]["max_ddx"], 0.0);
}

#[test]
fn lens_csv_is_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = lensjet(&[
        "lens-compare",
        "--a",
        "cos1",
        "--b",
        "cos2",
        "--directions",
        "5",
        "--out",
        out,
    ]);
    assert_eq!(code(&r), 0);
    let text = std::fs::read_to_string(dir.path().join("lens.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strip,method,entry_u,T,delta_x,exit_side,exit_u"
    );
    assert_eq!(lines.count(), 20);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn build_c1_verifies_and_is_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let a = lensjet(&["build-c1", "--out", d1.path().to_str().unwrap()]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let s = summary(&a);
    let report = &s["result"]["report"];
    assert!(report["f2_slope_at_0"].as_f64().unwrap().abs() <= 1e-4);
    assert!(report["equimeasure_gap"].as_f64().unwrap() <= 1e-6);

    let b = lensjet(&[
        "build-c1",
        "--out",
        d2.path().to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert_eq!(code(&b), 0);
    for name in ["f2.json", "report.json"] {
        let x = std::fs::read(d1.path().join(name)).unwrap();
        let y = std::fs::read(d2.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let f2: Value =
        serde_json::from_slice(&std::fs::read(d1.path().join("f2.json")).unwrap()).unwrap();
    assert_eq!(f2["kind"], "sampled");
}

#[test]
fn jet_recover_oracle_and_concave() {
    let r = lensjet(&["jet-recover", "--warp", "exp-decay", "--K", "2"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let s = summary(&r);
    let orders = s["result"]["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 3);
    for (o, tol) in orders.iter().zip([1e-8, 1e-4, 1e-2]) {
        assert!(o["abs_err"].as_f64().unwrap() <= tol, "{o}");
    }
    assert_eq!(s["result"]["verdict"], "nonconcave-evidence");

    let c = lensjet(&["jet-recover", "--warp", "cos1"]);
    assert_eq!(code(&c), 0);
    assert_eq!(summary(&c)["result"]["verdict"], "no-evidence");
}

#[test]
fn jet_recover_fails_numerically_past_the_stable_orders() {
    let r = lensjet(&["jet-recover", "--warp", "exp-decay", "--K", "4"]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("order 4"));
}

#[test]
fn jet_recover_from_exported_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let e = lensjet(&[
        "jet-recover",
        "--warp",
        "exp-decay",
        "--K",
        "1",
        "--export-nodes",
        "161",
        "--out",
        out,
    ]);
    assert_eq!(code(&e), 0);
    let table = dir.path().join("tau.csv");
    assert!(table.exists() && dir.path().join("tau.json").exists());
    let r = lensjet(&["jet-recover", "--data", table.to_str().unwrap(), "--K", "1"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let s = summary(&r);
    assert_eq!(s["result"]["source"], "tabulated");
    let c1 = s["result"]["orders"][1]["value"].as_f64().unwrap();
    assert!((c1 + 1.0).abs() < 1e-3, "{c1}");
}

#[test]
fn sublevel_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = lensjet(&[
        "sublevel", "--a", "cos1", "--b", "cos2", "--levels", "64", "--out", out,
    ]);
    assert_eq!(code(&r), 0);
    assert!(summary(&r)["result"]["max_gap"].as_f64().unwrap() <= 1e-8);
    let text = std::fs::read_to_string(dir.path().join("sublevel.csv")).unwrap();
    assert!(text.starts_with("r,m1,m2\n"));
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() <= 1e-8);
    }

    let low = tempfile::tempdir().unwrap();
    let r = lensjet(&[
        "sublevel",
        "--a",
        "cos1",
        "--lo",
        "0.1",
        "--hi",
        "0.9",
        "--levels",
        "4",
        "--out",
        low.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0);
    let text = std::fs::read_to_string(low.path().join("sublevel.csv")).unwrap();
    assert!(text.starts_with("r,m1\n"));
    assert!(
        text.lines()
            .skip(1)
            .all(|l| l.ends_with(",0.0000000000000000e0")),
        "{text}"
    );
}

#[test]
fn chord_query() {
    let r = lensjet(&[
        "chord",
        "--warp",
        "exp-decay",
        "--x1",
        "-0.05",
        "--x2",
        "0.05",
    ]);
    assert_eq!(code(&r), 0);
    let s = summary(&r);
    let want = 4.0 * (0.1f64 / (16.0f64 + 0.01).sqrt()).atanh();
    assert!((s["result"]["length"].as_f64().unwrap() - want).abs() < 1e-13);
    assert_eq!(
        code(&lensjet(&[
            "chord", "--warp", "flat", "--x1", "0", "--x2", "0.1"
        ])),
        3
    );
}

#[test]
fn usage_errors() {
    assert_eq!(code(&lensjet(&["jet-recover", "--warp", "nope"])), 2);
    assert_eq!(code(&lensjet(&["lens-compare", "--a", "cos1"])), 2);
    assert_eq!(
        code(&lensjet(&["sublevel", "--a", "cos1", "--tol", "-1"])),
        2
    );
    assert_eq!(
        code(&lensjet(&[
            "jet-recover",
            "--warp",
            "cos1",
            "--data",
            "x.csv"
        ])),
        2
    );
    let r = Command::new(env!("CARGO_BIN_EXE_lensjet"))
        .args(["sublevel", "--a", "cos1"])
        .env("LENSJET_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&r), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |t: &str| {
        summary(&lensjet(&[
            "lens-compare",
            "--a",
            "exp-decay",
            "--b",
            "tanh",
            "--directions",
            "33",
            "--threads",
            t,
        ]))["result"]
            .clone()
    };
    assert_eq!(run("1"), run("4"));
}
