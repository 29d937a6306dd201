//! End-to-end acceptance suite.
//!
//! Every criterion runs the shipped configs in `configs/acceptance/` through the
//! `nab2lab` binary, re-checks the CSV against fixed tolerances and prints one
//! line. The target exits nonzero if any line reports FAIL. It has its own `main`
//! so the lines are printed by a plain `cargo test`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance")
}

struct Table {
    rows: Vec<HashMap<String, String>>,
    elapsed: Duration,
    bytes: Vec<u8>,
}

impl Table {
    fn points(&self) -> impl Iterator<Item = &HashMap<String, String>> {
        self.rows.iter().filter(|r| r["record"] == "point")
    }

    fn summaries(&self) -> impl Iterator<Item = &HashMap<String, String>> {
        self.rows.iter().filter(|r| r["record"] == "summary")
    }
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or(f64::NAN)
}

fn vector(row: &HashMap<String, String>, col: &str) -> Vec<f64> {
    row[col].split(';').map(|v| v.parse().unwrap_or(f64::NAN)).collect()
}

fn run(config: &str, extra: &[&str]) -> Table {
    let path = config_dir().join(config);
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_nab2lab"))
        .arg("run")
        .arg(&path)
        .args(extra)
        .env("NAB2LAB_LOG", "quiet")
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    assert!(out.status.success(), "{config}: exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().expect("header").clone();
    let rows = reader
        .records()
        .map(|r| {
            let r = r.expect("well-formed row");
            headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect();
    Table { rows, elapsed, bytes: out.stdout }
}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Verdict {
    Verdict { ok, detail }
}

fn worst<'a>(rows: impl Iterator<Item = &'a HashMap<String, String>>, col: &str) -> (usize, f64) {
    rows.fold((0, 0.0f64), |(n, m), r| {
        let v = num(r, col);
        (n + 1, m.max(if v.is_nan() { f64::INFINITY } else { v.abs() }))
    })
}

fn c1() -> Verdict {
    let t = run("c01_abelian_stokes.cfg", &[]);
    let (n, dev) = worst(t.points(), "deviation");
    let fast = t.elapsed < Duration::from_secs(5);
    verdict(n == 20 && dev <= 1e-9 && fast, format!("{n} cases, max |obstruction - quadrature| = {dev:.2e} (tol 1e-9), {:.2?} (< 5 s)", t.elapsed))
}

fn c2() -> Verdict {
    let t = run("c02_constant_area.cfg", &[]);
    let obs: Vec<f64> = t.points().flat_map(|r| vector(r, "obstruction")).collect();
    let ok = obs.len() == 1 && (obs[0] - 0.5).abs() <= 1e-12;
    verdict(ok, format!("obstruction = {:?} (expected 0.5 within 1e-12)", obs))
}

fn c3() -> Verdict {
    let mut count = 0;
    let mut max = 0.0f64;
    for cfg in ["c01_abelian_stokes.cfg", "c02_constant_area.cfg", "c03_nonabelian_residual.cfg"] {
        let (n, r) = worst(run(cfg, &[]).points(), "residual");
        count += n;
        max = max.max(r);
    }
    verdict(count == 31 && max <= 1e-10, format!("{count} solutions, max residual = {max:.2e} (tol 1e-10)"))
}

fn c4() -> Verdict {
    let t = run("c04_pure_gauge.cfg", &[]);
    let (n, ratio) = worst(t.summaries(), "ratio");
    let fast = t.elapsed < Duration::from_secs(30);
    verdict(n > 0 && ratio <= 0.1 && fast, format!("{n} gauges, max ratio |obs(K=10)|/|obs(K=4)| = {ratio:.2e} (tol 0.1), {:.2?} (< 30 s)", t.elapsed))
}

fn c5() -> Verdict {
    let t = run("c05_triangle_orders.cfg", &[]);
    let ranges = [(0.8, 1.3), (1.8, 2.3), (2.7, 3.3)];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut control = f64::NEG_INFINITY;
    let mut n = 0;
    let mut ok = true;
    for r in t.summaries() {
        n += 1;
        let s = vector(r, "slopes");
        ok &= s.len() == 3;
        for k in 0..s.len().min(3) {
            lo[k] = lo[k].min(s[k]);
            hi[k] = hi[k].max(s[k]);
            ok &= s[k] >= ranges[k].0 && s[k] <= ranges[k].1;
        }
        let c = num(r, "control_slope");
        control = control.max(c);
        ok &= c <= 1.3;
    }
    ok &= n == 10 && t.elapsed < Duration::from_secs(10);
    verdict(
        ok,
        format!(
            "{n} datasets, slopes I1 [{:.2}, {:.2}] I2 [{:.2}, {:.2}] I3 [{:.2}, {:.2}], control I2 slope <= {control:.2}, {:.2?} (< 10 s)",
            lo[0], hi[0], lo[1], hi[1], lo[2], hi[2], t.elapsed
        ),
    )
}

fn c6() -> Verdict {
    let t = run("c06_bch_oracle.cfg", &[]);
    let so3 = t.points().filter(|r| r["algebra"] == "so3").count();
    let sl2 = t.points().filter(|r| r["algebra"] == "sl2").count();
    let (_, d) = worst(t.points(), "discrepancy");
    let fast = t.elapsed < Duration::from_secs(20);
    verdict(so3 == 10 && sl2 == 10 && d <= 1e-6 && fast, format!("so3 {so3} + sl2 {sl2} paths, max discrepancy = {d:.2e} (tol 1e-6), {:.2?} (< 20 s)", t.elapsed))
}

fn slope_of(cfg: &str) -> f64 {
    run(cfg, &[]).summaries().map(|r| num(r, "slope")).next().unwrap_or(f64::NAN)
}

fn c7() -> Verdict {
    let s = slope_of("c07_bch_second_order.cfg");
    verdict(s >= 2.7, format!("third-order residual slope = {s:.3} (>= 2.7)"))
}

fn c8() -> Verdict {
    let s = slope_of("c08_loop_area.cfg");
    verdict(s >= 2.7, format!("loop minus area-bracket slope = {s:.3} (>= 2.7)"))
}

fn c9() -> Verdict {
    let t = run("c09_gauge_covariance.cfg", &[]);
    let (n, d) = worst(t.points(), "deviation");
    verdict(n == 20 && d <= 1e-10, format!("{n} gauges, max coefficient deviation = {d:.2e} (tol 1e-10)"))
}

fn c10() -> Verdict {
    let mut ok = true;
    let mut errs = Vec::new();
    for cfg in ["c10_transport_abelian.cfg", "c10_transport_conjugation.cfg"] {
        let t = run(cfg, &[]);
        ok &= t.points().all(|r| (num(r, "step") - 1e-3).abs() < 1e-15);
        let (n, e) = worst(t.points(), "error");
        ok &= n > 0 && e <= 1e-8;
        errs.push(e);
    }
    let slopes: Vec<f64> = run("c10_transport_order.cfg", &[]).summaries().map(|r| num(r, "slope")).collect();
    let min_slope = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    ok &= !slopes.is_empty() && min_slope >= 3.7;
    verdict(ok, format!("abelian error {:.2e}, conjugation error {:.2e} (tol 1e-8), min RK4 slope {min_slope:.3} (>= 3.7)", errs[0], errs[1]))
}

fn c11() -> Verdict {
    let t = run("c11_one_dim.cfg", &[]);
    let (n, transported) = worst(t.points(), "transported_norm");
    let random = t.points().map(|r| num(r, "random_norm")).fold(f64::INFINITY, f64::min);
    verdict(
        n > 0 && transported <= 1e-10 && random > 1e-6,
        format!("{n} paths, transported data {transported:.2e} (tol 1e-10), random data >= {random:.2e} (nonzero)"),
    )
}

fn c12() -> Verdict {
    let mut configs: Vec<String> = std::fs::read_dir(config_dir())
        .expect("config dir")
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".cfg"))
        .collect();
    configs.sort();
    let differing: Vec<&String> = configs.iter().filter(|c| run(c, &[]).bytes != run(c, &["--jobs", "1"]).bytes).collect();
    verdict(!configs.is_empty() && differing.is_empty(), format!("{} configs run twice (all threads, then one), {} differ", configs.len(), differing.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("abelian Stokes reproduction", c1),
        ("constant 2-form obstruction", c2),
        ("disk solver self-residual", c3),
        ("pure-gauge convergence", c4),
        ("triangle integral orders", c5),
        ("BCH against adjoint log", c6),
        ("BCH second-order term", c7),
        ("area-commutator law", c8),
        ("gauge covariance", c9),
        ("transport oracles and order", c10),
        ("one-dimensional obstruction", c11),
        ("end-to-end determinism", c12),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("criterion {:>2} {:<30} {}  {}", i + 1, name, if v.ok { "PASS" } else { "FAIL" }, v.detail);
        if !v.ok {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 12 criteria pass");
}
