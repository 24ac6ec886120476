//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use normality_core::expr::random::{random_expression, RandomSpec};
use normality_core::linalg::relative_deviation;
use normality_core::{PhasePoint, Rep};
use normality_lab::{load_system_file, run_checks, CheckId, Report, RunConfig, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240917;

/// Fixtures that define genuine systems (the mutated one does not).
const SYSTEMS: [&str; 8] = ["identity", "cubic", "lagrangian", "extended", "geodesic", "shear", "circle", "gauged"];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.toml"))
}

fn run(name: &str, checks: &[CheckId], samples: usize) -> Report {
    let file = load_system_file(&fixture(name)).unwrap_or_else(|e| panic!("{e}"));
    let cfg = RunConfig { checks: Some(checks.to_vec()), samples, seed: SEED, ..RunConfig::default() };
    run_checks(&file, &cfg)
}

/// Largest residual over rows whose equation satisfies `pick`; error rows
/// count as infinite.
fn worst(report: &Report, pick: impl Fn(&str) -> bool) -> f64 {
    report
        .checks
        .iter()
        .flat_map(|c| c.rows.iter())
        .filter(|r| pick(&r.equation) || r.verdict == Verdict::Error)
        .map(|r| if r.verdict == Verdict::Error || r.residual.is_nan() { f64::INFINITY } else { r.residual })
        .fold(0.0, f64::max)
}

fn error_count(report: &Report) -> usize {
    report.checks.iter().map(|c| c.summary.errors + usize::from(c.error.is_some())).sum()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn metric_duality() -> Outcome {
    let (mut duality, mut round_trip, mut errors): (f64, f64, usize) = (0.0, 0.0, 0);
    for name in ["identity", "cubic", "lagrangian"] {
        let r = run(name, &[CheckId::Metric], 200);
        duality = duality.max(worst(&r, |e| e == "metric-duality"));
        round_trip = round_trip.max(worst(&r, |e| e == "legendre-round-trip"));
        errors += error_count(&r);
    }
    outcome(
        duality < 1e-9 && round_trip < 1e-10 && errors == 0,
        format!("3 systems x 200 points: |g g^-1 - I| {duality:.2e} (< 1e-9), round trip {round_trip:.2e} (< 1e-10)"),
    )
}

fn transport() -> Outcome {
    let ids = ["vertical-v-via-p", "vertical-p-via-v", "horizontal-p-via-v", "horizontal-v-via-p"];
    let mut dev: f64 = 0.0;
    let mut errors = 0;
    for name in SYSTEMS {
        // 4 random fields per point, so 20 points give 80 fields per system
        let r = run(name, &[CheckId::Transport], 20);
        dev = dev.max(worst(&r, |e| ids.contains(&e)));
        errors += error_count(&r);
    }
    outcome(
        dev < 1e-7 && errors == 0,
        format!("{} systems x 80 random rank-0/1 fields: max relative deviation {dev:.2e} (< 1e-7)", SYSTEMS.len()),
    )
}

fn curvature() -> Outcome {
    let r = run("extended", &[CheckId::Transport], 100);
    let d = worst(&r, |e| e == "dynamic-curvature-relation");
    let c = worst(&r, |e| e == "curvature-relation");
    outcome(
        d < 1e-7 && c < 1e-7 && error_count(&r) == 0,
        format!("fiber-dependent connection, 100 points: D relation {d:.2e}, R relation {c:.2e} (< 1e-7)"),
    )
}

fn cross_representation() -> Outcome {
    let mut dev: f64 = 0.0;
    let mut errors = 0;
    for name in SYSTEMS {
        let r = run(name, &[CheckId::Cross], 100);
        dev = dev.max(worst(&r, |e| e.starts_with("cross-")));
        errors += error_count(&r);
    }
    let m = run("mutated", &[CheckId::Cross], 100);
    let detected = worst(&m, |e| e == "cross-beta");
    let named = m.checks[0].summary.failing_equations.contains(&"cross-beta".to_owned());
    outcome(
        dev < 1e-6 && errors == 0 && detected > 1e-2 && named,
        format!(
            "{} systems x 100 points x 10 fields: max {dev:.2e} (< 1e-6); mutation detected at {detected:.2e} (> 1e-2)",
            SYSTEMS.len()
        ),
    )
}

fn projector_laws() -> Outcome {
    let mut dev: f64 = 0.0;
    let mut errors = 0;
    for name in SYSTEMS {
        let r = run(name, &[CheckId::Normality], 100);
        dev = dev.max(worst(&r, |e| e.starts_with("projector-")));
        errors += error_count(&r);
    }
    outcome(
        dev < 1e-9 && errors == 0,
        format!("P^2 = P, tr P = n - 1, P W = 0 on {} systems x 100 points: max {dev:.2e} (< 1e-9)", SYSTEMS.len()),
    )
}

fn trivial_normality() -> Outcome {
    let residual = |e: &str| !e.starts_with("projector-");
    let g = run("geodesic", &[CheckId::Normality], 200);
    let flat = worst(&g, residual);
    let s = run("shear", &[CheckId::Normality], 200);
    let shear = worst(&s, residual);
    outcome(
        flat < 1e-10 && shear > 1e-3 && error_count(&g) + error_count(&s) == 0,
        format!("geodesic, 200 points: max residual {flat:.2e} (< 1e-10); shear force: {shear:.2e} (> 1e-3)"),
    )
}

fn gauge() -> Outcome {
    let (mut inv, mut rule, mut errors): (f64, f64, usize) = (0.0, 0.0, 0);
    for name in SYSTEMS {
        let r = run(name, &[CheckId::Gauge], 50);
        inv = inv.max(worst(&r, |e| e.starts_with("invariant-")));
        rule = rule.max(worst(&r, |e| e.starts_with("rule-")));
        errors += error_count(&r);
    }
    let g = run("geodesic", &[CheckId::Gauge], 50);
    let residual = worst(&g, |e| e.starts_with("residual-"));
    outcome(
        inv < 1e-7 && rule < 1e-6 && residual < 1e-7 && errors == 0,
        format!(
            "{} systems x 50 points: invariants {inv:.2e} (< 1e-7), rules {rule:.2e} (< 1e-6), \
             geodesic residual change {residual:.2e} (< 1e-7)",
            SYSTEMS.len()
        ),
    )
}

fn ad_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut grad_dev, mut hess_dev): (f64, f64) = (0.0, 0.0);
    let (mut count, mut skipped) = (0, 0);
    while count < 1000 {
        let n = rng.gen_range(1..=3);
        let rep = if rng.gen_bool(0.5) { Rep::V } else { Rep::P };
        let e = random_expression(&mut rng, &RandomSpec { dimension: n, fiber: Some(rep), max_depth: 6 });
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let point = |c: &[f64]| PhasePoint::new(c[..n].to_vec(), c[n..].to_vec(), rep);
        let c0: Vec<f64> = x.iter().chain(&f).copied().collect();
        let Ok(jet) = e.eval_jet(&point(&c0)) else {
            skipped += 1;
            continue;
        };
        let eval = |c: &[f64]| e.eval(&point(c)).unwrap_or(f64::NAN);
        let shifted = |d: &[(usize, f64)]| {
            let mut c = c0.clone();
            for (i, h) in d {
                c[*i] += h;
            }
            eval(&c)
        };
        let m = 2 * n;
        let (h1, h2) = (1e-5, 1e-4);
        let fd_grad: Vec<f64> = (0..m).map(|i| (shifted(&[(i, h1)]) - shifted(&[(i, -h1)])) / (2.0 * h1)).collect();
        let mut ad_hess = Vec::new();
        let mut fd_hess = Vec::new();
        for i in 0..m {
            for j in i..m {
                ad_hess.push(*jet.hess(i, j));
                let v = if i == j {
                    (shifted(&[(i, h2)]) - 2.0 * jet.value + shifted(&[(i, -h2)])) / (h2 * h2)
                } else {
                    (shifted(&[(i, h2), (j, h2)]) - shifted(&[(i, h2), (j, -h2)]) - shifted(&[(i, -h2), (j, h2)])
                        + shifted(&[(i, -h2), (j, -h2)]))
                        / (4.0 * h2 * h2)
                };
                fd_hess.push(v);
            }
        }
        let nan_as_inf = |d: f64| if d.is_nan() { f64::INFINITY } else { d };
        grad_dev = grad_dev.max(nan_as_inf(relative_deviation(&jet.grad, &fd_grad)));
        hess_dev = hess_dev.max(nan_as_inf(relative_deviation(&ad_hess, &fd_hess)));
        count += 1;
    }
    outcome(
        grad_dev < 1e-5 && hess_dev < 1e-4 && skipped == 0,
        format!(
            "1000 random expressions of depth <= 6: gradient {grad_dev:.2e} (< 1e-5), Hessian {hess_dev:.2e} (< 1e-4), \
             {skipped} failed to evaluate"
        ),
    )
}

fn normal_shift() -> Outcome {
    let r = run("circle", &[CheckId::Shift], 1);
    let initial = worst(&r, |e| e == "collinearity-initial");
    let all = worst(&r, |e| e.starts_with("collinearity"));
    let samples = r.checks[0].rows.iter().map(|row| row.point).max().map_or(0, |p| p + 1);
    outcome(
        all < 1e-6 && initial < 1e-10 && samples == 32,
        format!("unit circle, {samples} samples, t in [0, 1]: max {all:.2e} (< 1e-6), at t = 0 {initial:.2e} (< 1e-10)"),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_normality-lab");
    let path = fixture("extended");
    let invoke = |threads: &str, format: &str| {
        let out = Command::new(bin)
            .args(["check", path.to_str().unwrap(), "--seed", "42", "--samples", "30", "--format", format])
            .env("NORMALITY_LAB_THREADS", threads)
            .output()
            .expect("binary runs");
        out.stdout
    };
    let a = invoke("4", "json");
    let b = invoke("4", "json");
    let c = invoke("1", "json");
    let d = invoke("3", "csv");
    let e = invoke("1", "csv");
    outcome(
        !a.is_empty() && a == b && a == c && d == e,
        format!("repeated runs, seed 42, 1 to 4 threads: {} JSON bytes identical, CSV identical", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric duality", metric_duality),
        ("transport identities", transport),
        ("curvature relations", curvature),
        ("cross-representation", cross_representation),
        ("projector laws", projector_laws),
        ("trivial normality", trivial_normality),
        ("gauge theorems", gauge),
        ("AD kernel", ad_kernel),
        ("normal shift", normal_shift),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2} {name}: {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
