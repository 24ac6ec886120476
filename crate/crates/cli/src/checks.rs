//! The six checks, each a deterministic sweep over seeded sample points.

use normality_core::calculus::{curvature_relation, dynamic_curvature_relation, transport_identity, Slot, Transport};
use normality_core::experiments::{
    connection_free_mode, gauge_invariance_report, residual_prerequisites, shift_integrate, GaugeKind, ShiftRun,
};
use normality_core::expr::random::{random_expression, RandomSpec};
use normality_core::expr::{parse, Expression};
use normality_core::linalg::{ix2, ix3};
use normality_core::normality::{cross_check, residuals, velocity_bundle};
use normality_core::ode::OdeOptions;
use normality_core::system::SystemDef;
use normality_core::{Error, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{CheckId, RunConfig};
use crate::file::SystemFile;
use crate::report::{CheckReport, ErrorRecord, Report, Row, SystemInfo, Verdict, SCHEMA_VERSION};

/// Points whose evaluation hits a degenerate or singular configuration are
/// redrawn at most this many times.
pub const MAX_RESAMPLES: usize = 10;

/// Depth of random test fields in the transport check.
const TRANSPORT_FIELD_DEPTH: usize = 4;

/// RNG stream reserved for drawing a gauge tensor.
const GAUGE_STREAM: u64 = 64;

/// One measured quantity at a point, before it becomes a [`Row`].
struct Measure {
    equation: String,
    residual: f64,
    tolerance: f64,
    decisive: bool,
    detail: Option<String>,
}

impl Measure {
    fn new(equation: impl Into<String>, residual: f64, tolerance: f64) -> Measure {
        Measure { equation: equation.into(), residual, tolerance, decisive: true, detail: None }
    }
}

fn verdict(m: &Measure) -> Verdict {
    match (m.decisive, m.residual <= m.tolerance) {
        (false, _) => Verdict::Info,
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
    }
}

fn error_record(e: &Error) -> ErrorRecord {
    let kind = match e {
        Error::Parse(_) => "parse",
        Error::Eval(_) => "eval",
        Error::SingularMetric { .. } => "singular-metric",
        Error::NonConvergence { .. } => "non-convergence",
        Error::MissingJets => "missing-jets",
        Error::DegeneratePoint { .. } => "degenerate-point",
        Error::MissingGaugeTensor => "missing-gauge-tensor",
        Error::AsymmetricGauge { .. } => "asymmetric-gauge",
        Error::DegenerateSurface { .. } => "degenerate-surface",
        Error::IntegrationFailure { .. } => "integration-failure",
        Error::Validation(_) => "validation",
    };
    ErrorRecord { kind: kind.into(), message: e.to_string() }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_point(rng: &mut ChaCha8Rng, n: usize, cfg: &RunConfig) -> PhasePoint {
    let draw = |rng: &mut ChaCha8Rng, [a, b]: [f64; 2]| if a == b { a } else { rng.gen_range(a..b) };
    let x = (0..n).map(|_| draw(rng, cfg.x_box)).collect();
    let v = (0..n).map(|_| draw(rng, cfg.fiber_box)).collect();
    PhasePoint::velocity(x, v)
}

/// Evaluates `f` at `cfg.samples` velocity points. Point `i` draws from its
/// own generator, seeded in index order from the check's stream, so results
/// do not depend on scheduling.
fn sweep<F>(check: CheckId, n: usize, cfg: &RunConfig, f: F) -> Vec<Row>
where
    F: Fn(&PhasePoint, &mut ChaCha8Rng) -> Result<Vec<Measure>, Error> + Sync,
{
    let mut master = stream_rng(cfg.seed, check as u64 + 1);
    let seeds: Vec<u64> = (0..cfg.samples).map(|_| master.gen()).collect();
    let per_point: Vec<Vec<Row>> = seeds
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*s);
            let mut attempt = 0;
            loop {
                let y = sample_point(&mut rng, n, cfg);
                let row = |equation: String, residual, tolerance, verdict, detail| Row {
                    check: check.id(),
                    equation,
                    point: index,
                    rep: "v",
                    x: y.x.clone(),
                    fiber: y.fiber.clone(),
                    residual,
                    tolerance,
                    verdict,
                    resamples: attempt,
                    detail,
                };
                match f(&y, &mut rng) {
                    Ok(ms) => {
                        return ms
                            .into_iter()
                            .map(|m| {
                                let v = verdict(&m);
                                row(m.equation, m.residual, m.tolerance, v, m.detail)
                            })
                            .collect();
                    }
                    Err(e) if e.is_resamplable() && attempt < MAX_RESAMPLES => attempt += 1,
                    Err(e) => {
                        let r = error_record(&e);
                        let detail = Some(format!("{}: {}", r.kind, r.message));
                        return vec![row(check.id().to_owned(), f64::NAN, 0.0, Verdict::Error, detail)];
                    }
                }
            }
        })
        .collect();
    per_point.into_iter().flatten().collect()
}

fn metric(s: &SystemDef, cfg: &RunConfig) -> Vec<Row> {
    let n = s.n();
    let tol = cfg.tolerances;
    sweep(CheckId::Metric, n, cfg, |y, _| {
        let mp = s.metric_pair(y)?;
        let mut duality: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let gg: f64 = (0..n).map(|k| mp.g[ix2(n, i, k)] * mp.ginv[ix2(n, k, j)]).sum();
                duality = duality.max((gg - f64::from(u8::from(i == j))).abs());
            }
        }
        let back = s.legendre_inverse(&s.legendre_forward(y)?)?;
        let round_trip = normality_core::linalg::relative_deviation(&back.fiber, &y.fiber);
        Ok(vec![Measure::new("metric-duality", duality, tol.metric), Measure::new("legendre-round-trip", round_trip, tol.round_trip)])
    })
}

fn transport(s: &SystemDef, cfg: &RunConfig) -> Vec<Row> {
    let n = s.n();
    let tol = cfg.tolerances;
    sweep(CheckId::Transport, n, cfg, |y, rng| {
        let mut out = Vec::new();
        for which in Transport::ALL {
            let slots: Vec<Slot> = match rng.gen_range(0..3) {
                0 => vec![],
                1 => vec![Slot::Up],
                _ => vec![Slot::Down],
            };
            let spec = RandomSpec { dimension: n, fiber: Some(which.native()), max_depth: TRANSPORT_FIELD_DEPTH };
            let exprs: Vec<Expression> =
                (0..n.pow(slots.len() as u32)).map(|_| random_expression(rng, &spec)).collect();
            let dev = transport_identity(s, which, &exprs, &slots, y)?.deviation();
            let mut m = Measure::new(which.id(), dev, tol.transport);
            if dev > tol.transport {
                let comps: Vec<String> = exprs.iter().map(ToString::to_string).collect();
                m.detail = Some(format!("field [{}]", comps.join(", ")));
            }
            out.push(m);
        }
        out.push(Measure::new("dynamic-curvature-relation", dynamic_curvature_relation(s, y)?.deviation(), tol.curvature));
        out.push(Measure::new("curvature-relation", curvature_relation(s, y)?.deviation(), tol.curvature));
        Ok(out)
    })
}

fn cross(s: &SystemDef, cfg: &RunConfig) -> Vec<Row> {
    let tol = cfg.tolerances.cross;
    sweep(CheckId::Cross, s.n(), cfg, |y, _| {
        let cc = cross_check(s, y)?;
        Ok(cc.deviations.iter().map(|(name, dev)| Measure::new(format!("cross-{name}"), *dev, tol)).collect())
    })
}

fn normality(s: &SystemDef, cfg: &RunConfig) -> Vec<Row> {
    let n = s.n();
    let tol = cfg.tolerances;
    sweep(CheckId::Normality, n, cfg, |y, _| {
        let b = velocity_bundle(s, y)?;
        let p = &b.projector;
        let (mut idem, mut annihilates, mut trace): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for i in 0..n {
            trace += p[ix2(n, i, i)];
            let pw: f64 = (0..n).map(|r| p[ix2(n, i, r)] * b.w[r]).sum();
            annihilates = annihilates.max(pw.abs());
            for j in 0..n {
                let pp: f64 = (0..n).map(|k| p[ix2(n, i, k)] * p[ix2(n, k, j)]).sum();
                idem = idem.max((pp - p[ix2(n, i, j)]).abs());
            }
        }
        let mut out = vec![
            Measure::new("projector-idempotent", idem, tol.projector),
            Measure::new("projector-trace", (trace - (n as f64 - 1.0)).abs(), tol.projector),
            Measure::new("projector-annihilates-W", annihilates, tol.projector),
        ];
        for r in residuals(&b) {
            let mut m = Measure::new(r.id, r.value, tol.normality);
            m.decisive = r.decisive;
            if !r.decisive {
                m.detail = Some("not decisive in dimension two".into());
            }
            out.push(m);
        }
        Ok(out)
    })
}

/// A random symmetric quadratic gauge tensor in `(x, v)`.
pub fn random_gauge(n: usize, seed: u64) -> Vec<Expression> {
    let mut rng = stream_rng(seed, GAUGE_STREAM);
    let coef = |rng: &mut ChaCha8Rng| (rng.gen_range(-0.3f64..0.3) * 100.0).round() / 100.0;
    let mut out = vec![Expression::zero(n); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let (a, b, c) = (rng.gen_range(0..n) + 1, rng.gen_range(0..n) + 1, rng.gen_range(0..n) + 1);
                let src = format!(
                    "{} + {}*x{a} + {}*v{b} + {}*v{b}*v{c} + {}*x{c}*v{a}",
                    coef(&mut rng),
                    coef(&mut rng),
                    coef(&mut rng),
                    coef(&mut rng),
                    coef(&mut rng)
                );
                let e = parse(&src, n).expect("generated gauge term parses");
                out[ix3(n, k, i, j)] = e.clone();
                out[ix3(n, k, j, i)] = e;
            }
        }
    }
    out
}

fn gauge(s: &SystemDef, cfg: &RunConfig) -> Vec<Row> {
    let tol = cfg.tolerances;
    sweep(CheckId::Gauge, s.n(), cfg, |y, _| {
        let rep = gauge_invariance_report(s, y)?;
        let before = |id: &str| rep.before.iter().find(|r| r.id == id).map_or(f64::INFINITY, |r| r.value);
        Ok(rep
            .rows
            .iter()
            .map(|row| {
                let tolerance = match row.kind {
                    GaugeKind::Invariant => tol.gauge_invariant,
                    GaugeKind::Rule => tol.gauge_rule,
                    GaugeKind::Residual => tol.gauge_residual,
                };
                let mut m = Measure::new(row.id.clone(), row.deviation, tolerance);
                if row.kind == GaugeKind::Residual {
                    let id = row.id.trim_start_matches("residual-");
                    let unmet: Vec<&str> =
                        residual_prerequisites(id).iter().copied().filter(|p| before(p) > tol.normality).collect();
                    if !unmet.is_empty() {
                        m.decisive = false;
                        m.detail = Some(format!("conditional on {}", unmet.join(", ")));
                    }
                }
                m
            })
            .collect())
    })
}

fn shift(s: &SystemDef, file: &SystemFile, cfg: &RunConfig) -> CheckReport {
    let Some(spec) = &file.surface else {
        let e = ErrorRecord { kind: "validation".into(), message: "the shift check needs a [surface] section".into() };
        return CheckReport::failed(CheckId::Shift.id(), e);
    };
    let times = spec.times();
    let tol = cfg.tolerances;
    let per_sample: Vec<Vec<Row>> = spec
        .grid()
        .into_par_iter()
        .enumerate()
        .map(|(index, u)| {
            let run = ShiftRun {
                surface: spec.surface.clone(),
                samples: vec![u.clone()],
                times: times.clone(),
                ode: OdeOptions::default(),
            };
            let row = |equation: &str, residual, tolerance, verdict, detail| Row {
                check: CheckId::Shift.id(),
                equation: equation.to_owned(),
                point: index,
                rep: "u",
                x: u.clone(),
                fiber: Vec::new(),
                residual,
                tolerance,
                verdict,
                resamples: 0,
                detail,
            };
            match shift_integrate(s, &run) {
                Ok(report) => times
                    .iter()
                    .zip(&report.samples[0].deviations)
                    .enumerate()
                    .map(|(k, (t, dev))| {
                        let (eq, tolerance) =
                            if k == 0 { ("collinearity-initial", tol.shift_initial) } else { ("collinearity", tol.shift) };
                        let v = if *dev <= tolerance { Verdict::Pass } else { Verdict::Fail };
                        row(eq, *dev, tolerance, v, Some(format!("t={t}")))
                    })
                    .collect(),
                Err(e) => {
                    let r = error_record(&e);
                    vec![row("collinearity", f64::NAN, 0.0, Verdict::Error, Some(format!("{}: {}", r.kind, r.message)))]
                }
            }
        })
        .collect();
    CheckReport::new(CheckId::Shift.id(), per_sample.into_iter().flatten().collect())
}

/// Runs the configured checks. Call inside a rayon pool to bound threads.
pub fn run_checks(file: &SystemFile, cfg: &RunConfig) -> Report {
    let original = &file.system;
    let mut system = if cfg.connection_free {
        connection_free_mode(original).with_gauge(original.gauge().map(<[Expression]>::to_vec))
    } else {
        original.clone()
    };
    let selected: Vec<CheckId> = match &cfg.checks {
        Some(c) => c.clone(),
        None => CheckId::ALL.into_iter().filter(|c| *c != CheckId::Shift || file.surface.is_some()).collect(),
    };
    let gauge_source = if system.gauge().is_some() {
        "file"
    } else if selected.contains(&CheckId::Gauge) {
        "random"
    } else {
        "none"
    };
    let gauged = if system.gauge().is_some() {
        system.clone()
    } else {
        system.with_gauge(Some(random_gauge(system.n(), cfg.seed)))
    };
    if gauge_source == "random" {
        // keep the drawn tensor out of the other checks
        system = system.with_gauge(None);
    }

    let checks = selected
        .iter()
        .map(|c| match c {
            CheckId::Metric => CheckReport::new(c.id(), metric(&system, cfg)),
            CheckId::Transport => CheckReport::new(c.id(), transport(&system, cfg)),
            CheckId::Cross => CheckReport::new(c.id(), cross(&system, cfg)),
            CheckId::Normality => CheckReport::new(c.id(), normality(&system, cfg)),
            CheckId::Gauge => CheckReport::new(c.id(), gauge(&gauged, cfg)),
            CheckId::Shift => shift(&system, file, cfg),
        })
        .collect();

    Report {
        schema: SCHEMA_VERSION,
        system: SystemInfo {
            name: original.name.clone(),
            file: file.path.display().to_string(),
            n: original.n(),
            mode: if cfg.connection_free { "connection-free" } else { "original" },
            gauge: gauge_source.into(),
        },
        config: RunConfig { checks: Some(selected), ..cfg.clone() },
        checks,
    }
}
