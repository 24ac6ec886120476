use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use normality_lab::{check_file, CheckId, Format, RunConfig, Tolerances};

#[derive(Parser)]
#[command(name = "normality-lab", version, about = "Numerical checks of normality equations for Newtonian dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run checks on a system file and write a report.
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    /// Comma-separated subset of metric, transport, cross, normality, gauge, shift.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<CheckId>>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace the connection by zero before running.
    #[arg(long)]
    connection_free: bool,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Interval for chart coordinates, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    x_box: Option<Vec<f64>>,
    /// Interval for fiber coordinates, as `a,b`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    fiber_box: Option<Vec<f64>>,
    #[arg(long)]
    tol_metric: Option<f64>,
    #[arg(long)]
    tol_round_trip: Option<f64>,
    #[arg(long)]
    tol_transport: Option<f64>,
    #[arg(long)]
    tol_curvature: Option<f64>,
    #[arg(long)]
    tol_cross: Option<f64>,
    #[arg(long)]
    tol_projector: Option<f64>,
    #[arg(long)]
    tol_normality: Option<f64>,
    #[arg(long)]
    tol_gauge_invariant: Option<f64>,
    #[arg(long)]
    tol_gauge_rule: Option<f64>,
    #[arg(long)]
    tol_gauge_residual: Option<f64>,
    #[arg(long)]
    tol_shift: Option<f64>,
    #[arg(long)]
    tol_shift_initial: Option<f64>,
}

impl CheckArgs {
    fn config(&self) -> RunConfig {
        let d = Tolerances::default();
        let tolerances = Tolerances {
            metric: self.tol_metric.unwrap_or(d.metric),
            round_trip: self.tol_round_trip.unwrap_or(d.round_trip),
            transport: self.tol_transport.unwrap_or(d.transport),
            curvature: self.tol_curvature.unwrap_or(d.curvature),
            cross: self.tol_cross.unwrap_or(d.cross),
            projector: self.tol_projector.unwrap_or(d.projector),
            normality: self.tol_normality.unwrap_or(d.normality),
            gauge_invariant: self.tol_gauge_invariant.unwrap_or(d.gauge_invariant),
            gauge_rule: self.tol_gauge_rule.unwrap_or(d.gauge_rule),
            gauge_residual: self.tol_gauge_residual.unwrap_or(d.gauge_residual),
            shift: self.tol_shift.unwrap_or(d.shift),
            shift_initial: self.tol_shift_initial.unwrap_or(d.shift_initial),
        };
        let base = RunConfig::default();
        let interval = |v: &Option<Vec<f64>>, dflt| v.as_ref().map_or(dflt, |v| [v[0], v[1]]);
        RunConfig {
            checks: self.checks.clone(),
            samples: self.samples,
            seed: self.seed,
            tolerances,
            x_box: interval(&self.x_box, base.x_box),
            fiber_box: interval(&self.fiber_box, base.fiber_box),
            connection_free: self.connection_free,
            format: self.format,
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write output: {e}")),
            _ => Ok(()),
        },
    }
}

fn main() -> ExitCode {
    let Command::Check(args) = Cli::parse().command;
    let cfg = args.config();
    let (text, code) = match check_file(&args.file, &cfg) {
        Ok(report) => {
            let text = match cfg.format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            for c in report.checks.iter().filter(|c| !c.summary.pass) {
                eprintln!("check {} failed: {}", c.id, c.summary.failing_equations.join(", "));
            }
            (text, if report.pass() { 0 } else { 1 })
        }
        Err(doc) => {
            eprintln!("error: {}", doc.error.message);
            (doc.to_json(), 2)
        }
    };
    if let Err(m) = emit(&text, args.out.as_ref()) {
        eprintln!("error: {m}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
