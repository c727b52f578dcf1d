//! `admm-pep` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 computational failure.

pub mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::admm::{admm_step, build_instance};
use crate::certificate::{feasibility_report, FeasibilityReport};
use crate::model::{build_problem, GammaContext, GOLDEN_RATIO};
use crate::sdp::{solve, SolveStatus, DEFAULT_MAX_ITERATIONS};

use self::sweep::{grid, run_sweep, write_csv, write_plot_data, Parallelism};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Largest `γ` accepted by `solve` and `sweep`.
pub const GAMMA_CAP: f64 = 2.5;
/// Exclusion window above the golden ratio for `counterexample`.
pub const THRESHOLD_MARGIN: f64 = 0.01;
/// Largest tolerated coordinate mismatch between replay and designated iterate.
pub const REPLAY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "admm-pep",
    version,
    about = "Worst-case growth of the ADMM measure for large dual step lengths"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the lifted SDP numerically.
    Solve {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Print a JSON report instead of text.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Check the analytic rank-two certificate.
    Verify {
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Solve and verify over a grid of step lengths.
    Sweep {
        #[arg(long, default_value_t = 1.5)]
        gamma_min: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write gnuplot-ready two-column data here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Build and replay a concrete instance on which the measure grows.
    Counterexample {
        #[arg(long)]
        gamma: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

struct Usage(String);

fn usage(msg: impl Into<String>) -> Usage {
    Usage(msg.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve { gamma, tol, format } => cmd_solve(gamma, tol, format, out, err),
        Command::Verify { gamma, format } => cmd_verify(gamma, format, out, err),
        Command::Sweep {
            gamma_min,
            gamma_max,
            step,
            tol,
            out: path,
            format,
            plot_data,
        } => cmd_sweep(
            gamma_min,
            gamma_max,
            step,
            tol,
            path.as_deref(),
            format,
            plot_data.as_deref(),
            out,
            err,
        ),
        Command::Counterexample {
            gamma,
            out: path,
            format,
        } => cmd_counterexample(gamma, path.as_deref(), format, out, err),
    };
    match outcome {
        Ok(code) => code,
        Err(Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn check_tol(tol: f64) -> Result<(), Usage> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--tol must be positive, got {tol}")))
    }
}

fn no_csv(format: Option<Format>, command: &str) -> Result<bool, Usage> {
    match format {
        Some(Format::Csv) => Err(usage(format!(
            "{command} has no csv output; use --format json"
        ))),
        Some(Format::Json) => Ok(true),
        None => Ok(false),
    }
}

fn in_open_closed(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x <= hi
}

fn print_json(out: &mut dyn Write, value: &serde_json::Value) {
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(value).expect("json value")
    );
}

fn cmd_solve(
    gamma: f64,
    tol: f64,
    format: Option<Format>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    if !in_open_closed(gamma, 1.0, GAMMA_CAP) {
        return Err(usage(format!(
            "--gamma must lie in (1, {GAMMA_CAP}], got {gamma}"
        )));
    }
    check_tol(tol)?;
    let json = no_csv(format, "solve")?;
    let ctx = GammaContext::new(gamma).map_err(|e| usage(e.to_string()))?;
    let problem = build_problem(&ctx);
    let sol = match solve(&problem, tol, DEFAULT_MAX_ITERATIONS) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "solver error: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let extrapolated = gamma > 2.0;
    if json {
        print_json(
            out,
            &json!({
                "gamma": gamma,
                "status": sol.status.as_str(),
                "objective": sol.objective,
                "dual_objective": sol.dual_objective(&problem),
                "residuals": sol.residuals,
                "iterations": sol.iterations,
                "extrapolated": extrapolated,
            }),
        );
    } else {
        let _ = writeln!(out, "gamma            {gamma}");
        if extrapolated {
            let _ = writeln!(out, "note             extrapolation beyond gamma = 2");
        }
        let _ = writeln!(out, "status           {}", sol.status.as_str());
        let _ = writeln!(out, "objective        {:.9}", sol.objective);
        let _ = writeln!(out, "dual objective   {:.9}", sol.dual_objective(&problem));
        let _ = writeln!(out, "primal infeas    {:.3e}", sol.residuals.primal_infeas);
        let _ = writeln!(out, "dual infeas      {:.3e}", sol.residuals.dual_infeas);
        let _ = writeln!(out, "relative gap     {:.3e}", sol.residuals.gap);
        let _ = writeln!(out, "iterations       {}", sol.iterations);
    }
    if sol.status == SolveStatus::Optimal {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            err,
            "solver stopped with status {}{}",
            sol.status.as_str(),
            sol.diagnostic.map(|d| format!(": {d}")).unwrap_or_default()
        );
        Ok(EXIT_FAILURE)
    }
}

fn write_report(out: &mut dyn Write, r: &FeasibilityReport) -> std::io::Result<()> {
    writeln!(out, "gamma               {}", r.gamma)?;
    if !r.within_claimed_region {
        writeln!(
            out,
            "flag                outside claimed region (gamma <= {GOLDEN_RATIO:.9})"
        )?;
    }
    writeln!(out, "alpha               {:.12e}", r.alpha)?;
    for (i, v) in r.inequality_values.iter().enumerate() {
        writeln!(out, "inequality {}        {:+.3e}", i + 1, v)?;
    }
    writeln!(out, "equality residual   {:+.3e}", r.equality_residual)?;
    let eig: Vec<String> = r.eigenvalues.iter().map(|e| format!("{e:.3e}")).collect();
    writeln!(out, "eigenvalues         {}", eig.join(" "))?;
    writeln!(out, "rank                {}", r.rank)?;
    writeln!(out, "objective (trace)   {:.12}", r.objective_trace)?;
    writeln!(out, "objective (expand)  {:.12}", r.objective_expanded)?;
    writeln!(out, "objective (compact) {:.12}", r.objective_compact)?;
    writeln!(out, "max discrepancy     {:.3e}", r.max_discrepancy)?;
    writeln!(
        out,
        "result              {}",
        if r.passes() { "PASS" } else { "FAIL" }
    )
}

fn cmd_verify(
    gamma: f64,
    format: Option<Format>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    if !in_open_closed(gamma, 1.0, 2.0) {
        return Err(usage(format!("--gamma must lie in (1, 2], got {gamma}")));
    }
    let json = no_csv(format, "verify")?;
    let ctx = match GammaContext::new(gamma) {
        Ok(c) => c,
        Err(e) => return Err(usage(e.to_string())),
    };
    let report = match feasibility_report(&ctx) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "certificate error: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    if json {
        let mut v = serde_json::to_value(&report).expect("report serializes");
        v["passes"] = json!(report.passes());
        print_json(out, &v);
    } else if write_report(out, &report).is_err() {
        return Ok(EXIT_FAILURE);
    }
    Ok(if report.passes() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn open_output(path: Option<&Path>, err: &mut dyn Write) -> Option<Box<dyn Write>> {
    match path {
        None => Some(Box::new(std::io::stdout())),
        Some(p) => match File::create(p) {
            Ok(f) => Some(Box::new(BufWriter::new(f))),
            Err(e) => {
                let _ = writeln!(err, "cannot write {}: {e}", p.display());
                None
            }
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    gamma_min: f64,
    gamma_max: f64,
    step: f64,
    tol: f64,
    path: Option<&Path>,
    format: Format,
    plot_data: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    if !(gamma_min > 1.0 && gamma_min < gamma_max && gamma_max <= GAMMA_CAP) {
        return Err(usage(format!(
            "need 1 < --gamma-min < --gamma-max <= {GAMMA_CAP}, got {gamma_min} and {gamma_max}"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(usage(format!("--step must be positive, got {step}")));
    }
    check_tol(tol)?;
    let gammas = match grid(gamma_min, gamma_max, step) {
        Ok(g) => g,
        Err(e) => return Err(usage(e.to_string())),
    };
    let rows = run_sweep(&gammas, tol, Parallelism::Rayon);

    let mut sink: Box<dyn Write> = match path {
        None => Box::new(&mut *out),
        Some(_) => match open_output(path, err) {
            Some(w) => w,
            None => return Ok(EXIT_FAILURE),
        },
    };
    let written = match format {
        Format::Csv => write_csv(&rows, &mut sink).map_err(|e| e.to_string()),
        Format::Json => serde_json::to_writer_pretty(&mut sink, &rows)
            .map_err(|e| e.to_string())
            .and_then(|_| writeln!(sink).map_err(|e| e.to_string())),
    };
    let flushed = sink.flush();
    drop(sink);
    if let Err(e) = written {
        let _ = writeln!(err, "{e}");
        return Ok(EXIT_FAILURE);
    }
    if let Err(e) = flushed {
        let _ = writeln!(err, "{e}");
        return Ok(EXIT_FAILURE);
    }
    if let Some(p) = plot_data {
        let res = File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_plot_data(&rows, &mut w)?;
            w.flush()
        });
        if let Err(e) = res {
            let _ = writeln!(err, "cannot write {}: {e}", p.display());
            return Ok(EXIT_FAILURE);
        }
    }
    let failed = rows
        .iter()
        .filter(|r| r.status != "ok" && r.status != "below-threshold")
        .count();
    if failed > 0 {
        let _ = writeln!(err, "{failed} of {} rows did not complete", rows.len());
    }
    Ok(EXIT_OK)
}

fn cmd_counterexample(
    gamma: f64,
    path: Option<&Path>,
    format: Option<Format>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    let lo = GOLDEN_RATIO + THRESHOLD_MARGIN;
    if !in_open_closed(gamma, lo, 2.0) {
        return Err(usage(format!(
            "--gamma must lie in ({lo:.6}, 2], got {gamma}"
        )));
    }
    no_csv(format, "counterexample")?;
    let ctx = match GammaContext::new(gamma) {
        Ok(c) => c,
        Err(e) => return Err(usage(e.to_string())),
    };
    let instance = match build_instance(&ctx) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "construction failed: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let replayed = match admm_step(&instance) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "replay failed: {e}");
            return Ok(EXIT_FAILURE);
        }
    };
    let mismatch = replayed.max_abs_diff(&instance.designated_next);
    if mismatch > REPLAY_TOLERANCE {
        let _ = writeln!(
            err,
            "replay mismatch {mismatch:.3e} exceeds {REPLAY_TOLERANCE:e}"
        );
        return Ok(EXIT_FAILURE);
    }
    let export = instance.export();
    let text = serde_json::to_string_pretty(&export).expect("export serializes");
    match path {
        None => {
            if writeln!(out, "{text}").is_err() {
                return Ok(EXIT_FAILURE);
            }
        }
        Some(p) => {
            if let Err(e) = std::fs::write(p, format!("{text}\n")) {
                let _ = writeln!(err, "cannot write {}: {e}", p.display());
                return Ok(EXIT_FAILURE);
            }
            let _ = writeln!(out, "R_k     {:.12}", export.r_k);
            let _ = writeln!(out, "R_next  {:.12}", export.r_next);
            let _ = writeln!(out, "replay  {mismatch:.3e}");
        }
    }
    Ok(if export.r_next > export.r_k {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}
