//! Grid sweep over `γ`: one solver run and one certificate check per point.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::feasibility_report;
use crate::error::{Error, Result};
use crate::model::{build_problem, GammaContext};
use crate::sdp::{solve, SolveStatus, DEFAULT_MAX_ITERATIONS};

pub const CSV_HEADER: [&str; 5] = ["gamma", "sdp_value", "analytic_value", "gap", "status"];

/// Upper bound on grid size, to catch a mistyped `--step`.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub sdp_value: Option<f64>,
    pub analytic_value: Option<f64>,
    pub gap: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Rayon,
}

/// `γ_i = min + i·step` for every `i` with `γ_i ≤ max` (up to rounding).
pub fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
        return Err(Error::InvalidArgument(format!(
            "bad grid: min {min}, max {max}, step {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(Error::Size {
            count,
            max: MAX_GRID_POINTS,
        });
    }
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Solves and verifies at a single `γ`.
///
/// The analytic column is filled only above the golden ratio; below it the
/// row is tagged `below-threshold`.
pub fn sweep_row(gamma: f64, tolerance: f64) -> SweepRow {
    let ctx = match GammaContext::new(gamma) {
        Ok(c) => c,
        Err(_) => {
            return SweepRow {
                gamma,
                sdp_value: None,
                analytic_value: None,
                gap: None,
                status: "invalid-gamma".into(),
            }
        }
    };
    let mut status = "ok";
    let sdp_value = match solve(&build_problem(&ctx), tolerance, DEFAULT_MAX_ITERATIONS) {
        Ok(sol) if sol.status == SolveStatus::Optimal => Some(sol.objective),
        Ok(sol) => {
            status = match sol.status {
                SolveStatus::MaxIterations => "solver-max-iterations",
                _ => "solver-numerical-failure",
            };
            None
        }
        Err(_) => {
            status = "solver-error";
            None
        }
    };
    let analytic_value = if ctx.above_golden_ratio() {
        match feasibility_report(&ctx) {
            Ok(r) if r.passes() => Some(r.objective_compact),
            Ok(_) => {
                if status == "ok" {
                    status = "certificate-infeasible";
                }
                None
            }
            Err(_) => {
                if status == "ok" {
                    status = "certificate-domain-error";
                }
                None
            }
        }
    } else {
        if status == "ok" {
            status = "below-threshold";
        }
        None
    };
    let gap = match (sdp_value, analytic_value) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    SweepRow {
        gamma,
        sdp_value,
        analytic_value,
        gap,
        status: status.into(),
    }
}

/// Rows in grid order regardless of how they are scheduled.
pub fn run_sweep(gammas: &[f64], tolerance: f64, parallelism: Parallelism) -> Vec<SweepRow> {
    match parallelism {
        Parallelism::Sequential => gammas.iter().map(|&g| sweep_row(g, tolerance)).collect(),
        Parallelism::Rayon => gammas
            .par_iter()
            .map(|&g| sweep_row(g, tolerance))
            .collect(),
    }
}

/// Twelve significant digits, positional unless the exponent is below -4 or above 11.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-4..12).contains(&exp) {
        return sci;
    }
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn field(v: Option<f64>) -> String {
    v.map(format_sig12).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            format_sig12(r.gamma),
            field(r.sdp_value),
            field(r.analytic_value),
            field(r.gap),
            r.status.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |msg: String| Error::InvalidArgument(format!("csv read failed: {msg}"));
    let headers = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| bad(format!("not a number: {s}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(SweepRow {
            gamma: num(&rec[0])?.ok_or_else(|| bad("missing gamma".into()))?,
            sdp_value: num(&rec[1])?,
            analytic_value: num(&rec[2])?,
            gap: num(&rec[3])?,
            status: rec[4].to_string(),
        });
    }
    Ok(rows)
}

/// Gnuplot data: block 0 holds `γ sdp_value`, block 1 holds `γ analytic_value`.
pub fn write_plot_data<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# gamma sdp_value")?;
    for r in rows {
        if let Some(v) = r.sdp_value {
            writeln!(out, "{} {}", format_sig12(r.gamma), format_sig12(v))?;
        }
    }
    writeln!(out, "\n\n# gamma analytic_value")?;
    for r in rows {
        if let Some(v) = r.analytic_value {
            writeln!(out, "{} {}", format_sig12(r.gamma), format_sig12(v))?;
        }
    }
    Ok(())
}
