//! Command-line front end: flag parsing, configuration merging, subcommand
//! dispatch and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod parse;

use clap::{Args, Parser, Subcommand};
use commands::{Report, TraceOptions};
use config::ExperimentConfig;
use output::write_atomic;
use std::path::{Path, PathBuf};
use wonderchar::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ACCURACY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_OUT: &str = "wonderchar-out";

#[derive(Debug, Parser)]
#[command(name = "wonderchar", version, about = "Regularized characters of group actions on compactified model varieties")]
#[command(after_help = "Every subcommand writes <name>.csv, <name>.dat (whitespace-separated, for gnuplot), \
<name>.txt and config.json to the output directory.\n\
Exit status: 0 success, 1 accuracy or verification failure, 2 usage or configuration error.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Model selector: toric:r=<n>, parabolic, p1, pgl2.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Bundle selector: trivial:d=<n> or line:k=<int>.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub bundle: Option<String>,
    /// Test function KIND[:c=C1,..][:w=W1,..][:unit-mass] with KIND gauss, bump or gauss-bump.
    #[arg(long = "f", global = true, value_name = "SPEC", allow_hyphen_values = true)]
    pub function: Option<String>,
    /// ζ value or grid START:END:COUNT.
    #[arg(long, global = true, value_name = "v|a:b:n", allow_hyphen_values = true)]
    pub zeta: Option<String>,
    /// ξ-grid extent and step, R,h; toric models pick one by default.
    #[arg(long = "xi-grid", global = true, value_name = "R,h")]
    pub xi_grid: Option<String>,
    /// Chart-coordinate grid per axis for kernel tables, START:END:COUNT.
    #[arg(long = "y-grid", global = true, value_name = "a:b:n", allow_hyphen_values = true)]
    pub y_grid: Option<String>,
    /// Base point in chart coordinates, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Group element: diag:a,d, rot:θ, mat:a,b,c,d, torus:t1,.. or coords:x1,..
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Lacunarity tolerance relative to the peak.
    #[arg(long = "tol-lac", global = true)]
    pub tol_lac: Option<f64>,
    /// Transversality threshold on |det(1 - dΦ)|.
    #[arg(long = "tol-trans", global = true)]
    pub tol_trans: Option<f64>,
    /// Relative gap tolerance for the fixed-point comparison.
    #[arg(long = "tol-gap", global = true)]
    pub tol_gap: Option<f64>,
    /// Quadrature: nodes=N1,N2,..[:refine=K][:tol=T][:floor=F].
    #[arg(long, global = true)]
    pub quad: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "WONDERCHAR_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spherical transform F(ξ) on the ξ-grid (toric and parabolic models).
    #[command(after_help = "CSV columns (transform.csv): xi_1..xi_d, re, im, abs, error")]
    Transform,
    /// Auxiliary symbol q̃(y, ξ) on the ξ-grid, with a lacunarity check.
    #[command(after_help = "CSV columns (symbol.csv): xi_1..xi_d, re, im, abs, error\n\
The summary holds the lacunarity PASS/FAIL table: worst t, axis, magnitude. A FAIL exits with status 1.")]
    Symbol,
    /// Schwartz kernel K(y, y') on the product of the y-grid with itself.
    #[command(after_help = "CSV columns (kernel.csv): y_1..y_d, y2_1..y2_d, kernel, error")]
    Kernel,
    /// ζ-trace on the ζ-grid plus the regularized trace.
    #[command(after_help = "CSV columns (trace.csv): zeta, re, im, error, then re_<chart>, im_<chart> per chart \
with --chart-breakdown")]
    Trace {
        /// Print the Laurent expansion about ζ = -1.
        #[arg(long)]
        laurent: bool,
        /// Add per-chart columns and finite parts.
        #[arg(long = "chart-breakdown")]
        chart_breakdown: bool,
    },
    /// Fixed points of --g with determinants and the flat trace.
    #[command(after_help = "CSV columns (fixed_points.csv): index, chart, label, y_1..y_d, det, bundle_trace, \
contribution, error\nerror is the distance between the record and its image.")]
    FixedPoints,
    /// Compare both sides of the fixed-point formula on the ζ-grid and at ζ = -1.
    #[command(after_help = "CSV columns (verify_fpf.csv): zeta, symbol_side, fixed_point_side, gap, error\n\
The last row is the regularized trace at ζ = -1. A FAIL exits with status 1.")]
    VerifyFpf,
    /// Run the acceptance suite.
    #[command(after_help = "CSV columns (selftest.csv): id, passed, seconds, budget, detail")]
    Selftest {
        /// Comma-separated criterion ids, e.g. A1,A4.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(e) if e.is_accuracy() || matches!(e, Error::Degenerate(_)) => EXIT_ACCURACY,
            CliError::Io(_) => EXIT_ACCURACY,
            _ => EXIT_USAGE,
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &c.model {
        cfg.model = m.clone();
    }
    if let Some(b) = &c.bundle {
        cfg.bundle = b.clone();
    }
    if let Some(f) = &c.function {
        cfg.f = parse::function(f)?;
    }
    if let Some(z) = &c.zeta {
        cfg.zeta = parse::span(z)?;
    }
    if let Some(x) = &c.xi_grid {
        cfg.xi_grid = Some(parse::xi_grid(x)?);
    }
    if let Some(y) = &c.y_grid {
        cfg.y_grid = parse::span(y)?;
    }
    if let Some(p) = &c.point {
        cfg.point = parse::numbers(p)?;
    }
    if let Some(g) = &c.g {
        cfg.g = g.clone();
    }
    if let Some(v) = c.tol_lac {
        cfg.tol.lac = v;
    }
    if let Some(v) = c.tol_trans {
        cfg.tol.trans = v;
    }
    if let Some(v) = c.tol_gap {
        cfg.tol.gap = v;
    }
    if let Some(q) = &c.quad {
        cfg.quad = parse::quad(q)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn dispatch(cmd: &Command, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    Ok(match cmd {
        Command::Transform => commands::transform(cfg)?,
        Command::Symbol => commands::symbol(cfg)?,
        Command::Kernel => commands::kernel(cfg)?,
        Command::Trace { laurent, chart_breakdown } => {
            commands::trace(cfg, &TraceOptions { laurent: *laurent, chart_breakdown: *chart_breakdown })?
        }
        Command::FixedPoints => commands::fixed_points(cfg)?,
        Command::VerifyFpf => commands::verify(cfg)?,
        Command::Selftest { only } => commands::selftest(only)?,
    })
}

pub fn write_report(dir: &Path, report: &Report, cfg: &ExperimentConfig) -> std::io::Result<()> {
    for t in &report.tables {
        write_atomic(dir, &format!("{}.csv", t.name), &t.to_csv())?;
        write_atomic(dir, &format!("{}.dat", t.name), &t.to_dat())?;
    }
    write_atomic(dir, &format!("{}.txt", report.name), report.summary.as_bytes())?;
    write_atomic(dir, "config.json", cfg.to_json().as_bytes())?;
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = resolve_config(&cli.common).and_then(|cfg| {
        let report = dispatch(&cli.command, &cfg)?;
        let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        write_report(&dir, &report, &cfg).map_err(CliError::Io)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            print!("{}", report.summary);
            if report.passed {
                EXIT_OK
            } else {
                EXIT_ACCURACY
            }
        }
        Err(e) => {
            eprintln!("wonderchar: {e}");
            e.exit_code()
        }
    }
}
