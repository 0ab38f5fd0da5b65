//! `levelflow`: run level-set length and curvature analyses from JSON scenario configs.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails (the report is
//! still written), 2 for unreadable or invalid input.

mod commands;
mod config;
mod report;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Context;
use crate::config::{ConfigError, Scenario, Tolerances};
use crate::report::Report;

#[derive(Parser, Debug)]
#[command(name = "levelflow", version, about = "Level curves of harmonic functions on surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplies every default tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    /// Worker threads for the data-parallel sweeps.
    #[arg(long, global = true, env = "LEVELFLOW_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Length profile L, L', L'', (ln L)'' over the t-grid.
    Profile,
    /// Log-convexity of L, with optional sharp and pinched bounds.
    Convexity,
    /// Pointwise identities and curvature PDE residuals.
    Residuals,
    /// Maximum/minimum principle audits.
    Audit,
    /// Conical factor profiles, mollification chain and flux identity.
    Bic,
    /// Asymptotic defect sweep near the centre of a curved cap.
    Counterexample,
    /// Built-in scenarios.
    Examples {
        #[arg(value_enum)]
        name: Example,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Example {
    Flat,
    Hyperbolic,
    SphereCap,
    Conical,
}

const E2: f64 = 7.38905609893065;

fn example_config(e: Example) -> String {
    match e {
        Example::Flat => format!(
            r#"{{"name": "flat-annulus",
  "chart": {{"kind": "conformal", "region": {{"kind": "annulus", "outer": {E2}}}, "factor": {{"name": "flat"}}}},
  "field": {{"kind": "dirichlet", "R": {E2}, "t1": 0.0, "t2": -2.0}},
  "analysis": {{"t_grid": {{"lo": -2.0, "hi": 0.0, "n": 50}}, "n_samples": 2048}}}}"#
        ),
        Example::Hyperbolic => format!(
            r#"{{"name": "hyperbolic-cylinder",
  "chart": {{"kind": "warped", "lambda": {E2}, "t_min": -3.5, "t_max": 3.5}},
  "field": {{"kind": "catalog", "name": "warped_arctan"}},
  "analysis": {{"t_grid": {{"lo": 0.4, "hi": {hi}, "n": 50, "inset": false}}, "n_samples": 256, "kappa": -1.0}}}}"#,
            hi = std::f64::consts::PI - 0.4
        ),
        Example::SphereCap => r#"{"name": "sphere-cap",
  "chart": {"kind": "conformal", "region": {"kind": "punctured_disc", "radius": 1.0},
            "factor": {"name": "quadratic_lambda", "c": -0.1}},
  "analysis": {"radii": [0.05, 0.04, 0.03, 0.02, 0.01], "n_samples": 256}}"#
            .to_string(),
        Example::Conical => format!(
            r#"{{"name": "two-atom-cone",
  "chart": {{"kind": "conical", "beta0": 0.0,
            "singularities": [{{"z": {{"x": 1.2, "y": 0.0}}, "alpha": 0.5}}, {{"z": {{"x": 0.0, "y": -1.6}}, "alpha": 0.3}}]}},
  "field": {{"kind": "dirichlet", "R": {E2}, "t1": 0.0, "t2": -2.0}},
  "analysis": {{"t_grid": {{"lo": -2.0, "hi": 0.0, "n": 200}}}}}}"#
        ),
    }
}

fn resolve(scenario: &Scenario, tol_scale: f64) -> Tolerances {
    Tolerances::resolve(&scenario.config.analysis.tolerances, tol_scale, scenario.conical.is_some())
}

fn run(cli: &Cli) -> Result<(Report, Option<PathBuf>, Option<String>), ConfigError> {
    if !(cli.tol_scale > 0.0) || !cli.tol_scale.is_finite() {
        return Err(ConfigError::new("--tol-scale must be a positive number"));
    }
    let (raw, label) = match cli.command {
        Command::Examples { name } => (example_config(name), format!("example {name:?}")),
        _ => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| ConfigError::new("--config <path> is required for this command"))?;
            let (_, raw) = config::load(path)?;
            (raw, path.display().to_string())
        }
    };
    let cfg = config::parse(&raw).map_err(|e| prefix(e, &label))?;
    let scenario = config::build(cfg, &raw).map_err(|e| prefix(e, &label))?;
    let ctx = Context {
        scenario: &scenario,
        raw: &raw,
        tol: resolve(&scenario, cli.tol_scale),
    };
    let report = match cli.command {
        Command::Profile => commands::profile(&ctx),
        Command::Convexity => commands::convexity(&ctx),
        Command::Residuals => commands::residuals(&ctx),
        Command::Audit => commands::audit(&ctx),
        Command::Bic => commands::bic(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
        Command::Examples { name } => match name {
            Example::Flat => commands::convexity(&ctx),
            Example::Hyperbolic => commands::hyperbolic_summary(&ctx, E2),
            Example::SphereCap => commands::counterexample(&ctx),
            Example::Conical => commands::bic(&ctx),
        }
        .map(|mut r| {
            r.command = "examples".into();
            r
        }),
    }
    .map_err(|e| prefix(e, &label))?;
    let dir = cli.out.clone().or_else(|| scenario.config.output.dir.clone());
    Ok((report, dir, scenario.config.output.stem.clone()))
}

fn prefix(mut e: ConfigError, label: &str) -> ConfigError {
    e.message = format!("{label}: {}", e.message);
    e
}

fn write_outputs(report: &Report, dir: Option<&Path>, stem: &str, format: Format) -> std::io::Result<()> {
    let body = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.table.to_csv(),
    };
    match dir {
        None => std::io::stdout().lock().write_all(body.as_bytes()),
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if format == Format::Csv {
                std::fs::write(dir.join(format!("{stem}.csv")), body)?;
            }
            // the JSON report carries the verdict and tolerances in both formats
            std::fs::write(dir.join(format!("{stem}.json")), report.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let (report, dir, stem) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let stem = stem.unwrap_or_else(|| report.command.clone());
    if let Err(e) = write_outputs(&report, dir.as_deref(), &stem, cli.format) {
        eprintln!("error: cannot write the report: {e}");
        return ExitCode::from(2);
    }
    eprintln!(
        "{} {} {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.command,
        report.scenario
    );
    ExitCode::from(if report.pass { 0 } else { 1 })
}
