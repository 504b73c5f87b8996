//! `statpot` - config-driven sweeps, acceptance-style check suites, and a
//! direct Schwarzschild shortcut.
//!
//! Exit codes: 0 success, 1 failed checks/assertions, 2 configuration
//! errors, 3 numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use statpot::runner::{
    self, build_t_grid, FieldSection, FunctionalsSection, GridSpacing, LevelsSection, Mode,
    QuadratureSection, RunConfig, RunSection, ToleranceSection,
};
use statpot::Error;

#[derive(Parser)]
#[command(name = "statpot", version, about = "Level-set functionals and sharp inequalities for bounded static potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a TOML run config and write its artifacts.
    Run {
        /// Path to the run configuration.
        config: PathBuf,
    },
    /// Run a named check suite (or a config file with a `[check]` section).
    Check {
        /// Suite name (schwarzschild-rigidity, kato, monopole-flux,
        /// cylinder-identity, conformal, willmore, all) or a config path.
        target: String,
        /// Rescale the right-hand sides (negative control when != 1).
        #[arg(long, default_value_t = 1.0)]
        rhs_scale: f64,
        /// Override the per-check tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Sweep a Schwarzschild model without writing a config file.
    Schwarzschild(SchwarzschildArgs),
}

#[derive(Args)]
struct SchwarzschildArgs {
    /// Ambient dimension (>= 3).
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// ADM mass (> 0).
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Comma-separated capacity exponents.
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    p: Vec<f64>,
    /// Level grid as min:max:count[:linear|:tanh-uniform].
    #[arg(long = "t-grid", default_value = "0.05:0.95:19")]
    t_grid: String,
    /// Output directory (defaults to $STATPOT_OUT_DIR, then `.`).
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    /// Comma-separated artifact formats.
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<String>,
    /// Satisfaction tolerance for the inequality reports.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Cells per axis when the triangulation backend is requested.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

fn parse_t_grid(text: &str) -> Result<LevelsSection, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(Error::Config(format!(
            "t-grid must be min:max:count[:spacing], got '{text}'"
        )));
    }
    let parse_f = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number '{s}' in t-grid")))
    };
    let spacing = match parts.get(3) {
        None | Some(&"linear") => GridSpacing::Linear,
        Some(&"tanh-uniform") => GridSpacing::TanhUniform,
        Some(other) => {
            return Err(Error::Config(format!("unknown spacing '{other}'")));
        }
    };
    Ok(LevelsSection {
        t_min: parse_f(parts[0])?,
        t_max: parse_f(parts[1])?,
        count: parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad count '{}'", parts[2])))?,
        spacing,
    })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) => 2,
        _ => 3,
    }
}

fn execute() -> Result<u8, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let config = RunConfig::from_path(&config)?;
            let summary = runner::run(&config)?;
            eprintln!(
                "wrote {} into {}",
                summary.artifacts.join(", "),
                summary.out_dir.display()
            );
            Ok(if summary.check_failures > 0 { 1 } else { 0 })
        }
        Command::Check {
            target,
            rhs_scale,
            tol,
        } => {
            let (suite, scale, tol) = if target.ends_with(".toml") {
                let config = RunConfig::from_path(PathBuf::from(&target).as_path())?;
                let check = config.check.ok_or_else(|| {
                    Error::Config("config has no [check] section".into())
                })?;
                (check.suite, check.rhs_scale, check.tol)
            } else {
                (target, rhs_scale, tol)
            };
            let outcome = runner::run_check_suite(&suite, scale, tol)?;
            print!("{}", outcome.to_table());
            Ok(if outcome.passed() { 0 } else { 1 })
        }
        Command::Schwarzschild(args) => {
            let levels = parse_t_grid(&args.t_grid)?;
            let config = RunConfig {
                run: RunSection {
                    mode: Mode::Schwarzschild,
                    n: args.n,
                    out_dir: args.out_dir,
                    formats: args.format,
                },
                field: FieldSection {
                    m: Some(args.m),
                    centers: None,
                    weights: None,
                },
                levels: Some(levels),
                functionals: Some(FunctionalsSection { p: args.p }),
                quadrature: QuadratureSection {
                    resolution: args.resolution,
                    ..Default::default()
                },
                tolerances: ToleranceSection {
                    tol: args.tol,
                    ..Default::default()
                },
                grid: None,
                check: None,
            };
            // Exercised here only to give early feedback on a bad grid.
            build_t_grid(config.levels.as_ref().unwrap())?;
            let summary = runner::run(&config)?;
            eprintln!(
                "wrote {} into {}",
                summary.artifacts.join(", "),
                summary.out_dir.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
