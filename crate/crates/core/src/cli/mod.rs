//! Command-line driver behind the `pce` binary.
//!
//! Exit status: 0 on success, 1 when a solve or a verification check fails,
//! 2 for a bad configuration. `PCE_WORKERS` sets the size of the worker pool.

pub mod config;
pub mod selftest;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::clearing::solve_kappa_hat;
use crate::economy::Economy;
use crate::equilibrium::{
    evaluate_point, price, risk_neutral_price, risk_neutral_price_closed_form, LimitKernel,
};
use crate::error::{PceError, Result};
use crate::preferences::Crra;
use crate::special_math::{QuadratureRule, REFERENCE_ORDER};
use crate::verification::{run_full_verification, McConfig};

pub use config::Config;
pub use selftest::{selftest, SelftestLine};
pub use sweep::{run_sweep, SweepKind, SweepOutput, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const WORKERS_ENV: &str = "PCE_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "pce",
    version,
    about = "Partial-communication equilibrium prices, sweeps and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set eta_U=2`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepArg {
    Endowment,
    RiskAversion,
    Precision,
    SinglePoint,
}

impl From<SweepArg> for SweepKind {
    fn from(a: SweepArg) -> Self {
        match a {
            SweepArg::Endowment => SweepKind::Endowment,
            SweepArg::RiskAversion => SweepKind::RiskAversion,
            SweepArg::Precision => SweepKind::Precision,
            SweepArg::SinglePoint => SweepKind::SinglePoint,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep one parameter and write CSV plus a gnuplot script.
    Sweep {
        kind: SweepArg,
        /// Comma-separated grid; each sweep has a default.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, short, default_value = "sweep.csv")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Price, volatility and market price of risk at one state.
    Point {
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Factor value; defaults to `x0`.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        /// Signal realization.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "quantile")]
        h: Option<f64>,
        /// Signal quantile; the default is the median.
        #[arg(long)]
        quantile: Option<f64>,
        /// Risk-neutral price only.
        #[arg(long)]
        rn: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full verification report.
    Verify {
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        /// Seed; defaults to `mc_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        antithetic: bool,
        /// Also write the report table here.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Quick checks of the numerical kernels and the solver.
    Selftest,
}

fn exit_code(e: &PceError) -> i32 {
    match e {
        PceError::Config(_) | PceError::InvalidParameter(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Configuration from the file (if any) with overrides applied, validated.
pub fn load_config(args: &ConfigArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for o in &args.overrides {
        cfg.apply_assignment(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        PceError::Config(format!("{WORKERS_ENV} = {raw:?} is not a positive integer"))
    })?;
    // a second call in the same process finds the pool already built; keep it
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match configure_workers().and_then(|_| execute(cli.command, out, err)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Sweep {
            kind,
            grid,
            out: path,
            config,
        } => {
            let cfg = load_config(&config)?;
            let kind = SweepKind::from(kind);
            let spec = SweepSpec {
                kind,
                grid: grid.unwrap_or_else(|| sweep::default_grid(kind, &cfg.params)),
                h_quantiles: cfg.h_quantiles.clone(),
                base: cfg.params,
                quad_order: cfg.quad_order,
                output_path: path,
            };
            let result = run_sweep(&spec)?;
            for e in &result.errors {
                writeln!(err, "row failed: {e}")?;
            }
            writeln!(
                out,
                "wrote {} rows to {} ({} failed)",
                result.rows.len(),
                spec.output_path.display(),
                result.errors.len()
            )?;
            Ok(if result.errors.is_empty() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
        Command::Point {
            t,
            x,
            h,
            quantile,
            rn,
            config,
        } => {
            let cfg = load_config(&config)?;
            point(&cfg, t, x, h, quantile, rn, out)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            paths,
            seed,
            antithetic,
            out: path,
            config,
        } => {
            let cfg = load_config(&config)?;
            let mc = McConfig::new(paths, seed.unwrap_or(cfg.mc_seed), antithetic)
                .map_err(|e| PceError::Config(e.to_string()))?;
            let report = run_full_verification(cfg.params, &mc)?;
            write!(out, "{report}")?;
            if let Some(p) = path {
                std::fs::write(p, report.to_string())?;
            }
            Ok(if report.all_passed() {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
        Command::Selftest => {
            let lines = selftest();
            for l in &lines {
                writeln!(
                    out,
                    "{}\t{:.3e}\t{:.1e}\t{}",
                    l.name,
                    l.worst,
                    l.tolerance,
                    if l.passed { "PASS" } else { "FAIL" }
                )?;
            }
            Ok(if lines.iter().all(|l| l.passed) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
    }
}

fn point(
    cfg: &Config,
    t: f64,
    x: Option<f64>,
    h: Option<f64>,
    quantile: Option<f64>,
    rn: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let p = cfg.params;
    if !(0.0..=p.horizon).contains(&t) {
        return Err(PceError::Config(format!(
            "t = {t} outside [0, {}]",
            p.horizon
        )));
    }
    if let Some(q) = quantile.filter(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(PceError::Config(format!("quantile {q} outside (0, 1)")));
    }
    let e = Economy::new(p)?;
    let rule = QuadratureRule::gauss_hermite(cfg.quad_order)?;
    let x = x.unwrap_or(p.x0);
    let h = match h {
        Some(h) => h,
        None => e.h_quantile(quantile.unwrap_or(0.5))?,
    };
    writeln!(out, "t = {t}\nx = {x}\nh = {h}")?;
    if rn {
        writeln!(
            out,
            "risk_neutral_price = {}",
            risk_neutral_price(&e, t, x, h, &rule)?
        )?;
        writeln!(
            out,
            "risk_neutral_closed_form = {}",
            risk_neutral_price_closed_form(&e, t, x, h)?
        )?;
        return Ok(());
    }
    let sol = solve_kappa_hat(&e, Arc::new(Crra::new(p.eta_u)?), h, &rule)?;
    let reference = QuadratureRule::gauss_hermite(REFERENCE_ORDER)?;
    let pt = evaluate_point(&sol, t, x, &rule, Some(&reference))?;
    let small = LimitKernel::small_eta(&e, h, &rule)?;
    let large = LimitKernel::large_eta(&e, h);
    writeln!(out, "price = {}", pt.price)?;
    writeln!(out, "volatility = {}", pt.volatility)?;
    writeln!(out, "rel_volatility = {}", pt.relative_volatility())?;
    writeln!(out, "mpr = {}", pt.mpr)?;
    writeln!(out, "kappa_hat = {}", sol.kappa_hat)?;
    writeln!(out, "budget_residual = {:e}", sol.budget_residual)?;
    writeln!(out, "g_evaluations = {}", sol.stats.g_evaluations)?;
    writeln!(out, "multiple_roots = {}", sol.stats.multiple_roots)?;
    writeln!(out, "quad_flag = {}", pt.quad_flag)?;
    writeln!(
        out,
        "limit_price_small_eta = {}",
        price(&small, t, x, &rule)?
    )?;
    writeln!(
        out,
        "limit_price_large_eta = {}",
        price(&large, t, x, &rule)?
    )?;
    Ok(())
}
