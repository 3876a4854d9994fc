//! Sensitivity sweeps: one CSV row per grid value and signal quantile, plus a
//! gnuplot script that draws the three panels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::clearing::{ln_small_eta_ratio, solve_kappa_hat};
use crate::economy::{Economy, EconomyParams};
use crate::equilibrium::{evaluate_point, LimitKernel, LimitKind, StateKernel};
use crate::error::{PceError, Result};
use crate::preferences::Crra;
use crate::special_math::QuadratureRule;

pub const CSV_HEADER: &str =
    "sweep_var,h_quantile,h_value,price0,volatility0,rel_volatility0,mpr0,kappa_hat,budget_residual";

/// Points in the default endowment and precision grids.
pub const DEFAULT_GRID_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// `omega_U pi0_U`, moved through `pi0_U` with `omega_U` fixed.
    Endowment,
    /// `eta_U`, with the two limits appended as `0` and `inf` rows.
    RiskAversion,
    /// Noise-trader precision `P_N = 1 / C_N`.
    Precision,
    /// The base economy alone; `sweep_var` is `eta_U`.
    SinglePoint,
}

impl SweepKind {
    pub fn label(self) -> &'static str {
        match self {
            SweepKind::Endowment => "uninformed weighted initial share position",
            SweepKind::RiskAversion => "uninformed relative risk aversion",
            SweepKind::Precision => "noise-trader signal precision",
            SweepKind::SinglePoint => "uninformed relative risk aversion",
        }
    }

    fn log_axis(self) -> bool {
        matches!(self, SweepKind::RiskAversion | SweepKind::Precision)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub h_quantiles: Vec<f64>,
    pub base: EconomyParams,
    pub quad_order: usize,
    pub output_path: PathBuf,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(PceError::Config("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PceError::Config(
                "sweep grid must be strictly increasing".into(),
            ));
        }
        if self.grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PceError::Config(
                "sweep grid values must be positive".into(),
            ));
        }
        if self.h_quantiles.is_empty() || self.h_quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(PceError::Config(
                "h quantiles must be non-empty and lie in (0, 1)".into(),
            ));
        }
        self.base
            .validate()
            .map_err(|e| PceError::Config(e.to_string()))
    }

    /// Economy at one grid value.
    pub fn params_at(&self, v: f64) -> EconomyParams {
        let mut p = self.base;
        match self.kind {
            SweepKind::Endowment => p.pi0_u = v / p.omega_u,
            SweepKind::RiskAversion => p.eta_u = v,
            SweepKind::Precision => p.c_n = 1.0 / v,
            SweepKind::SinglePoint => {}
        }
        p
    }
}

/// Default grid of each sweep.
pub fn default_grid(kind: SweepKind, base: &EconomyParams) -> Vec<f64> {
    let n = DEFAULT_GRID_POINTS;
    match kind {
        SweepKind::RiskAversion => vec![0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0],
        SweepKind::Endowment => (0..n)
            .map(|i| 0.05 + 0.55 * i as f64 / (n - 1) as f64)
            .collect(),
        SweepKind::Precision => {
            let (lo, hi) = (0.5f64.ln(), 1000f64.ln());
            (0..n)
                .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
        SweepKind::SinglePoint => vec![base.eta_u],
    }
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub sweep_var: f64,
    pub h_quantile: f64,
    pub h_value: f64,
    pub price0: f64,
    pub volatility0: f64,
    pub rel_volatility0: f64,
    pub mpr0: f64,
    pub kappa_hat: f64,
    pub budget_residual: f64,
}

impl Row {
    fn failed(sweep_var: f64, h_quantile: f64, h_value: f64) -> Self {
        let nan = f64::NAN;
        Self {
            sweep_var,
            h_quantile,
            h_value,
            price0: nan,
            volatility0: nan,
            rel_volatility0: nan,
            mpr0: nan,
            kappa_hat: nan,
            budget_residual: nan,
        }
    }

    pub fn is_error(&self) -> bool {
        self.price0.is_nan()
    }

    pub fn to_csv(&self) -> String {
        [
            self.sweep_var,
            self.h_quantile,
            self.h_value,
            self.price0,
            self.volatility0,
            self.rel_volatility0,
            self.mpr0,
            self.kappa_hat,
            self.budget_residual,
        ]
        .iter()
        .map(|v| format_sig12(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// `v` rounded to 12 significant digits, in plain notation unless the
/// exponent is below -5 or above 11.
pub fn format_sig12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let rounded: f64 = sci.parse().unwrap_or(v);
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Solves the economy at signal quantile `q` and evaluates the time-zero point.
pub fn solve_cell(
    params: EconomyParams,
    sweep_var: f64,
    q: f64,
    rule: &QuadratureRule,
) -> Result<Row> {
    let e = Economy::new(params)?;
    let h = e.h_quantile(q)?;
    let sol = solve_kappa_hat(&e, Arc::new(Crra::new(params.eta_u)?), h, rule)?;
    let pt = evaluate_point(&sol, 0.0, params.x0, rule, None)?;
    Ok(Row {
        sweep_var,
        h_quantile: q,
        h_value: h,
        price0: pt.price,
        volatility0: pt.volatility,
        rel_volatility0: pt.relative_volatility(),
        mpr0: pt.mpr,
        kappa_hat: sol.kappa_hat,
        budget_residual: sol.budget_residual,
    })
}

/// Rows for the `eta_U -> 0` (`sweep_var = 0`) and `eta_U -> inf` limits.
/// The large limit has no multiplier, so its last two columns are `nan`.
pub fn limit_row(params: EconomyParams, small: bool, q: f64, rule: &QuadratureRule) -> Result<Row> {
    let e = Economy::new(params)?;
    let h = e.h_quantile(q)?;
    let kernel = if small {
        LimitKernel::small_eta(&e, h, rule)?
    } else {
        LimitKernel::large_eta(&e, h)
    };
    let pt = evaluate_point(&kernel, 0.0, params.x0, rule, None)?;
    let (kappa, residual) = match kernel.kind {
        LimitKind::SmallEta { kappa0 } => (
            kappa0,
            (ln_small_eta_ratio(&e, h, kappa0, rule) + params.omega_u.ln()).exp() - 1.0,
        ),
        _ => (f64::NAN, f64::NAN),
    };
    Ok(Row {
        sweep_var: if small { 0.0 } else { f64::INFINITY },
        h_quantile: q,
        h_value: kernel.h(),
        price0: pt.price,
        volatility0: pt.volatility,
        rel_volatility0: pt.relative_volatility(),
        mpr0: pt.mpr,
        kappa_hat: kappa,
        budget_residual: residual,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<Row>,
    /// One message per failed row, in row order.
    pub errors: Vec<String>,
}

enum Cell {
    Grid(f64),
    Limit(bool),
}

/// Computes every row in deterministic order: grid value ascending, then
/// quantile in the given order. Risk-aversion sweeps open with the `0` rows
/// and close with the `inf` rows.
pub fn compute_rows(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let rule = QuadratureRule::gauss_hermite(spec.quad_order)?;
    let mut cells: Vec<(Cell, f64)> = Vec::new();
    let risk = spec.kind == SweepKind::RiskAversion;
    if risk {
        cells.extend(spec.h_quantiles.iter().map(|&q| (Cell::Limit(true), q)));
    }
    for &v in &spec.grid {
        cells.extend(spec.h_quantiles.iter().map(|&q| (Cell::Grid(v), q)));
    }
    if risk {
        cells.extend(spec.h_quantiles.iter().map(|&q| (Cell::Limit(false), q)));
    }
    let results: Vec<(Row, Option<String>)> = cells
        .par_iter()
        .map(|(cell, q)| {
            let (v, outcome) = match *cell {
                Cell::Grid(v) => (v, solve_cell(spec.params_at(v), v, *q, &rule)),
                Cell::Limit(small) => (
                    if small { 0.0 } else { f64::INFINITY },
                    limit_row(spec.base, small, *q, &rule),
                ),
            };
            match outcome {
                Ok(row) => (row, None),
                Err(err) => {
                    let p = if let Cell::Grid(v) = *cell {
                        spec.params_at(v)
                    } else {
                        spec.base
                    };
                    let h = Economy::new(p)
                        .and_then(|e| e.h_quantile(*q))
                        .unwrap_or(f64::NAN);
                    (
                        Row::failed(v, *q, h),
                        Some(format!("sweep_var={v} h_quantile={q}: {err}")),
                    )
                }
            }
        })
        .collect();
    let mut out = SweepOutput::default();
    for (row, err) in results {
        out.rows.push(row);
        out.errors.extend(err);
    }
    Ok(out)
}

pub fn render_csv(rows: &[Row]) -> String {
    let mut s = String::with_capacity(128 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// Gnuplot script for the three panels: price upper left, volatility upper
/// right, market price of risk along the bottom.
pub fn plot_script(spec: &SweepSpec, csv_path: &Path) -> String {
    let csv = csv_path.file_name().map_or_else(
        || csv_path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let png = Path::new(&csv).with_extension("png");
    let qs: Vec<String> = spec.h_quantiles.iter().map(|q| format_sig12(*q)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "# {} sweep", spec.kind.label());
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 1200,900");
    let _ = writeln!(s, "set output '{}'", png.display());
    let _ = writeln!(s, "quantiles = '{}'", qs.join(" "));
    if spec.kind.log_axis() {
        let _ = writeln!(s, "set logscale x");
    }
    let _ = writeln!(s, "set xlabel '{}'", spec.kind.label());
    let _ = writeln!(s, "set key top left");
    let _ = writeln!(s, "set multiplot");
    let panels = [
        ("price", 4, "0.5,0.5", "0,0.5"),
        ("volatility", 5, "0.5,0.5", "0.5,0.5"),
        ("market price of risk", 7, "1,0.5", "0,0"),
    ];
    for (title, col, size, origin) in panels {
        let _ = writeln!(s, "set size {size}");
        let _ = writeln!(s, "set origin {origin}");
        let _ = writeln!(s, "set title '{title}'");
        let _ = writeln!(
            s,
            "plot for [q in quantiles] '{csv}' skip 1 using 1:(abs($2 - (q + 0)) < 1e-9 ? ${col} : NaN) with linespoints title 'h quantile '.q"
        );
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

/// Runs the sweep and writes the CSV to `spec.output_path` and the plot
/// script beside it with extension `gp`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    let out = compute_rows(spec)?;
    std::fs::write(&spec.output_path, render_csv(&out.rows))?;
    std::fs::write(
        spec.output_path.with_extension("gp"),
        plot_script(spec, &spec.output_path),
    )?;
    Ok(out)
}
