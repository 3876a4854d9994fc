//! The three sensitivity sweeps, written as CSV and gnuplot scripts under
//! `target/sweeps/`, with a summary of the direction of each curve.

use std::path::PathBuf;

use pce::cli::sweep::{default_grid, run_sweep, Row, SweepKind, SweepSpec};
use pce::economy::EconomyParams;

fn direction(values: &[f64]) -> &'static str {
    if values.windows(2).all(|w| w[1] < w[0]) {
        "decreasing"
    } else if values.windows(2).all(|w| w[1] > w[0]) {
        "increasing"
    } else {
        "mixed"
    }
}

fn main() -> pce::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/sweeps");
    std::fs::create_dir_all(&dir)?;
    let base = EconomyParams::baseline();
    for (kind, name) in [
        (SweepKind::RiskAversion, "risk_aversion"),
        (SweepKind::Endowment, "endowment"),
        (SweepKind::Precision, "precision"),
    ] {
        let spec = SweepSpec {
            kind,
            grid: default_grid(kind, &base),
            h_quantiles: vec![0.1, 0.5, 0.9],
            base,
            quad_order: 100,
            output_path: dir.join(format!("{name}.csv")),
        };
        let out = run_sweep(&spec)?;
        println!(
            "{name}: {} rows -> {}",
            out.rows.len(),
            spec.output_path.display()
        );
        for &q in &spec.h_quantiles {
            let rows: Vec<&Row> = out
                .rows
                .iter()
                .filter(|r| r.h_quantile == q && r.sweep_var.is_finite() && r.sweep_var > 0.0)
                .collect();
            let prices: Vec<f64> = rows.iter().map(|r| r.price0).collect();
            let mprs: Vec<f64> = rows.iter().map(|r| r.mpr0).collect();
            println!(
                "  q = {q}: price {}, MPR {}",
                direction(&prices),
                direction(&mprs)
            );
        }
    }
    Ok(())
}
