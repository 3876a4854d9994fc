//! Prices as the uninformed agent's risk aversion goes to zero and to
//! infinity, and a signal where the small limit differs from risk neutrality.

use std::sync::Arc;

use pce::clearing::solve_kappa_hat;
use pce::economy::Economy;
use pce::equilibrium::{price, risk_neutral_price_closed_form, LimitKernel};
use pce::preferences::Crra;
use pce::special_math::QuadratureRule;
use pce::verification::limit_gap_witness;

fn main() -> pce::Result<()> {
    let e = Economy::baseline();
    let rule = QuadratureRule::gauss_hermite(100)?;
    for q in [0.1, 0.5, 0.9] {
        let h = e.h_quantile(q)?;
        let small = price(&LimitKernel::small_eta(&e, h, &rule)?, 0.0, 0.0, &rule)?;
        let large = price(&LimitKernel::large_eta(&e, h), 0.0, 0.0, &rule)?;
        println!("q = {q}: S(eta->0) = {small:.10}, S(eta->inf) = {large:.10}");
        for eta in [1e-3, 1e-2, 1e-1, 1e2, 1e3, 1e4] {
            let sol = solve_kappa_hat(&e, Arc::new(Crra::new(eta)?), h, &rule)?;
            let s = price(&sol, 0.0, 0.0, &rule)?;
            let target = if eta < 1.0 { small } else { large };
            println!(
                "  eta = {eta:>7}: S = {s:.10}, relative gap to limit {:.2e}",
                (s / target - 1.0).abs()
            );
        }
    }
    let (q, gap) = limit_gap_witness(&e, &rule)?;
    let h = e.h_quantile(q)?;
    println!(
        "\nat quantile {q} (h = {h:.6}) the eta->0 price misses the risk-neutral {:.10} by {gap:.3e}",
        risk_neutral_price_closed_form(&e, 0.0, 0.0, h)?
    );
    Ok(())
}
