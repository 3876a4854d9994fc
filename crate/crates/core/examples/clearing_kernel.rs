//! Pointwise clearing and the budget multiplier for one signal realization.
//!
//! Solves `kappa_hat` at the median signal for a few risk aversions, prints the
//! state-price kernel across terminal states and checks it against the
//! generic (non-closed-form) solver and the `z~` bounds.

use std::sync::Arc;

use pce::clearing::{budget_g, solve_kappa_hat, solve_log_z_generic};
use pce::economy::Economy;
use pce::preferences::{Crra, GeneralUtility};
use pce::special_math::QuadratureRule;

fn main() -> pce::Result<()> {
    let e = Economy::baseline();
    let rule = QuadratureRule::gauss_hermite(100)?;
    let h = e.h_quantile(0.5)?;
    println!(
        "alpha_I + alpha_N = {:.6}, C_U = {:.6}, h = {h}",
        e.alpha_sum(),
        e.derived.c_u
    );

    for eta in [0.5, 1.0, 5.0] {
        let sol = solve_kappa_hat(&e, Arc::new(Crra::new(eta)?), h, &rule)?;
        println!(
            "\neta_U = {eta}: kappa_hat = {:.10}, g - 1 = {:.1e}, {} g evaluations",
            sol.kappa_hat, sol.budget_residual, sol.stats.g_evaluations
        );
        let generic = GeneralUtility::power(eta)?;
        println!(
            "  {:>6} {:>14} {:>10} {:>7}",
            "x", "z", "rel diff", "bounds"
        );
        for x in [-0.9, -0.45, 0.0, 0.45, 0.9] {
            let closed = sol.log_z(x)?;
            let other = solve_log_z_generic(&e, &generic, x, h, sol.kappa_hat)?;
            println!(
                "  {x:>6.2} {:>14.8e} {:>10.1e} {:>7}",
                closed.exp(),
                (closed - other).exp_m1().abs(),
                sol.check_bounds(x)?
            );
        }
        let u = Crra::new(eta)?;
        let g: Vec<String> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|d| budget_g(&e, &u, h, sol.kappa_hat + d, &rule).map(|g| format!("{g:.6}")))
            .collect::<pce::Result<_>>()?;
        println!(
            "  g(kappa_hat - 1, kappa_hat, kappa_hat + 1) = {}",
            g.join(", ")
        );
    }
    Ok(())
}
