//! Price, volatility and market price of risk at the baseline, plus the
//! wealth-profile identities behind them.

use std::sync::Arc;

use pce::clearing::solve_kappa_hat;
use pce::economy::Economy;
use pce::equilibrium::{evaluate_point, signal_measure_nodes, tower_check, WealthProfile};
use pce::preferences::Crra;
use pce::special_math::{QuadratureRule, REFERENCE_ORDER};

fn main() -> pce::Result<()> {
    let e = Economy::baseline();
    let rule = QuadratureRule::gauss_hermite(100)?;
    let reference = QuadratureRule::gauss_hermite(REFERENCE_ORDER)?;
    for q in [0.1, 0.5, 0.9] {
        let h = e.h_quantile(q)?;
        let sol = solve_kappa_hat(&e, Arc::new(Crra::new(5.0)?), h, &rule)?;
        let pt = evaluate_point(&sol, 0.0, 0.0, &rule, Some(&reference))?;
        println!(
            "q = {q}: S0 = {:.12}, sigma = {:.9}, sigma/S = {:.9}, MPR = {:.9}, order flag {}",
            pt.price,
            pt.volatility,
            pt.relative_volatility(),
            pt.mpr,
            pt.quad_flag
        );

        let wealth = WealthProfile::consistent(&sol, &rule)?;
        let nodes = signal_measure_nodes(&sol, &rule)?;
        let worst = nodes
            .xs
            .iter()
            .map(|&x| wealth.clearing_residual(x).map(f64::abs))
            .collect::<pce::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let e_wi = nodes.expect(|x| wealth.w_i(x).unwrap_or(f64::NAN));
        let e_wu = nodes.expect(|x| wealth.w_u(x).unwrap_or(f64::NAN));
        println!(
            "        clearing residual {worst:.1e}, E[w_I] = {e_wi:.1e}, E[w_U]/w0_U - 1 = {:.1e}",
            e_wu / wealth.w0_u - 1.0
        );
        for t in [0.25, 0.5, 0.75] {
            let (lhs, rhs) = tower_check(&sol, t, &rule)?;
            print!("        tower t={t}: {:.1e}", lhs / rhs - 1.0);
        }
        println!();
    }
    Ok(())
}
