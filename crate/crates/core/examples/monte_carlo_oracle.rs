//! Importance-sampling cross-check of the quadrature prices and the full
//! verification report.

use std::sync::Arc;

use pce::clearing::solve_kappa_hat;
use pce::economy::{Economy, EconomyParams};
use pce::equilibrium::{price, risk_neutral_price_closed_form, LimitKernel};
use pce::preferences::Crra;
use pce::special_math::QuadratureRule;
use pce::verification::{mc_price, run_full_verification, McConfig};

fn main() -> pce::Result<()> {
    let e = Economy::baseline();
    let rule = QuadratureRule::gauss_hermite(100)?;
    let cfg = McConfig::new(1_000_000, 42, false)?;

    let rn = LimitKernel::risk_neutral(&e, 0.055);
    let est = mc_price(&rn, 0.0, 0.0, &cfg)?;
    let exact = risk_neutral_price_closed_form(&e, 0.0, 0.0, 0.055)?;
    println!(
        "risk neutral: MC {:.6} +- {:.1e} vs {exact:.6} ({:.2} SE)",
        est.estimate,
        est.std_error,
        est.z_score(exact)
    );

    for q in [0.1, 0.5, 0.9] {
        let h = e.h_quantile(q)?;
        for eta in [0.5, 1.0, 5.0] {
            let sol = solve_kappa_hat(&e, Arc::new(Crra::new(eta)?), h, &rule)?;
            let quad = price(&sol, 0.0, 0.0, &rule)?;
            let est = mc_price(&sol, 0.0, 0.0, &cfg)?;
            println!(
                "q = {q}, eta = {eta}: quadrature {quad:.8}, MC {:.8} +- {:.1e}, {:.2} SE, ESS {:.0}",
                est.estimate,
                est.std_error,
                est.z_score(quad),
                est.ess
            );
        }
    }

    let report = run_full_verification(
        EconomyParams::baseline(),
        &McConfig::new(100_000, 7, false)?,
    )?;
    print!("\n{report}");
    Ok(())
}
