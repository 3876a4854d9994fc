//! Fast invariant suite over the numerical kernels and the clearing solver.

use std::f64::consts::E;
use std::sync::Arc;

use crate::clearing::{
    clearing_residual, log_z_crra, solve_kappa_hat, solve_log_z_generic, solve_z,
};
use crate::economy::{Economy, EconomyParams};
use crate::error::Result;
use crate::preferences::{Crra, GeneralUtility, Utility};
use crate::special_math::{lambert_w0, log_sum_exp, GaussianLaw, QuadratureRule, DEFAULT_ORDER};
use crate::verification::diagnostic_grid;

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestLine {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

fn line(name: &'static str, worst: Result<f64>, tolerance: f64) -> SelftestLine {
    let worst = worst.unwrap_or(f64::NAN);
    SelftestLine {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

fn lambert() -> Result<f64> {
    let mut worst: f64 = (lambert_w0(E)? - 1.0).abs();
    for k in 0..=60 {
        let y = -0.36 + (k as f64 * 0.35).exp() - 1.0;
        let w = lambert_w0(y)?;
        worst = worst.max((w * w.exp() - y).abs() / y.abs().max(1.0));
    }
    Ok(worst)
}

/// Gauss-Hermite moments of `N(0.3, 0.5)` against their closed forms.
fn hermite_moments() -> Result<f64> {
    let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER)?;
    let (m, v) = (0.3, 0.5);
    let law = GaussianLaw::new(m, v)?;
    let mgf = (m + 0.5 * v).exp();
    let mut worst: f64 = (rule.expect(&law, f64::exp)? / mgf - 1.0).abs();
    worst = worst.max((rule.expect(&law, |x| x * x)? - (v + m * m)).abs());
    let fourth = m.powi(4) + 6.0 * m * m * v + 3.0 * v * v;
    worst = worst.max((rule.expect(&law, |x| x.powi(4))? / fourth - 1.0).abs());
    Ok(worst)
}

fn log_sum_exp_check() -> Result<f64> {
    let xs = [-1.5, 0.25, 2.0, 3.5];
    let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
    let shifted = log_sum_exp(xs.iter().map(|x| x + 800.0)) - 800.0;
    Ok((log_sum_exp(xs) - naive).abs().max((shifted - naive).abs()))
}

/// Clearing residual of the closed form over an `x` by `h` by `kappa` grid.
fn clearing_grid(e: &Economy) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for eta in [0.5, 1.0, 5.0] {
        let u = Crra::new(eta)?;
        for q in [0.1, 0.5, 0.9] {
            let h = e.h_quantile(q)?;
            for i in 0..=10 {
                let x = -1.5 + 0.3 * i as f64;
                for kappa in [-3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0] {
                    let z = solve_z(e, &u, x, h, kappa)?;
                    worst = worst.max(clearing_residual(e, &u, x, h, kappa, z).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn closed_form_vs_generic(e: &Economy) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for eta in [0.5, 1.0, 5.0] {
        let g = GeneralUtility::power(eta)?;
        for i in 0..=10 {
            let x = -1.5 + 0.3 * i as f64;
            for kappa in [-1.0, 0.0, 1.0] {
                let closed = log_z_crra(e, eta, e.vartheta(x, 0.055) + kappa);
                let generic = solve_log_z_generic(e, &g, x, 0.055, kappa)?;
                worst = worst.max((closed - generic).exp_m1().abs());
            }
        }
    }
    Ok(worst)
}

/// Budget residual at the root and bound violations over the diagnostic grid.
fn budget_and_bounds(e: &Economy) -> Result<(f64, f64)> {
    let rule = QuadratureRule::gauss_hermite(DEFAULT_ORDER)?;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for q in [0.1, 0.5, 0.9] {
        let h = e.h_quantile(q)?;
        for eta in [0.5, 1.0, 5.0] {
            let u: Arc<dyn Utility> = Arc::new(Crra::new(eta)?);
            let sol = solve_kappa_hat(e, u, h, &rule)?;
            worst = worst.max(sol.budget_residual.abs());
            for x in diagnostic_grid(e) {
                if !sol.check_bounds(x)? {
                    violations += 1;
                }
            }
        }
    }
    Ok((worst, violations as f64))
}

/// Runs the suite on the baseline economy.
pub fn selftest() -> Vec<SelftestLine> {
    let e = Economy::new(EconomyParams::baseline()).expect("baseline parameters are valid");
    let (budget, bounds) = match budget_and_bounds(&e) {
        Ok((b, v)) => (Ok(b), Ok(v)),
        Err(err) => (Err(err.clone()), Err(err)),
    };
    vec![
        line("lambert_w0", lambert(), 1e-13),
        line("gauss_hermite_moments", hermite_moments(), 1e-12),
        line("log_sum_exp", log_sum_exp_check(), 1e-13),
        line("clearing_residual", clearing_grid(&e), 1e-10),
        line("closed_form_vs_generic", closed_form_vs_generic(&e), 1e-9),
        line("budget_root", budget, 1e-8),
        line("kernel_bounds", bounds, 0.0),
    ]
}
