//! Lambert W on and beyond the overflow range, and Gaussian expectations by
//! Gauss-Hermite and by the piecewise rule used around kinks.

use pce::special_math::{
    lambert_w0, lambert_w0_exp, ln_lambert_w0_exp, GaussianLaw, QuadratureRule, BRANCH_POINT,
};

fn main() -> pce::Result<()> {
    println!("W0(y)");
    for y in [
        BRANCH_POINT,
        -0.2,
        0.0,
        1.0,
        std::f64::consts::E,
        1e3,
        1e300,
    ] {
        let w = lambert_w0(y)?;
        println!("  y = {y:<12.6e} W = {w:.15}");
    }
    // exp(2000) overflows, W(exp(s)) does not
    for s in [-700.0, 20.0, 2000.0] {
        println!(
            "  W(e^{s}) = {:.12e}, ln W = {:.12e}",
            lambert_w0_exp(s),
            ln_lambert_w0_exp(s)
        );
    }

    let law = GaussianLaw::new(0.055, 0.09)?;
    let rule = QuadratureRule::gauss_hermite(100)?;
    let mgf = rule.expect(&law, f64::exp)?;
    println!(
        "\nE[e^X] = {mgf:.15} (exact {:.15})",
        (0.055f64 + 0.045).exp()
    );

    // (x - 0.2)^+ has a kink; split the rule there
    let kinked = |x: f64| (x - 0.2).max(0.0);
    let plain = rule.expect(&law, kinked)?;
    let split: f64 = rule
        .log_nodes(&law, &[0.2])
        .into_iter()
        .map(|(x, lw)| lw.exp() * kinked(x))
        .sum();
    let d = (0.2 - law.mean()) / law.std_dev();
    let pdf = (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let tail = 0.5 * statrs::function::erf::erfc(d / 2f64.sqrt());
    let exact = law.std_dev() * pdf - (0.2 - law.mean()) * tail;
    println!(
        "E[(X - 0.2)^+] = {exact:.15}: hermite error {:.1e}, piecewise error {:.1e}",
        (plain - exact).abs(),
        (split - exact).abs()
    );
    Ok(())
}
