//! Prices, volatilities and market prices of risk at a point `(t, x, h)`.
//!
//! Under the signal-conditional martingale measure `Q^h`,
//! `S(t, x, h) = E[Psi z l | X_t = x] / E[z l | X_t = x]` where `l` is the
//! likelihood tilt `exp(-P_U x^2 / 2 + P_U h x)`. Everything here is generic
//! over the kernel `z`, so the equilibrium, its two risk-aversion limits and
//! the risk-neutral reference share one code path.

use crate::clearing::{solve_kappa_small_eta, ClearingSolution};
use crate::economy::Economy;
use crate::error::{PceError, Result};
use crate::special_math::{log_sum_exp, tilted_gaussian, GaussianLaw, QuadratureRule, TiltedNodes};

/// Finite-difference step in `x`; Richardson extrapolation also uses twice this.
pub const X_STEP: f64 = 1e-4;
/// Time step of the drift check.
pub const T_STEP: f64 = 1e-4;
/// Relative disagreement between the two quadrature orders that raises `quad_flag`.
pub const QUAD_FLAG_TOLERANCE: f64 = 1e-8;

/// A terminal state-price kernel for a fixed signal realization.
pub trait StateKernel: Sync {
    fn economy(&self) -> &Economy;

    fn h(&self) -> f64;

    /// `ln z(x)`, up to an additive constant.
    fn log_kernel(&self, x: f64) -> Result<f64>;

    /// Points where `ln z` has a kink or a thin transition layer, inside the
    /// support of `law`; quadrature splits there.
    fn breakpoints(&self, _law: &GaussianLaw) -> Vec<f64> {
        Vec::new()
    }
}

impl StateKernel for ClearingSolution {
    fn economy(&self) -> &Economy {
        ClearingSolution::economy(self)
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn log_kernel(&self, x: f64) -> Result<f64> {
        self.log_z(x)
    }

    fn breakpoints(&self, law: &GaussianLaw) -> Vec<f64> {
        self.economy().clearing_kinks(self.h, self.kappa_hat, law)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitKind {
    /// `z = 1`.
    RiskNeutral,
    /// `ln z = -vartheta / alpha`.
    LargeEta,
    /// `ln z = (vartheta + kappa0)^- / alpha`.
    SmallEta { kappa0: f64 },
}

/// Kernels that need no clearing solve.
#[derive(Debug, Clone, Copy)]
pub struct LimitKernel {
    economy: Economy,
    h: f64,
    pub kind: LimitKind,
}

impl LimitKernel {
    pub fn risk_neutral(economy: &Economy, h: f64) -> Self {
        Self {
            economy: *economy,
            h,
            kind: LimitKind::RiskNeutral,
        }
    }

    pub fn large_eta(economy: &Economy, h: f64) -> Self {
        Self {
            economy: *economy,
            h,
            kind: LimitKind::LargeEta,
        }
    }

    pub fn small_eta_with(economy: &Economy, h: f64, kappa0: f64) -> Self {
        Self {
            economy: *economy,
            h,
            kind: LimitKind::SmallEta { kappa0 },
        }
    }

    /// Solves for the limit multiplier first.
    pub fn small_eta(economy: &Economy, h: f64, rule: &QuadratureRule) -> Result<Self> {
        let kappa0 = solve_kappa_small_eta(economy, h, rule)?;
        Ok(Self::small_eta_with(economy, h, kappa0))
    }
}

impl StateKernel for LimitKernel {
    fn economy(&self) -> &Economy {
        &self.economy
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn log_kernel(&self, x: f64) -> Result<f64> {
        let e = &self.economy;
        Ok(match self.kind {
            LimitKind::RiskNeutral => 0.0,
            LimitKind::LargeEta => -e.vartheta(x, self.h) / e.alpha_sum(),
            LimitKind::SmallEta { kappa0 } => {
                (-(e.vartheta(x, self.h) + kappa0)).max(0.0) / e.alpha_sum()
            }
        })
    }

    fn breakpoints(&self, law: &GaussianLaw) -> Vec<f64> {
        match self.kind {
            LimitKind::SmallEta { kappa0 } => self.economy.clearing_kinks(self.h, kappa0, law),
            _ => Vec::new(),
        }
    }
}

/// `ln z(x) + ln l(x)` at a terminal state.
fn ln_weight(kernel: &dyn StateKernel, x: f64) -> Result<f64> {
    Ok(kernel.log_kernel(x)? + kernel.economy().ln_tilt(x, kernel.h()))
}

/// `(Lambda, ln E[Psi z l | X_t = x])`.
fn ln_moments(
    kernel: &dyn StateKernel,
    t: f64,
    x: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    let e = kernel.economy();
    match e.conditional_law(t, x)? {
        None => {
            let w = ln_weight(kernel, x)?;
            Ok((w, w + e.ln_payoff(x)))
        }
        Some(law) => {
            let mut base = Vec::with_capacity(rule.order());
            let mut pay = Vec::with_capacity(rule.order());
            for (y, lw) in rule.log_nodes(&law, &kernel.breakpoints(&law)) {
                let v = lw + ln_weight(kernel, y)?;
                base.push(v);
                pay.push(v + e.ln_payoff(y));
            }
            let lambda = log_sum_exp(base);
            if !lambda.is_finite() {
                return Err(PceError::Overflow(format!(
                    "log kernel expectation is {lambda} at t = {t}, x = {x}"
                )));
            }
            Ok((lambda, log_sum_exp(pay)))
        }
    }
}

/// `Lambda(t, x, h) = ln E[z l | X_t = x]`.
pub fn log_kernel_lambda(
    kernel: &dyn StateKernel,
    t: f64,
    x: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    ln_moments(kernel, t, x, rule).map(|(l, _)| l)
}

/// `S(t, x, h)`.
pub fn price(kernel: &dyn StateKernel, t: f64, x: f64, rule: &QuadratureRule) -> Result<f64> {
    let e = kernel.economy();
    if e.conditional_law(t, x)?.is_none() {
        return Ok(e.payoff(x));
    }
    let (lambda, pay) = ln_moments(kernel, t, x, rule)?;
    Ok((pay - lambda).exp())
}

/// Central difference at steps `d` and `2d`, combined by Richardson extrapolation.
pub fn richardson_derivative<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    x: f64,
    d: f64,
) -> Result<f64> {
    let d1 = (f(x + d)? - f(x - d)?) / (2.0 * d);
    let d2 = (f(x + 2.0 * d)? - f(x - 2.0 * d)?) / (4.0 * d);
    Ok((4.0 * d1 - d2) / 3.0)
}

/// Diffusion coefficient `sigma_X dS/dx` of the price.
pub fn volatility(kernel: &dyn StateKernel, t: f64, x: f64, rule: &QuadratureRule) -> Result<f64> {
    let e = kernel.economy();
    let sigma = e.params.sigma_x;
    if e.conditional_law(t, x)?.is_none() {
        return Ok(sigma * (e.params.payoff.derivative)(x));
    }
    Ok(sigma * richardson_derivative(|y| price(kernel, t, y, rule), x, X_STEP)?)
}

/// `nu = -sigma_X dLambda/dx`.
pub fn market_price_of_risk(
    kernel: &dyn StateKernel,
    t: f64,
    x: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let sigma = kernel.economy().params.sigma_x;
    Ok(-sigma * richardson_derivative(|y| log_kernel_lambda(kernel, t, y, rule), x, X_STEP)?)
}

/// `S(t, x, h; infinity)`.
pub fn price_limit_large_eta(
    economy: &Economy,
    t: f64,
    x: f64,
    h: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    price(&LimitKernel::large_eta(economy, h), t, x, rule)
}

/// `S(t, x, h; 0)` for a multiplier from [`solve_kappa_small_eta`].
pub fn price_limit_small_eta(
    economy: &Economy,
    t: f64,
    x: f64,
    h: f64,
    kappa0: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    price(&LimitKernel::small_eta_with(economy, h, kappa0), t, x, rule)
}

pub fn risk_neutral_price(
    economy: &Economy,
    t: f64,
    x: f64,
    h: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    price(&LimitKernel::risk_neutral(economy, h), t, x, rule)
}

/// Risk-neutral price for the exponential payoff: the tilted conditional law
/// is Gaussian `N(m', v')` and the price is `exp(m' + v'/2)`.
pub fn risk_neutral_price_closed_form(economy: &Economy, t: f64, x: f64, h: f64) -> Result<f64> {
    if !economy.params.payoff.is_exponential() {
        return Err(PceError::InvalidParameter(
            "closed-form risk-neutral price needs the exponential payoff".into(),
        ));
    }
    match economy.conditional_law(t, x)? {
        None => Ok(x.exp()),
        Some(law) => {
            let pu = economy.derived.p_u;
            let tilted = tilted_gaussian(&law, pu, pu * h)?;
            Ok((tilted.mean() + 0.5 * tilted.variance()).exp())
        }
    }
}

/// Equilibrium quantities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub t: f64,
    pub x: f64,
    pub h: f64,
    pub price: f64,
    /// Absolute diffusion coefficient `sigma`.
    pub volatility: f64,
    pub mpr: f64,
    /// Set when the price at the reference order differs by more than
    /// [`QUAD_FLAG_TOLERANCE`] relative.
    pub quad_flag: bool,
}

impl EquilibriumPoint {
    /// `sigma / S`.
    pub fn relative_volatility(&self) -> f64 {
        self.volatility / self.price
    }
}

/// Evaluates price, volatility and market price of risk, comparing the price
/// against `reference` when one is supplied.
pub fn evaluate_point(
    kernel: &dyn StateKernel,
    t: f64,
    x: f64,
    rule: &QuadratureRule,
    reference: Option<&QuadratureRule>,
) -> Result<EquilibriumPoint> {
    let s = price(kernel, t, x, rule)?;
    let quad_flag = match reference {
        Some(r) => {
            let s_ref = price(kernel, t, x, r)?;
            (s / s_ref - 1.0).abs() > QUAD_FLAG_TOLERANCE
        }
        None => false,
    };
    Ok(EquilibriumPoint {
        t,
        x,
        h: kernel.h(),
        price: s,
        volatility: volatility(kernel, t, x, rule)?,
        mpr: market_price_of_risk(kernel, t, x, rule)?,
        quad_flag,
    })
}

/// Terminal wealth of each agent for a signal realization `h` and private
/// signals `(g, g_N)`.
#[derive(Debug, Clone)]
pub struct WealthProfile {
    solution: ClearingSolution,
    pub g: f64,
    pub g_n: f64,
    /// `ln E[z l]` under the law of `X_T`, normalizing `Z^ = z l / E[z l]`.
    ln_norm: f64,
    c_i: f64,
    c_n: f64,
    /// Price at time zero.
    pub price0: f64,
    pub w0_u: f64,
}

impl WealthProfile {
    pub fn new(
        solution: &ClearingSolution,
        g: f64,
        g_n: f64,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let e = *solution.economy();
        let h = solution.h;
        let nodes = signal_measure_nodes(solution, rule)?;
        let ln_norm = nodes.ln_norm;
        let p_i = e.derived.p_i;
        let ln_zhat = |x: f64| -> f64 {
            solution
                .log_z(x)
                .map(|u| u + e.ln_tilt(x, h) - ln_norm)
                .unwrap_or(f64::NAN)
        };
        let c_i = nodes.expect(|x| ln_zhat(x) + 0.5 * p_i * x * x - g * p_i * x);
        let c_n = nodes.expect(|x| ln_zhat(x) + 0.5 * p_i * x * x - g_n * p_i * x);
        if !(c_i.is_finite() && c_n.is_finite()) {
            return Err(PceError::Degenerate(format!(
                "wealth constants undefined at h = {h}"
            )));
        }
        let price0 = price(solution, 0.0, e.params.x0, rule)?;
        Ok(Self {
            solution: solution.clone(),
            g,
            g_n,
            ln_norm,
            c_i,
            c_n,
            price0,
            w0_u: e.params.pi0_u * price0,
        })
    }

    /// Profile for the representative pair `g = h` with `g_N` recovered from `h`.
    pub fn consistent(solution: &ClearingSolution, rule: &QuadratureRule) -> Result<Self> {
        let h = solution.h;
        Self::new(
            solution,
            h,
            solution.economy().consistent_noise_signal(h, h),
            rule,
        )
    }

    pub fn solution(&self) -> &ClearingSolution {
        &self.solution
    }

    /// `ln Z^(x, h)`.
    pub fn ln_zhat(&self, x: f64) -> Result<f64> {
        let e = self.solution.economy();
        Ok(self.solution.log_z(x)? + e.ln_tilt(x, self.solution.h) - self.ln_norm)
    }

    pub fn w_i(&self, x: f64) -> Result<f64> {
        let p = &self.solution.economy().params;
        let p_i = self.solution.economy().derived.p_i;
        Ok(-(self.ln_zhat(x)? + 0.5 * p_i * x * x - self.g * p_i * x - self.c_i) / p.gamma_i)
    }

    pub fn w_n(&self, x: f64) -> Result<f64> {
        let p = &self.solution.economy().params;
        let p_i = self.solution.economy().derived.p_i;
        Ok(-(self.ln_zhat(x)? + 0.5 * p_i * x * x - self.g_n * p_i * x - self.c_n) / p.gamma_n)
    }

    pub fn w_u(&self, x: f64) -> Result<f64> {
        let u = self.solution.log_z(x)?;
        Ok(self.solution.utility().ln_inverse_marginal_exp(u).exp())
    }

    /// `omega_I w_I + omega_N w_N + omega_U (w_U - w0_U) - Pi (Psi - S_0)`.
    pub fn clearing_residual(&self, x: f64) -> Result<f64> {
        let e = self.solution.economy();
        let p = &e.params;
        Ok(p.omega_i * self.w_i(x)?
            + p.omega_n * self.w_n(x)?
            + p.omega_u * (self.w_u(x)? - self.w0_u)
            - p.supply * (e.payoff(x) - self.price0))
    }
}

/// Quadrature nodes of the law of `X_T` reweighted to `Q^h`.
pub fn signal_measure_nodes(
    solution: &ClearingSolution,
    rule: &QuadratureRule,
) -> Result<TiltedNodes> {
    let e = solution.economy();
    let law = e.derived.law_xt;
    let nodes = rule.log_nodes(&law, &StateKernel::breakpoints(solution, &law));
    let mut xs = Vec::with_capacity(nodes.len());
    let mut ln_mass = Vec::with_capacity(nodes.len());
    for (x, lw) in nodes {
        xs.push(x);
        ln_mass.push(lw + ln_weight(solution, x)?);
    }
    Ok(TiltedNodes::from_log_masses(xs, &ln_mass))
}

/// `(E^{Q^h}[S(t, X_t, h)], S(0, x0, h))` with the time-`t` marginal of `Q^h`
/// written as `P`-density times `exp(Lambda(t, X_t) - Lambda(0, x0))`.
pub fn tower_check(kernel: &dyn StateKernel, t: f64, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let e = kernel.economy();
    let x0 = e.params.x0;
    let s0 = price(kernel, 0.0, x0, rule)?;
    if t <= 0.0 {
        return Ok((s0, s0));
    }
    let lambda0 = log_kernel_lambda(kernel, 0.0, x0, rule)?;
    let law = e.marginal_law(t)?;
    let mut terms = Vec::with_capacity(rule.order());
    for (x, lw) in rule.abscissae(&law).zip(rule.ln_weights()) {
        let (_, pay) = ln_moments(kernel, t, x, rule)?;
        // S(t, x) exp(Lambda(t, x)) = E[Psi z l | X_t = x]
        terms.push(lw + pay - lambda0);
    }
    Ok((log_sum_exp(terms).exp(), s0))
}

/// `(drift, sigma nu)` at `(t, x)`: the physical drift of the price from
/// `dS/dt + m dS/dx + sigma^2 d2S/dx2 / 2` by finite differences, and the
/// product of volatility and market price of risk it should equal.
pub fn drift_check(
    kernel: &dyn StateKernel,
    t: f64,
    x: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    let e = kernel.economy();
    let p = &e.params;
    let sigma = p.sigma_x;
    let s = |tt: f64, y: f64| price(kernel, tt, y, rule);
    let dt = if t + T_STEP <= p.horizon && t - T_STEP >= 0.0 {
        (s(t + T_STEP, x)? - s(t - T_STEP, x)?) / (2.0 * T_STEP)
    } else {
        (-3.0 * s(t, x)? + 4.0 * s(t + T_STEP, x)? - s(t + 2.0 * T_STEP, x)?) / (2.0 * T_STEP)
    };
    let dx = richardson_derivative(|y| s(t, y), x, X_STEP)?;
    let d2 = 1e-3;
    let dxx = (s(t, x + d2)? - 2.0 * s(t, x)? + s(t, x - d2)?) / (d2 * d2);
    let drift = dt + p.factor_drift() * dx + 0.5 * sigma * sigma * dxx;
    let vol = sigma * dx;
    let nu = market_price_of_risk(kernel, t, x, rule)?;
    Ok((drift, vol * nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::solve_kappa_hat;
    use crate::economy::EconomyParams;
    use crate::preferences::{Crra, Utility};
    use std::sync::Arc;

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_hermite(100).unwrap()
    }

    fn solve(e: &Economy, eta: f64, h: f64, rule: &QuadratureRule) -> ClearingSolution {
        let u: Arc<dyn Utility> = Arc::new(Crra::new(eta).unwrap());
        solve_kappa_hat(e, u, h, rule).unwrap()
    }

    #[test]
    fn terminal_condition() {
        let e = Economy::baseline();
        let rule = rule();
        let sol = solve(&e, 5.0, 0.055, &rule);
        assert_eq!(price(&sol, 1.0, 0.3, &rule).unwrap(), 0.3f64.exp());
        assert!((0.3f64.exp() - 1.34986).abs() < 1e-5);
        assert_eq!(
            price_limit_large_eta(&e, 1.0, -0.4, 0.1, &rule).unwrap(),
            (-0.4f64).exp()
        );
        assert_eq!(
            risk_neutral_price(&e, 1.0, 0.2, 0.1, &rule).unwrap(),
            0.2f64.exp()
        );
        assert!((volatility(&sol, 1.0, 0.3, &rule).unwrap() - 0.3 * 0.3f64.exp()).abs() < 1e-15);
        let lam = log_kernel_lambda(&sol, 1.0, 0.3, &rule).unwrap();
        let direct = sol.log_z(0.3).unwrap() + e.ln_tilt(0.3, 0.055);
        assert!((lam - direct).abs() < 1e-15);
    }

    #[test]
    fn risk_neutral_closed_form() {
        let e = Economy::baseline();
        let rule = rule();
        let cf = risk_neutral_price_closed_form(&e, 0.0, 0.0, 0.055).unwrap();
        assert!((cf - 0.08f64.exp()).abs() < 1e-14);
        assert!((cf - 1.08329).abs() < 1e-5);
        for i in 0..21 {
            let h = -1.0 + 0.1 * i as f64;
            for (t, x) in [(0.0, 0.0), (0.5, 0.3), (0.9, -0.2)] {
                let q = risk_neutral_price(&e, t, x, h, &rule).unwrap();
                let c = risk_neutral_price_closed_form(&e, t, x, h).unwrap();
                assert!((q / c - 1.0).abs() <= 1e-10, "h={h} t={t}");
            }
        }
        // Lambda for z = 1 against the Gaussian normalizer
        let k = LimitKernel::risk_neutral(&e, 0.055);
        let lam = log_kernel_lambda(&k, 0.0, 0.0, &rule).unwrap();
        let (m, v, pu, h) = (0.055, 0.09, e.derived.p_u, 0.055);
        let tilted = tilted_gaussian(&e.derived.law_xt, pu, pu * h).unwrap();
        let exact = -0.5 * (1.0 + pu * v).ln() + 0.5 * tilted.mean().powi(2) / tilted.variance()
            - 0.5 * m * m / v;
        assert!((lam - exact).abs() < 1e-12);
    }

    #[test]
    fn risk_neutral_sensitivities() {
        let e = Economy::baseline();
        let rule = rule();
        let h = 0.055;
        let k = LimitKernel::risk_neutral(&e, h);
        // S(0, x) = exp(m'(x) + v'/2), m' linear in x with slope v'/v
        let law = e.conditional_law(0.0, 0.0).unwrap().unwrap();
        let tilted = tilted_gaussian(&law, e.derived.p_u, e.derived.p_u * h).unwrap();
        let slope = tilted.variance() / law.variance();
        let s = risk_neutral_price_closed_form(&e, 0.0, 0.0, h).unwrap();
        let vol = volatility(&k, 0.0, 0.0, &rule).unwrap();
        assert!((vol - 0.3 * slope * s).abs() < 1e-6);
        // without the tilt Lambda is constant in x
        let mut p = EconomyParams::baseline();
        p.c_i = 1e12;
        p.c_n = 1e12;
        let flat = Economy::new(p).unwrap();
        let k = LimitKernel::risk_neutral(&flat, h);
        assert!(market_price_of_risk(&k, 0.0, 0.0, &rule).unwrap().abs() < 1e-6);
    }

    #[test]
    fn baseline_point() {
        let e = Economy::baseline();
        let rule = rule();
        let h = e.h_quantile(0.5).unwrap();
        let sol = solve(&e, 5.0, h, &rule);
        let fine = QuadratureRule::gauss_hermite(200).unwrap();
        let pt = evaluate_point(&sol, 0.0, 0.0, &rule, Some(&fine)).unwrap();
        assert!(!pt.quad_flag);
        assert!(pt.volatility > 0.0);
        assert!((pt.price - 0.928_808_037_68).abs() < 1e-9, "{}", pt.price);
        assert!((pt.volatility - 0.126_036_94).abs() < 1e-7);
        assert!((pt.mpr - 0.497_378_65).abs() < 1e-7);
    }

    #[test]
    fn wealth_profile_identities() {
        let rule = rule();
        for params in [
            EconomyParams::baseline(),
            EconomyParams::independent_noise(),
        ] {
            let e = Economy::new(params).unwrap();
            for q in [0.1, 0.5, 0.9] {
                let h = e.h_quantile(q).unwrap();
                for eta in [0.5, 1.0, 5.0] {
                    let sol = solve(&e, eta, h, &rule);
                    let nodes = signal_measure_nodes(&sol, &rule).unwrap();
                    let delta = 0.37;
                    let pairs = [
                        WealthProfile::consistent(&sol, &rule).unwrap(),
                        WealthProfile::new(
                            &sol,
                            h + delta,
                            e.consistent_noise_signal(h, h + delta),
                            &rule,
                        )
                        .unwrap(),
                    ];
                    for wp in &pairs {
                        assert!(nodes.expect(|x| wp.w_i(x).unwrap()).abs() < 1e-9);
                        assert!(nodes.expect(|x| wp.w_n(x).unwrap()).abs() < 1e-9);
                        let wu = nodes.expect(|x| wp.w_u(x).unwrap());
                        assert!((wu / wp.w0_u - 1.0).abs() < 1e-8);
                        for &x in &nodes.xs {
                            let r = wp.clearing_residual(x).unwrap();
                            let scale = (e.params.supply * e.payoff(x)).max(1.0);
                            assert!(r.abs() <= 1e-7 * scale, "q={q} eta={eta} x={x} r={r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tower_property() {
        let e = Economy::baseline();
        let rule = rule();
        let h = e.h_quantile(0.1).unwrap();
        let sol = solve(&e, 5.0, h, &rule);
        for t in [0.25, 0.5, 0.75] {
            let (lhs, rhs) = tower_check(&sol, t, &rule).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 1e-6, "t={t} {lhs} {rhs}");
        }
    }

    #[test]
    fn drift_matches_volatility_times_mpr() {
        let e = Economy::baseline();
        let rule = rule();
        let h = e.h_quantile(0.5).unwrap();
        let sol = solve(&e, 5.0, h, &rule);
        let (drift, sv) = drift_check(&sol, 0.0, 0.0, &rule).unwrap();
        assert!((drift / sv - 1.0).abs() < 1e-3, "{drift} {sv}");
        let (drift, sv) = drift_check(&sol, 0.5, 0.2, &rule).unwrap();
        assert!((drift / sv - 1.0).abs() < 1e-3, "{drift} {sv}");
    }

    #[test]
    fn limit_sandwich() {
        let e = Economy::baseline();
        let rule = rule();
        for q in [0.1, 0.5, 0.9] {
            let h = e.h_quantile(q).unwrap();
            let big = price_limit_large_eta(&e, 0.0, 0.0, h, &rule).unwrap();
            let small = price(
                &LimitKernel::small_eta(&e, h, &rule).unwrap(),
                0.0,
                0.0,
                &rule,
            )
            .unwrap();
            for eta in [0.25, 1.0, 5.0] {
                let s = price(&solve(&e, eta, h, &rule), 0.0, 0.0, &rule).unwrap();
                assert!(s >= big.min(small) - 0.1);
            }
        }
    }
}
