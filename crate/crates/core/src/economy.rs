//! Exogenous parameters, derived constants and the scalar functions of the
//! clearing analysis.
//!
//! The factor is one-dimensional with `X_T | X_t = x` Gaussian: the
//! log-price of a geometric Brownian motion, started at `x0`. The payoff is
//! injected through [`Payoff`]; the default is `exp`.

use std::fmt;

use crate::error::{PceError, Result};
use crate::special_math::{GaussianLaw, PIECEWISE_HALF_WIDTH};

/// Terminal payoff `Psi` with its logarithm and derivative.
///
/// `Psi` must be strictly positive so that `ln Psi` exists.
#[derive(Clone, Copy)]
pub struct Payoff {
    pub name: &'static str,
    pub value: fn(f64) -> f64,
    pub ln_value: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

impl Payoff {
    pub fn exponential() -> Self {
        Self {
            name: "exp",
            value: f64::exp,
            ln_value: |x| x,
            derivative: f64::exp,
        }
    }

    pub fn is_exponential(&self) -> bool {
        self.name == "exp"
    }
}

impl Default for Payoff {
    fn default() -> Self {
        Self::exponential()
    }
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payoff({})", self.name)
    }
}

/// All exogenous scalars of the economy.
#[derive(Debug, Clone, Copy)]
pub struct EconomyParams {
    /// Drift of the geometric factor, per year.
    pub mu_x: f64,
    /// Volatility of the factor, per square-root year.
    pub sigma_x: f64,
    /// Horizon `T` in years.
    pub horizon: f64,
    /// Aggregate supply `Pi`.
    pub supply: f64,
    pub omega_i: f64,
    pub omega_n: f64,
    pub omega_u: f64,
    /// CARA risk aversion of the insider.
    pub gamma_i: f64,
    /// CARA risk aversion of the noise trader.
    pub gamma_n: f64,
    /// Relative risk aversion of the CRRA uninformed agent.
    pub eta_u: f64,
    /// Variance of the insider's signal noise.
    pub c_i: f64,
    /// Variance of the noise trader's extra noise.
    pub c_n: f64,
    pub tau_n: f64,
    pub mu_n: f64,
    /// Uninformed agent's initial share endowment.
    pub pi0_u: f64,
    /// Initial factor value.
    pub x0: f64,
    pub payoff: Payoff,
}

impl EconomyParams {
    /// The geometric-Brownian example: `mu = 0.1`, `sigma = 0.3`, `Pi = 1`,
    /// `T = 1`, equal weights, `gamma = 3`, `eta_U = 5`, `C_I = C_N = sigma^2`,
    /// `tau_N = 1`, `mu_N = 0`, with every agent endowed with one share.
    pub fn baseline() -> Self {
        let third = 1.0 / 3.0;
        Self {
            mu_x: 0.1,
            sigma_x: 0.3,
            horizon: 1.0,
            supply: 1.0,
            omega_i: third,
            omega_n: third,
            omega_u: third,
            gamma_i: 3.0,
            gamma_n: 3.0,
            eta_u: 5.0,
            c_i: 0.09,
            c_n: 0.09,
            tau_n: 1.0,
            mu_n: 0.0,
            pi0_u: 1.0,
            x0: 0.0,
            payoff: Payoff::exponential(),
        }
    }

    /// Baseline with the noise trader receiving an independent signal with the
    /// first two moments of `G_I`: `tau_N = 0`, `mu_N = E[X_T]`,
    /// `C_N = Var[X_T] + C_I`.
    pub fn independent_noise() -> Self {
        let mut p = Self::baseline();
        let drift = p.mu_x - 0.5 * p.sigma_x * p.sigma_x;
        p.tau_n = 0.0;
        p.mu_n = p.x0 + drift * p.horizon;
        p.c_n = p.sigma_x * p.sigma_x * p.horizon + p.c_i;
        p
    }

    /// Drift of `X`: `mu_X - sigma_X^2 / 2`.
    pub fn factor_drift(&self) -> f64 {
        self.mu_x - 0.5 * self.sigma_x * self.sigma_x
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu_X", self.mu_x),
            ("sigma_X", self.sigma_x),
            ("T", self.horizon),
            ("Pi", self.supply),
            ("omega_I", self.omega_i),
            ("omega_N", self.omega_n),
            ("omega_U", self.omega_u),
            ("gamma_I", self.gamma_i),
            ("gamma_N", self.gamma_n),
            ("eta_U", self.eta_u),
            ("C_I", self.c_i),
            ("C_N", self.c_n),
            ("tau_N", self.tau_n),
            ("mu_N", self.mu_n),
            ("pi0_U", self.pi0_u),
            ("x0", self.x0),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(PceError::InvalidParameter(format!(
                "{name} = {v} is not finite"
            )));
        }
        let positive = [
            ("sigma_X", self.sigma_x),
            ("T", self.horizon),
            ("Pi", self.supply),
            ("gamma_I", self.gamma_i),
            ("gamma_N", self.gamma_n),
            ("eta_U", self.eta_u),
            ("C_I", self.c_i),
            ("C_N", self.c_n),
            ("pi0_U", self.pi0_u),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(PceError::InvalidParameter(format!(
                "{name} = {v} must be positive"
            )));
        }
        for (name, w) in [
            ("omega_I", self.omega_i),
            ("omega_N", self.omega_n),
            ("omega_U", self.omega_u),
        ] {
            if !(w > 0.0 && w < 1.0) {
                return Err(PceError::InvalidParameter(format!(
                    "{name} = {w} must lie in (0, 1)"
                )));
            }
        }
        let total = self.omega_i + self.omega_n + self.omega_u;
        if (total - 1.0).abs() > 1e-12 {
            return Err(PceError::InvalidParameter(format!(
                "agent weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Constants derived once from [`EconomyParams`].
#[derive(Debug, Clone, Copy)]
pub struct DerivedConstants {
    pub alpha_i: f64,
    pub alpha_n: f64,
    /// Variance of the market signal's noise.
    pub c_u: f64,
    pub p_i: f64,
    pub p_n: f64,
    pub p_u: f64,
    /// Law of `X_T` given `X_0 = x0`.
    pub law_xt: GaussianLaw,
    /// Law of the market signal `H`.
    pub law_h: GaussianLaw,
}

impl DerivedConstants {
    /// `alpha_I + alpha_N`.
    pub fn alpha_sum(&self) -> f64 {
        self.alpha_i + self.alpha_n
    }
}

pub fn derive_constants(p: &EconomyParams) -> Result<DerivedConstants> {
    p.validate()?;
    let alpha_i = p.omega_i / p.gamma_i;
    let alpha_n = p.omega_n / p.gamma_n;
    let denom = alpha_i + alpha_n * p.tau_n;
    if denom == 0.0 {
        return Err(PceError::Degenerate(
            "alpha_I + alpha_N tau_N = 0: the market signal is undefined".into(),
        ));
    }
    let loading = alpha_n / denom;
    let c_u = p.c_i + loading * loading * p.c_n;
    let var_xt = p.sigma_x * p.sigma_x * p.horizon;
    let law_xt = GaussianLaw::new(p.x0 + p.factor_drift() * p.horizon, var_xt)?;
    let law_h = GaussianLaw::new(law_xt.mean(), var_xt + c_u)?;
    Ok(DerivedConstants {
        alpha_i,
        alpha_n,
        c_u,
        p_i: 1.0 / p.c_i,
        p_n: 1.0 / p.c_n,
        p_u: 1.0 / c_u,
        law_xt,
        law_h,
    })
}

/// Parameters together with their derived constants.
#[derive(Debug, Clone, Copy)]
pub struct Economy {
    pub params: EconomyParams,
    pub derived: DerivedConstants,
}

impl Economy {
    pub fn new(params: EconomyParams) -> Result<Self> {
        let derived = derive_constants(&params)?;
        Ok(Self { params, derived })
    }

    pub fn baseline() -> Self {
        Self::new(EconomyParams::baseline()).expect("baseline parameters are valid")
    }

    pub fn alpha_sum(&self) -> f64 {
        self.derived.alpha_sum()
    }

    pub fn payoff(&self, x: f64) -> f64 {
        (self.params.payoff.value)(x)
    }

    pub fn ln_payoff(&self, x: f64) -> f64 {
        (self.params.payoff.ln_value)(x)
    }

    /// Right-hand side function of the pointwise clearing equation.
    pub fn vartheta(&self, x: f64, h: f64) -> f64 {
        let p = &self.params;
        let d = &self.derived;
        let a = d.alpha_sum();
        p.supply * self.payoff(x) - d.alpha_n * x * d.p_i * p.mu_n
            + 0.5 * a * (d.p_i - d.p_u) * x * x
            - x * ((d.alpha_i + d.alpha_n * p.tau_n) * d.p_i - a * d.p_u) * h
    }

    /// Centre `V(h)` of the quadratic part of `phi`.
    pub fn v_of(&self, h: f64) -> Result<f64> {
        let p = &self.params;
        let d = &self.derived;
        let gap = d.p_i - d.p_u;
        if !(gap > 0.0) {
            return Err(PceError::Degenerate(format!(
                "P_I - P_U = {gap} must be positive"
            )));
        }
        let a = d.alpha_sum();
        Ok((((d.alpha_i + d.alpha_n * p.tau_n) / a * d.p_i - d.p_u) * h
            + d.alpha_n / a * d.p_i * p.mu_n)
            / gap)
    }

    /// `(phi(x, h), V(h))`; `phi >= 0` whenever the payoff term is positive.
    pub fn phi_v(&self, x: f64, h: f64) -> Result<(f64, f64)> {
        let v = self.v_of(h)?;
        let d = &self.derived;
        let phi = self.params.supply * self.payoff(x) / d.alpha_sum()
            + 0.5 * (x - v) * (x - v) * (d.p_i - d.p_u);
        Ok((phi, v))
    }

    /// Points in `law`'s effective support where `vartheta(x, h) + kappa`
    /// changes sign. The clearing kernel bends sharply there when the
    /// uninformed agent's risk aversion is small.
    pub fn clearing_kinks(&self, h: f64, kappa: f64, law: &GaussianLaw) -> Vec<f64> {
        const SCAN: usize = 512;
        let half = PIECEWISE_HALF_WIDTH * law.std_dev();
        let (lo, hi) = (law.mean() - half, law.mean() + half);
        let f = |x: f64| self.vartheta(x, h) + kappa;
        let grid: Vec<f64> = (0..=SCAN)
            .map(|i| lo + (hi - lo) * i as f64 / SCAN as f64)
            .collect();
        let mut roots = Vec::new();
        for pair in grid.windows(2) {
            let (mut a, mut b) = (pair[0], pair[1]);
            let (fa, fb) = (f(a), f(b));
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fa * fb >= 0.0 {
                continue;
            }
            let up = fb > fa;
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if (f(mid) > 0.0) == up {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        roots
    }

    /// Lower bound of `vartheta(., h)`: `-(alpha_I + alpha_N) (P_I - P_U) V(h)^2 / 2`.
    pub fn vartheta_floor(&self, h: f64) -> Result<f64> {
        let v = self.v_of(h)?;
        let d = &self.derived;
        Ok(-0.5 * d.alpha_sum() * v * v * (d.p_i - d.p_u))
    }

    /// Exponent of the signal likelihood tilt: `-P_U x^2 / 2 + P_U h x`.
    pub fn ln_tilt(&self, x: f64, h: f64) -> f64 {
        let pu = self.derived.p_u;
        -0.5 * pu * x * x + pu * h * x
    }

    /// Conditional density of the market signal at `h` given `X_T = x`,
    /// written as `p_{C_U}(h) exp(-P_U x^2/2 + P_U h x)`.
    pub fn ell_t(&self, x: f64, h: f64) -> f64 {
        self.ln_ell_t(x, h).exp()
    }

    pub fn ln_ell_t(&self, x: f64, h: f64) -> f64 {
        let c_u = self.derived.c_u;
        -0.5 * h * h / c_u - 0.5 * (2.0 * std::f64::consts::PI * c_u).ln() + self.ln_tilt(x, h)
    }

    /// Law of `X_T` given `X_t = x`, or `None` at `t = T` where it is a point mass.
    pub fn conditional_law(&self, t: f64, x: f64) -> Result<Option<GaussianLaw>> {
        let p = &self.params;
        if !(0.0..=p.horizon).contains(&t) {
            return Err(PceError::InvalidParameter(format!(
                "time {t} outside [0, {}]",
                p.horizon
            )));
        }
        let tau = p.horizon - t;
        if tau <= 0.0 {
            return Ok(None);
        }
        GaussianLaw::new(x + p.factor_drift() * tau, p.sigma_x * p.sigma_x * tau).map(Some)
    }

    /// Law of `X_t` given `X_0 = x0` under the physical measure.
    pub fn marginal_law(&self, t: f64) -> Result<GaussianLaw> {
        let p = &self.params;
        GaussianLaw::new(p.x0 + p.factor_drift() * t, p.sigma_x * p.sigma_x * t)
    }

    /// Signal realization at quantile `q` of the market-signal law.
    pub fn h_quantile(&self, q: f64) -> Result<f64> {
        self.derived.law_h.quantile(q)
    }

    /// Noise-trader signal `g_N` consistent with `(h, g)` through the
    /// definition of the market signal.
    pub fn consistent_noise_signal(&self, h: f64, g: f64) -> f64 {
        let p = &self.params;
        let d = &self.derived;
        ((d.alpha_i + d.alpha_n * p.tau_n) * h + d.alpha_n * p.mu_n - d.alpha_i * g) / d.alpha_n
    }
}
