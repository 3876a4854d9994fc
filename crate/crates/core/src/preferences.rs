//! Utility of the uninformed agent.
//!
//! The solvers only ever need the marginal utility, its inverse `I` and the
//! absolute risk aversion `gamma_U(w) = -U''(w) / U'(w)`, so a utility is the
//! triple of those maps. The asymptotic-elasticity condition cannot be
//! checked numerically and is the caller's obligation.

use std::fmt;
use std::sync::Arc;

use crate::error::{PceError, Result};

pub trait Utility: Send + Sync + fmt::Debug {
    /// `U(w)` if known.
    fn value(&self, _w: f64) -> Option<f64> {
        None
    }

    fn marginal(&self, w: f64) -> f64;

    /// `I = (U')^{-1}`.
    fn inverse_marginal(&self, y: f64) -> f64;

    /// `ln I(e^u)`. Override when it can be evaluated without overflow.
    fn ln_inverse_marginal_exp(&self, u: f64) -> f64 {
        self.inverse_marginal(u.exp()).ln()
    }

    /// Absolute risk aversion `gamma_U(w)`.
    fn risk_aversion(&self, w: f64) -> f64;

    /// Whether `w -> w U'(w)` is non-decreasing, which makes the budget
    /// multiplier unique.
    fn has_unique_kappa(&self) -> bool;

    /// Relative risk aversion when the utility is CRRA.
    fn as_crra(&self) -> Option<f64> {
        None
    }
}

/// `U(w) = w^{1-eta} / (1 - eta)`, or `ln w` when `eta = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crra {
    eta: f64,
}

impl Crra {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(PceError::InvalidParameter(format!(
                "relative risk aversion {eta} must be positive and finite"
            )));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Utility for Crra {
    fn value(&self, w: f64) -> Option<f64> {
        Some(if self.eta == 1.0 {
            w.ln()
        } else {
            w.powf(1.0 - self.eta) / (1.0 - self.eta)
        })
    }

    fn marginal(&self, w: f64) -> f64 {
        w.powf(-self.eta)
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        y.powf(-1.0 / self.eta)
    }

    fn ln_inverse_marginal_exp(&self, u: f64) -> f64 {
        -u / self.eta
    }

    fn risk_aversion(&self, w: f64) -> f64 {
        self.eta / w
    }

    fn has_unique_kappa(&self) -> bool {
        self.eta <= 1.0
    }

    fn as_crra(&self) -> Option<f64> {
        Some(self.eta)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Utility assembled from user-supplied closures.
#[derive(Clone)]
pub struct GeneralUtility {
    name: String,
    marginal: ScalarFn,
    inverse_marginal: ScalarFn,
    risk_aversion: ScalarFn,
    unique_kappa: bool,
}

impl GeneralUtility {
    pub fn new(
        name: impl Into<String>,
        marginal: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse_marginal: impl Fn(f64) -> f64 + Send + Sync + 'static,
        risk_aversion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        unique_kappa: bool,
    ) -> Self {
        Self {
            name: name.into(),
            marginal: Arc::new(marginal),
            inverse_marginal: Arc::new(inverse_marginal),
            risk_aversion: Arc::new(risk_aversion),
            unique_kappa,
        }
    }
}

impl GeneralUtility {
    /// Power utility through the closure interface, so that it is solved by
    /// the generic root finder instead of the Lambert closed form.
    pub fn power(eta: f64) -> Result<Self> {
        Crra::new(eta)?;
        Ok(Self::new(
            format!("power({eta})"),
            move |w: f64| w.powf(-eta),
            move |y: f64| y.powf(-1.0 / eta),
            move |w: f64| eta / w,
            eta <= 1.0,
        ))
    }
}

impl fmt::Debug for GeneralUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralUtility")
            .field("name", &self.name)
            .finish()
    }
}

impl Utility for GeneralUtility {
    fn marginal(&self, w: f64) -> f64 {
        (self.marginal)(w)
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        (self.inverse_marginal)(y)
    }

    fn risk_aversion(&self, w: f64) -> f64 {
        (self.risk_aversion)(w)
    }

    fn has_unique_kappa(&self) -> bool {
        self.unique_kappa
    }
}

/// `alpha_U(w) = omega_U / gamma_U(w)`.
pub fn weighted_risk_tolerance(utility: &dyn Utility, omega_u: f64, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(PceError::Domain {
            function: "weighted_risk_tolerance",
            value: w,
        });
    }
    Ok(omega_u / utility.risk_aversion(w))
}
