//! Pointwise market clearing and the uninformed agent's budget multiplier.
//!
//! For a signal `h` and multiplier `kappa` the state-price kernel `z(x)`
//! solves `omega_U I(z) - alpha log z = vartheta(x, h) + kappa` with
//! `alpha = alpha_I + alpha_N`. Everything is carried as `u = log z`.

use std::sync::Arc;

use crate::economy::Economy;
use crate::error::{PceError, Result};
use crate::preferences::{weighted_risk_tolerance, Utility};
use crate::special_math::{lambert_w0_exp, log_sum_exp, QuadratureRule};

/// Largest `|kappa|` searched before declaring the budget unattainable.
pub const KAPPA_LIMIT: f64 = 1e6;
/// Bisection cap for the outer multiplier search.
pub const KAPPA_MAX_ITERATIONS: usize = 80;
/// Required accuracy of the budget identity `g(kappa) = 1`.
pub const BUDGET_TOLERANCE: f64 = 1e-8;
/// Points in the scan used when the multiplier may not be unique.
pub const KAPPA_SCAN_POINTS: usize = 256;

const Z_MAX_DOUBLINGS: usize = 200;
const Z_MAX_ITERATIONS: usize = 400;
const Z_TOLERANCE: f64 = 1e-10;

/// `omega_U I(e^u) - alpha u - rhs`; strictly decreasing in `u`.
fn clearing_gap(economy: &Economy, utility: &dyn Utility, u: f64, rhs: f64) -> f64 {
    economy.params.omega_u * utility.ln_inverse_marginal_exp(u).exp()
        - economy.alpha_sum() * u
        - rhs
}

/// Residual of the clearing equation at `z`.
pub fn clearing_residual(
    economy: &Economy,
    utility: &dyn Utility,
    x: f64,
    h: f64,
    kappa: f64,
    z: f64,
) -> f64 {
    clearing_gap(economy, utility, z.ln(), economy.vartheta(x, h) + kappa)
}

/// `log z` for CRRA utility with right-hand side `rhs`, through
/// `log z = eta (ln A - ln W(A e^B))`, `A = omega_U / (alpha eta)`,
/// `B = rhs / (alpha eta)`.
pub fn log_z_crra(economy: &Economy, eta: f64, rhs: f64) -> f64 {
    let a = economy.alpha_sum();
    let ln_a = (economy.params.omega_u / (a * eta)).ln();
    let s = ln_a + rhs / (a * eta);
    let w = lambert_w0_exp(s);
    // ln W = s - W is exact where W is tiny; ln W itself avoids cancellation for large s
    let ln_w = if s < 0.0 { s - w } else { w.ln() };
    eta * (ln_a - ln_w)
}

pub fn solve_z_crra(economy: &Economy, eta: f64, x: f64, h: f64, kappa: f64) -> f64 {
    log_z_crra(economy, eta, economy.vartheta(x, h) + kappa).exp()
}

/// Widens `[lo, hi]` by doubling until the clearing gap changes sign.
fn expand_bracket(
    economy: &Economy,
    utility: &dyn Utility,
    rhs: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, f64)> {
    let mut step = 1.0_f64.max(hi - lo);
    for _ in 0..Z_MAX_DOUBLINGS {
        let f_lo = clearing_gap(economy, utility, lo, rhs);
        let f_hi = clearing_gap(economy, utility, hi, rhs);
        if f_lo.is_nan() || f_hi.is_nan() {
            break;
        }
        if f_lo >= 0.0 && f_hi <= 0.0 {
            return Ok((lo, hi));
        }
        if f_lo < 0.0 {
            lo -= step;
        }
        if f_hi > 0.0 {
            hi += step;
        }
        step *= 2.0;
    }
    Err(PceError::BracketFailure {
        what: "clearing equation",
        doublings: Z_MAX_DOUBLINGS,
    })
}

/// Newton steps in `u = log z` with a bisection fallback whenever a step
/// leaves the bracket or fails to halve the previous one.
/// `F'(u) = -(alpha_U(I(z)) + alpha)`.
fn solve_log_z_bracketed(
    economy: &Economy,
    utility: &dyn Utility,
    rhs: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = expand_bracket(economy, utility, rhs, lo, hi)?;
    let tol = Z_TOLERANCE * rhs.abs().max(1.0);
    let a = economy.alpha_sum();
    let mut u = 0.5 * (lo + hi);
    let mut last_step = hi - lo;
    for _ in 0..Z_MAX_ITERATIONS {
        let f = clearing_gap(economy, utility, u, rhs);
        if f.abs() <= 0.01 * tol {
            return Ok(u);
        }
        if f > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let w = utility.ln_inverse_marginal_exp(u).exp();
        let slope =
            -(weighted_risk_tolerance(utility, economy.params.omega_u, w).unwrap_or(0.0) + a);
        let newton = u - f / slope;
        let next = if newton > lo && newton < hi && (newton - u).abs() <= 0.5 * last_step {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_step = (next - u).abs();
        u = next;
        if hi - lo <= f64::EPSILON * u.abs().max(1.0) {
            break;
        }
    }
    let f = clearing_gap(economy, utility, u, rhs);
    if f.abs() <= tol {
        Ok(u)
    } else {
        Err(PceError::Degenerate(format!(
            "clearing equation residual {f:e} above {tol:e} at log z = {u}"
        )))
    }
}

/// `log z` solving `omega_U I(z) - alpha log z = rhs` without a prior bracket.
pub fn solve_log_z_rhs(economy: &Economy, utility: &dyn Utility, rhs: f64) -> Result<f64> {
    if let Some(eta) = utility.as_crra() {
        return Ok(log_z_crra(economy, eta, rhs));
    }
    solve_log_z_bracketed(economy, utility, rhs, -1.0, 1.0)
}

/// `z~(h, kappa)`: solution of the clearing equation with the `x`-free
/// right-hand side `-alpha (P_I - P_U) V(h)^2 / 2 + kappa`.
pub fn solve_log_z_tilde(
    economy: &Economy,
    utility: &dyn Utility,
    h: f64,
    kappa: f64,
) -> Result<f64> {
    solve_log_z_rhs(economy, utility, economy.vartheta_floor(h)? + kappa)
}

pub fn solve_z_tilde(economy: &Economy, utility: &dyn Utility, h: f64, kappa: f64) -> Result<f64> {
    solve_log_z_tilde(economy, utility, h, kappa).map(f64::exp)
}

/// Generic solver, bracketed by `z~ e^{-phi} <= z <= z~`.
pub fn solve_log_z_generic(
    economy: &Economy,
    utility: &dyn Utility,
    x: f64,
    h: f64,
    kappa: f64,
) -> Result<f64> {
    let ln_zt = solve_log_z_bracketed(
        economy,
        utility,
        economy.vartheta_floor(h)? + kappa,
        -1.0,
        1.0,
    )?;
    let (phi, _) = economy.phi_v(x, h)?;
    solve_log_z_bracketed(
        economy,
        utility,
        economy.vartheta(x, h) + kappa,
        ln_zt - phi - 1.0,
        ln_zt + 1.0,
    )
}

/// `log z(x, h, kappa)`; closed form for CRRA.
pub fn solve_log_z(
    economy: &Economy,
    utility: &dyn Utility,
    x: f64,
    h: f64,
    kappa: f64,
) -> Result<f64> {
    match utility.as_crra() {
        Some(eta) => Ok(log_z_crra(economy, eta, economy.vartheta(x, h) + kappa)),
        None => solve_log_z_generic(economy, utility, x, h, kappa),
    }
}

pub fn solve_z(
    economy: &Economy,
    utility: &dyn Utility,
    x: f64,
    h: f64,
    kappa: f64,
) -> Result<f64> {
    solve_log_z(economy, utility, x, h, kappa).map(f64::exp)
}

/// `ln g(kappa)` with
/// `g = E[pi0 Psi l z] / E[I(z) l z]` over the law of `X_T`.
/// The factor `p_{C_U}(h)` of the likelihood cancels.
pub fn ln_budget_g(
    economy: &Economy,
    utility: &dyn Utility,
    h: f64,
    kappa: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let law = economy.derived.law_xt;
    let ln_pi0 = economy.params.pi0_u.ln();
    let mut num = Vec::with_capacity(rule.order());
    let mut den = Vec::with_capacity(rule.order());
    for (x, lw) in rule.log_nodes(&law, &economy.clearing_kinks(h, kappa, &law)) {
        let u = solve_log_z(economy, utility, x, h, kappa)?;
        let base = lw + economy.ln_tilt(x, h) + u;
        num.push(base + ln_pi0 + economy.ln_payoff(x));
        den.push(base + utility.ln_inverse_marginal_exp(u));
    }
    let ln_den = log_sum_exp(den);
    if ln_den == f64::NEG_INFINITY {
        return Err(PceError::Degenerate(format!(
            "budget denominator vanishes at kappa = {kappa}"
        )));
    }
    let v = log_sum_exp(num) - ln_den;
    if v.is_nan() {
        return Err(PceError::Overflow(format!(
            "budget function undefined at kappa = {kappa}"
        )));
    }
    Ok(v)
}

pub fn budget_g(
    economy: &Economy,
    utility: &dyn Utility,
    h: f64,
    kappa: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    ln_budget_g(economy, utility, h, kappa, rule).map(f64::exp)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    /// Budget-function evaluations in the outer search.
    pub g_evaluations: usize,
    pub bisection_iterations: usize,
    pub bracket: (f64, f64),
    /// Sign changes of `g - 1` seen by the scan; zero when no scan ran.
    pub sign_changes: usize,
    /// More than one root was detected.
    pub multiple_roots: bool,
}

/// Equilibrium kernel for one signal realization.
#[derive(Debug, Clone)]
pub struct ClearingSolution {
    economy: Economy,
    utility: Arc<dyn Utility>,
    pub h: f64,
    pub kappa_hat: f64,
    /// `ln z~(h, kappa_hat)`.
    pub ln_z_tilde: f64,
    /// `g(kappa_hat) - 1`.
    pub budget_residual: f64,
    pub stats: SolverStats,
}

impl ClearingSolution {
    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn utility(&self) -> &dyn Utility {
        self.utility.as_ref()
    }

    pub fn log_z(&self, x: f64) -> Result<f64> {
        solve_log_z(
            &self.economy,
            self.utility.as_ref(),
            x,
            self.h,
            self.kappa_hat,
        )
    }

    pub fn z(&self, x: f64) -> Result<f64> {
        self.log_z(x).map(f64::exp)
    }

    /// Checks `z~ e^{-phi} <= z <= z~` and
    /// `I(z) <= I(z~) + alpha phi / omega_U` at `x`.
    pub fn check_bounds(&self, x: f64) -> Result<bool> {
        let e = &self.economy;
        let u = self.log_z(x)?;
        let ln_zt = self.ln_z_tilde;
        let (phi, _) = e.phi_v(x, self.h)?;
        let slack = 1e-9 * (1.0 + ln_zt.abs() + phi);
        let first = u <= ln_zt + slack && u >= ln_zt - phi - slack;
        let i_z = self.utility.ln_inverse_marginal_exp(u).exp();
        let i_zt = self.utility.ln_inverse_marginal_exp(ln_zt).exp();
        let rhs = i_zt + e.alpha_sum() / e.params.omega_u * phi;
        let second = i_z <= rhs + 1e-9 * rhs.abs().max(1.0);
        Ok(first && second)
    }
}

/// Bisection for a root of a decreasing function given `f(lo) > 0 > f(hi)`.
fn bisect_decreasing<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    stats: &mut SolverStats,
) -> Result<f64> {
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..KAPPA_MAX_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        stats.bisection_iterations += 1;
        stats.g_evaluations += 1;
        if v == 0.0 || hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Doubles `[-r, r]`-style probes outward from zero until `f` is positive at
/// the left end and negative at the right end.
fn outward_bracket<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    h: f64,
    two_sided: bool,
    stats: &mut SolverStats,
) -> Result<(f64, f64)> {
    let at_zero = f(0.0)?;
    stats.g_evaluations += 1;
    if !two_sided {
        if at_zero == 0.0 {
            return Ok((0.0, 0.0));
        }
        let dir = if at_zero > 0.0 { 1.0 } else { -1.0 };
        let mut near = 0.0;
        let mut r = 1.0;
        while r <= KAPPA_LIMIT {
            let v = f(dir * r)?;
            stats.g_evaluations += 1;
            if v * at_zero <= 0.0 {
                let (a, b) = (near, dir * r);
                return Ok(if dir > 0.0 { (a, b) } else { (b, a) });
            }
            near = dir * r;
            r *= 2.0;
        }
    } else {
        let mut r = 1.0;
        while r <= KAPPA_LIMIT {
            let (left, right) = (f(-r)?, f(r)?);
            stats.g_evaluations += 2;
            if left > 0.0 && right < 0.0 {
                return Ok((-r, r));
            }
            r *= 2.0;
        }
    }
    Err(PceError::EconomyInfeasible {
        h,
        limit: KAPPA_LIMIT,
    })
}

/// Solves `g(kappa) = 1` for the signal `h`.
///
/// When `w U'(w)` is non-decreasing the root is unique and is bracketed by
/// doubling outward from zero. Otherwise `[-R, R]` is scanned on
/// [`KAPPA_SCAN_POINTS`] points, the sign change nearest zero is refined, and
/// `stats.multiple_roots` reports whether others were seen.
pub fn solve_kappa_hat(
    economy: &Economy,
    utility: Arc<dyn Utility>,
    h: f64,
    rule: &QuadratureRule,
) -> Result<ClearingSolution> {
    let u = utility.as_ref();
    let mut f = |k: f64| ln_budget_g(economy, u, h, k, rule);
    let mut stats = SolverStats::default();
    let unique = u.has_unique_kappa();
    let (mut lo, mut hi) = outward_bracket(&mut f, h, !unique, &mut stats)?;
    if !unique {
        let n = KAPPA_SCAN_POINTS;
        let grid: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let values = grid.iter().map(|&k| f(k)).collect::<Result<Vec<_>>>()?;
        stats.g_evaluations += n;
        let changes: Vec<usize> = (0..n - 1)
            .filter(|&i| (values[i] > 0.0) != (values[i + 1] > 0.0))
            .collect();
        stats.sign_changes = changes.len();
        stats.multiple_roots = changes.len() > 1;
        let nearest = changes
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = grid[a].abs().min(grid[a + 1].abs());
                let db = grid[b].abs().min(grid[b + 1].abs());
                da.total_cmp(&db)
            })
            .ok_or(PceError::EconomyInfeasible {
                h,
                limit: KAPPA_LIMIT,
            })?;
        if values[nearest] > 0.0 {
            (lo, hi) = (grid[nearest], grid[nearest + 1]);
        } else {
            // an upward crossing; flip so the bisection sees a decreasing function
            let (a, b) = (grid[nearest], grid[nearest + 1]);
            let mut g = |k: f64| f(a + b - k);
            stats.bracket = (a, b);
            let k = a + b - bisect_decreasing(&mut g, a, b, &mut stats)?;
            return finish(economy, utility, h, k, rule, stats);
        }
    }
    stats.bracket = (lo, hi);
    let k = if lo == hi {
        lo
    } else {
        bisect_decreasing(&mut f, lo, hi, &mut stats)?
    };
    finish(economy, utility, h, k, rule, stats)
}

fn finish(
    economy: &Economy,
    utility: Arc<dyn Utility>,
    h: f64,
    kappa: f64,
    rule: &QuadratureRule,
    stats: SolverStats,
) -> Result<ClearingSolution> {
    let u = utility.as_ref();
    let residual = budget_g(economy, u, h, kappa, rule)? - 1.0;
    if residual.abs() > BUDGET_TOLERANCE {
        return Err(PceError::Degenerate(format!(
            "budget residual {residual:e} at kappa = {kappa} exceeds {BUDGET_TOLERANCE:e}"
        )));
    }
    let ln_z_tilde = solve_log_z_tilde(economy, u, h, kappa)?;
    let solution = ClearingSolution {
        economy: *economy,
        utility,
        h,
        kappa_hat: kappa,
        ln_z_tilde,
        budget_residual: residual,
        stats,
    };
    let law = economy.derived.law_xt;
    for i in 0..=40 {
        let x = law.mean() + law.std_dev() * (-6.0 + 0.3 * i as f64);
        if !solution.check_bounds(x)? {
            return Err(PceError::Degenerate(format!(
                "kernel bounds violated at x = {x} for h = {h}"
            )));
        }
    }
    Ok(solution)
}

/// `ln` of the right-hand side of the small-risk-aversion multiplier equation
/// `E[pi0 Psi e^{(vartheta + kappa)^- / alpha} l] / E[(vartheta + kappa)^+ l]`.
pub fn ln_small_eta_ratio(economy: &Economy, h: f64, kappa: f64, rule: &QuadratureRule) -> f64 {
    let law = economy.derived.law_xt;
    let a = economy.alpha_sum();
    let ln_pi0 = economy.params.pi0_u.ln();
    let mut num = Vec::with_capacity(rule.order());
    let mut den = Vec::with_capacity(rule.order());
    for (x, lw) in rule.log_nodes(&law, &economy.clearing_kinks(h, kappa, &law)) {
        let r = economy.vartheta(x, h) + kappa;
        let tilt = lw + economy.ln_tilt(x, h);
        num.push(tilt + ln_pi0 + economy.ln_payoff(x) + (-r).max(0.0) / a);
        if r > 0.0 {
            den.push(tilt + r.ln());
        }
    }
    log_sum_exp(num) - log_sum_exp(den)
}

/// Candidate `kappa* = E[(omega_U pi0 Psi - vartheta) l] / E[l]`, exact
/// whenever `vartheta + kappa* >= 0` on the support.
pub fn kappa_star(economy: &Economy, h: f64, rule: &QuadratureRule) -> Result<f64> {
    let law = economy.derived.law_xt;
    let nodes = rule.tilt(&law, |x| economy.ln_tilt(x, h));
    let c = economy.params.omega_u * economy.params.pi0_u;
    Ok(nodes.expect(|x| c * economy.payoff(x) - economy.vartheta(x, h)))
}

/// Multiplier of the `eta_U -> 0` limit.
pub fn solve_kappa_small_eta(economy: &Economy, h: f64, rule: &QuadratureRule) -> Result<f64> {
    let ln_omega = economy.params.omega_u.ln();
    let mut f = |k: f64| Ok(ln_small_eta_ratio(economy, h, k, rule) + ln_omega);
    let mut stats = SolverStats::default();
    let (lo, hi) = outward_bracket(&mut f, h, false, &mut stats)?;
    if lo == hi {
        return Ok(lo);
    }
    bisect_decreasing(&mut f, lo, hi, &mut stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::EconomyParams;
    use crate::preferences::{Crra, GeneralUtility};
    use crate::special_math::lambert_w0;
    use proptest::prelude::*;

    fn rule() -> QuadratureRule {
        QuadratureRule::gauss_hermite(100).unwrap()
    }

    /// Plain bisection on the defining equation, in `log z`.
    fn oracle_log_z(e: &Economy, eta: f64, rhs: f64) -> f64 {
        let f = |u: f64| e.params.omega_u * (-u / eta).exp() - e.alpha_sum() * u - rhs;
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn power_utility(eta: f64) -> GeneralUtility {
        GeneralUtility::power(eta).unwrap()
    }

    #[test]
    fn crra_kernel_example() {
        let e = Economy::baseline();
        let w = lambert_w0(0.3).unwrap();
        let expected = (10.0 / 3.0 * w).powf(-5.0);
        let z = log_z_crra(&e, 5.0, 0.0).exp();
        assert!((z / expected - 1.0).abs() < 1e-13);
        assert!((z - 3.2666).abs() < 1e-4);
        let oracle = oracle_log_z(&e, 5.0, 0.0).exp();
        assert!((z / oracle - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_utility_unit_lambert() {
        // A e^B = e makes W = 1 and z = omega_U / alpha
        let e = Economy::baseline();
        let a = e.alpha_sum();
        let omega = e.params.omega_u;
        let rhs = a * (1.0 - (omega / a).ln());
        let z = log_z_crra(&e, 1.0, rhs).exp();
        assert!((z - omega / a).abs() < 1e-13);
    }

    #[test]
    fn overflow_regime() {
        let e = Economy::baseline();
        let u = Crra::new(5.0).unwrap();
        for rhs in [1e4, 1e6, -1e4] {
            let lz = log_z_crra(&e, 5.0, rhs);
            assert!(lz.is_finite());
            let res = clearing_gap(&e, &u, lz, rhs);
            assert!(res.abs() <= 1e-8 * rhs.abs(), "rhs={rhs} res={res}");
        }
        let lz = log_z_crra(&e, 5.0, 1e4);
        assert!(lz.exp() > 0.0);
    }

    #[test]
    fn closed_form_matches_generic() {
        let e = Economy::baseline();
        let h = 0.055;
        for eta in [0.5, 1.0, 5.0] {
            let g = power_utility(eta);
            for i in 0..20 {
                let x = -2.5 + 5.0 * i as f64 / 19.0;
                for j in 0..20 {
                    let k = -5.0 + 10.0 * j as f64 / 19.0;
                    let zc = solve_z_crra(&e, eta, x, h, k);
                    let zg = solve_log_z_generic(&e, &g, x, h, k).unwrap().exp();
                    assert!((zc / zg - 1.0).abs() < 1e-9, "eta={eta} x={x} k={k}");
                }
            }
        }
    }

    #[test]
    fn residual_and_bounds_on_grid() {
        let e = Economy::baseline();
        let rule = rule();
        for eta in [0.5, 5.0] {
            let u: Arc<dyn Utility> = Arc::new(Crra::new(eta).unwrap());
            for q in 1..=9 {
                let h = e.h_quantile(q as f64 / 10.0).unwrap();
                for kappa in [-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0] {
                    let zt = solve_log_z_tilde(&e, u.as_ref(), h, kappa).unwrap();
                    let sol = ClearingSolution {
                        economy: e,
                        utility: u.clone(),
                        h,
                        kappa_hat: kappa,
                        ln_z_tilde: zt,
                        budget_residual: 0.0,
                        stats: SolverStats::default(),
                    };
                    for i in 0..50 {
                        let x = -3.0 + 6.0 * i as f64 / 49.0;
                        let z = sol.z(x).unwrap();
                        let rhs = e.vartheta(x, h) + kappa;
                        let r = clearing_residual(&e, u.as_ref(), x, h, kappa, z);
                        assert!(r.abs() <= 1e-10 * rhs.abs().max(1.0));
                        assert!(sol.check_bounds(x).unwrap());
                    }
                }
            }
        }
        let _ = rule;
    }

    #[test]
    fn z_tilde_reduces_at_zero_v() {
        let e = Economy::baseline();
        let u = Crra::new(5.0).unwrap();
        // baseline V(h) = h, so h = 0 removes the quadratic term
        for k in [-1.0, 0.0, 2.0] {
            let zt = solve_z_tilde(&e, &u, 0.0, k).unwrap();
            assert!((zt.ln() - log_z_crra(&e, 5.0, k)).abs() < 1e-14);
        }
        let a = solve_z_tilde(&e, &u, 0.3, 0.0).unwrap();
        let b = solve_z_tilde(&e, &u, 0.3, 1.0).unwrap();
        assert!(b < a);
    }

    #[test]
    fn kappa_derivative_of_z() {
        let e = Economy::baseline();
        let h = 0.055;
        let delta = 1e-5;
        for eta in [0.5, 1.0, 5.0] {
            let u = Crra::new(eta).unwrap();
            for x in [-1.0, 0.0, 0.7] {
                for k in [-1.0, 0.0, 1.5] {
                    let z = solve_z(&e, &u, x, h, k).unwrap();
                    let up = solve_z(&e, &u, x, h, k + delta).unwrap();
                    let dn = solve_z(&e, &u, x, h, k - delta).unwrap();
                    let fd = (up - dn) / (2.0 * delta * z);
                    let w = u.inverse_marginal(z);
                    let exact = -1.0
                        / (weighted_risk_tolerance(&u, e.params.omega_u, w).unwrap()
                            + e.alpha_sum());
                    assert!((fd - exact).abs() < 1e-5, "fd={fd} exact={exact}");
                }
            }
        }
    }

    #[test]
    fn budget_function_shape() {
        let e = Economy::baseline();
        let rule = rule();
        let h = 0.055;
        let u = Crra::new(0.5).unwrap();
        let grid: Vec<f64> = (0..30).map(|i| -6.0 + 0.5 * i as f64).collect();
        let g: Vec<f64> = grid
            .iter()
            .map(|&k| budget_g(&e, &u, h, k, &rule).unwrap())
            .collect();
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
        }
        let far: Vec<f64> = [0.0, -10.0, -20.0]
            .iter()
            .map(|&k| budget_g(&e, &u, h, k, &rule).unwrap())
            .collect();
        assert!(far[1] > far[0] && far[2] > far[1]);
        assert!(far[2] > 1e3);
    }

    #[test]
    fn kappa_hat_baseline() {
        let e = Economy::baseline();
        let rule = rule();
        let sol = solve_kappa_hat(&e, Arc::new(Crra::new(5.0).unwrap()), 0.055, &rule).unwrap();
        assert!(sol.budget_residual.abs() <= BUDGET_TOLERANCE);
        assert!(!sol.stats.multiple_roots);
        // re-check at the reference order
        let fine = QuadratureRule::gauss_hermite(200).unwrap();
        let g = budget_g(&e, sol.utility(), 0.055, sol.kappa_hat, &fine).unwrap();
        assert!((g - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn budget_vanishes_for_large_kappa() {
        // g decays like 1 / kappa
        let e = Economy::baseline();
        let rule = rule();
        for eta in [0.25, 1.0, 5.0, 50.0] {
            let u = Crra::new(eta).unwrap();
            let g = budget_g(&e, &u, 0.055, 1e4, &rule).unwrap();
            assert!(g <= 1e-3, "eta={eta} g={g}");
        }
    }

    #[test]
    fn budget_identity_under_signal_measure() {
        let e = Economy::baseline();
        let rule = rule();
        let h = e.h_quantile(0.3).unwrap();
        let sol = solve_kappa_hat(&e, Arc::new(Crra::new(1.0).unwrap()), h, &rule).unwrap();
        let law = e.derived.law_xt;
        let nodes = rule.tilt(&law, |x| e.ln_tilt(x, h) + sol.log_z(x).unwrap());
        let wealth = nodes.expect(|x| sol.utility().inverse_marginal(sol.z(x).unwrap()));
        let endow = nodes.expect(|x| e.params.pi0_u * e.payoff(x));
        assert!((wealth / endow - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unique_root_from_two_starts() {
        let e = Economy::baseline();
        let rule = rule();
        let u = Crra::new(0.8).unwrap();
        let h = e.h_quantile(0.7).unwrap();
        let k0 = solve_kappa_hat(&e, Arc::new(u), h, &rule)
            .unwrap()
            .kappa_hat;
        let mut stats = SolverStats::default();
        let f = |k: f64| ln_budget_g(&e, &u, h, k, &rule);
        let k1 = bisect_decreasing(f, -37.0, 53.0, &mut stats).unwrap();
        assert!((k0 - k1).abs() < 1e-8);
    }

    #[test]
    fn endowment_raises_kappa() {
        let rule = rule();
        let mut last = f64::NEG_INFINITY;
        for pi0 in [0.5, 1.0, 1.5] {
            let mut p = EconomyParams::baseline();
            p.pi0_u = pi0;
            let e = Economy::new(p).unwrap();
            let k = solve_kappa_hat(&e, Arc::new(Crra::new(1.0).unwrap()), 0.055, &rule)
                .unwrap()
                .kappa_hat;
            assert!(k > last);
            last = k;
        }
    }

    #[test]
    fn generic_utility_kappa_matches_crra() {
        let e = Economy::baseline();
        let rule = rule();
        let a = solve_kappa_hat(&e, Arc::new(Crra::new(0.5).unwrap()), 0.2, &rule).unwrap();
        let b = solve_kappa_hat(&e, Arc::new(power_utility(0.5)), 0.2, &rule).unwrap();
        assert!((a.kappa_hat - b.kappa_hat).abs() < 1e-8);
    }

    #[test]
    fn small_eta_multiplier() {
        let e = Economy::baseline();
        let rule = rule();
        let h = 0.055;
        let k = solve_kappa_small_eta(&e, h, &rule).unwrap();
        assert!((ln_small_eta_ratio(&e, h, k, &rule) + e.params.omega_u.ln()).abs() < 1e-10);
        // second bracket start
        let mut stats = SolverStats::default();
        let f = |kk: f64| Ok(ln_small_eta_ratio(&e, h, kk, &rule) + e.params.omega_u.ln());
        let k1 = bisect_decreasing(f, -40.0, 25.0, &mut stats).unwrap();
        assert!((k - k1).abs() < 1e-8);
        let law = e.derived.law_xt;
        let star = kappa_star(&e, h, &rule).unwrap();
        let nonneg = rule.abscissae(&law).all(|x| e.vartheta(x, h) + star >= 0.0);
        if nonneg {
            assert!((k - star).abs() < 1e-8);
        }
    }

    #[test]
    fn small_eta_large_supply_uses_kappa_star() {
        let mut p = EconomyParams::baseline();
        p.supply = 50.0;
        let e = Economy::new(p).unwrap();
        let rule = rule();
        let h = 0.055;
        let k = solve_kappa_small_eta(&e, h, &rule).unwrap();
        let law = e.derived.law_xt;
        let positive = rule
            .abscissae(&law)
            .filter(|&x| e.vartheta(x, h) + k > 0.0)
            .count();
        assert!(positive > 0);
        let star = kappa_star(&e, h, &rule).unwrap();
        if rule.abscissae(&law).all(|x| e.vartheta(x, h) + star >= 0.0) {
            assert!((k - star).abs() < 1e-8 * star.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn crra_solution_solves_equation(eta in 0.05f64..60.0, rhs in -1e3f64..1e3) {
            let e = Economy::baseline();
            let u = Crra::new(eta).unwrap();
            let lz = log_z_crra(&e, eta, rhs);
            prop_assert!(lz.is_finite());
            let r = clearing_gap(&e, &u, lz, rhs);
            prop_assert!(r.abs() <= 1e-10 * rhs.abs().max(1.0));
            let oracle = oracle_log_z(&e, eta, rhs);
            prop_assert!((lz - oracle).abs() <= 1e-8 * oracle.abs().max(1.0));
        }
    }
}
