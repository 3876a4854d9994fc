//! Gauss–Hermite quadrature against Gaussian laws.
//!
//! Rules use the probabilists' normalization: for a standard normal `Z`,
//! `E[f(Z)] ~= sum_i w_i f(n_i)` with `sum_i w_i = 1`. Nodes come from the
//! Golub–Welsch eigenvalues of the Jacobi matrix and are then polished with
//! Newton's method on the orthonormal Hermite recurrence; weights use the
//! Christoffel sum `1 / sum_k p_k(n_i)^2`, which keeps full relative
//! precision in the tails.
//!
//! Integrands with a kink or a thin transition layer converge slowly under
//! Gauss–Hermite; [`QuadratureRule::log_nodes`] switches to composite
//! Gauss–Legendre panels split and graded at given breakpoints.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{PceError, Result};

/// Default rule order used by the equilibrium evaluators.
pub const DEFAULT_ORDER: usize = 100;
/// Order of the reference rule used to flag insufficient quadrature.
pub const REFERENCE_ORDER: usize = 200;
/// Half-width, in standard deviations, of the range covered by piecewise nodes.
pub const PIECEWISE_HALF_WIDTH: f64 = 14.0;
/// Smallest panel next to a breakpoint, in standard deviations.
const GRADING_FLOOR: f64 = 1e-6;
const GRADING_RATIO: f64 = 4.0;

/// A normal law `N(mean, variance)` with strictly positive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    mean: f64,
    variance: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(PceError::InvalidParameter(format!(
                "gaussian law needs finite mean and positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * d * d / self.variance - 0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
    }

    /// Quantile via the standard normal inverse CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        use statrs::distribution::{ContinuousCDF, Normal};
        if !(p > 0.0 && p < 1.0) {
            return Err(PceError::InvalidParameter(format!(
                "quantile level {p} outside (0, 1)"
            )));
        }
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(self.mean + self.std_dev() * n.inverse_cdf(p))
    }
}

/// Gauss–Hermite nodes and weights normalized to the standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    /// Gauss–Legendre nodes and weights on `[-1, 1]` for piecewise panels.
    panel: Vec<(f64, f64)>,
}

impl QuadratureRule {
    /// Probabilists' Gauss–Hermite rule with `order` nodes.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(PceError::InvalidParameter(
                "quadrature order must be at least 1".into(),
            ));
        }
        let panel = gauss_legendre((order / 10).max(2));
        if order == 1 {
            return Ok(Self {
                nodes: vec![0.0],
                weights: vec![1.0],
                ln_weights: vec![0.0],
                panel,
            });
        }
        let n = order;
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

        let sqrt_n = (n as f64).sqrt();
        for x in nodes.iter_mut() {
            for _ in 0..20 {
                let r = hermite_recurrence(*x, n);
                let step = r.p_n / (sqrt_n * r.p_n_minus_1);
                *x -= step;
                if step.abs() <= 2.0 * f64::EPSILON * (1.0 + x.abs()) {
                    break;
                }
            }
        }
        // enforce exact symmetry about zero
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let a = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -a;
            nodes[j] = a;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let ln_weights: Vec<f64> = nodes
            .iter()
            .map(|&x| -hermite_recurrence(x, n).ln_christoffel_sum)
            .collect();
        let weights = ln_weights.iter().map(|l| l.exp()).collect();
        Ok(Self {
            nodes,
            weights,
            ln_weights,
            panel,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }

    /// Nodes mapped onto `law`: `mean + sd * n_i`.
    pub fn abscissae(&self, law: &GaussianLaw) -> impl Iterator<Item = f64> + '_ {
        let (m, s) = (law.mean(), law.std_dev());
        self.nodes.iter().map(move |&n| m + s * n)
    }

    /// `E[f(Y)]` for `Y ~ law`.
    pub fn expect<F: Fn(f64) -> f64>(&self, law: &GaussianLaw, f: F) -> Result<f64> {
        let v: f64 = self
            .abscissae(law)
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PceError::Overflow(format!(
                "quadrature sum is {v}; rescale the integrand or use log-space evaluation"
            )))
        }
    }

    /// `ln E[exp(g(Y))]` for `Y ~ law`, by log-sum-exp over the nodes.
    pub fn ln_expect_exp<F: Fn(f64) -> f64>(&self, law: &GaussianLaw, g: F) -> f64 {
        log_sum_exp(
            self.abscissae(law)
                .zip(&self.ln_weights)
                .map(|(x, lw)| lw + g(x)),
        )
    }

    /// Reweights the rule's nodes by `exp(g(x))`, producing a discrete
    /// probability measure. Expectations under the tilted measure are then
    /// plain weighted sums.
    pub fn tilt<F: Fn(f64) -> f64>(&self, law: &GaussianLaw, g: F) -> TiltedNodes {
        let xs: Vec<f64> = self.abscissae(law).collect();
        let logs: Vec<f64> = xs
            .iter()
            .zip(&self.ln_weights)
            .map(|(&x, lw)| lw + g(x))
            .collect();
        let ln_norm = log_sum_exp(logs.iter().copied());
        let probs = logs.iter().map(|l| (l - ln_norm).exp()).collect();
        TiltedNodes { xs, probs, ln_norm }
    }

    /// `(x, ln w)` pairs with `E[f(Y)] ~= sum w f(x)` for `Y ~ law`.
    ///
    /// With no breakpoint inside `mean +- PIECEWISE_HALF_WIDTH sd` these are
    /// the Gauss–Hermite nodes. Otherwise the range is cut at the breakpoints,
    /// panels shrink geometrically toward each breakpoint down to
    /// `1e-6 sd`, no panel is wider than one standard deviation, and each
    /// panel carries `order / 10` Gauss–Legendre nodes.
    pub fn log_nodes(&self, law: &GaussianLaw, breaks: &[f64]) -> Vec<(f64, f64)> {
        let (m, s) = (law.mean(), law.std_dev());
        let lo = m - PIECEWISE_HALF_WIDTH * s;
        let hi = m + PIECEWISE_HALF_WIDTH * s;
        let mut cuts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|b| b.is_finite() && *b > lo && *b < hi)
            .collect();
        if cuts.is_empty() {
            return self
                .abscissae(law)
                .zip(self.ln_weights.iter().copied())
                .collect();
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut edges = vec![lo];
        let mut ends = vec![lo];
        ends.extend(&cuts);
        ends.push(hi);
        for (i, pair) in ends.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let kink_a = i > 0;
            let kink_b = i + 1 < ends.len() - 1;
            let mid = 0.5 * (a + b);
            match (kink_a, kink_b) {
                (true, true) => {
                    graded_edges(a, mid, s, false, &mut edges);
                    graded_edges(mid, b, s, true, &mut edges);
                }
                (true, false) => graded_edges(a, b, s, false, &mut edges),
                (false, true) => graded_edges(a, b, s, true, &mut edges),
                (false, false) => graded_edges(a, b, s, true, &mut edges),
            }
        }
        let mut out = Vec::with_capacity(edges.len() * self.panel.len());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            if half <= 0.0 {
                continue;
            }
            let c = 0.5 * (a + b);
            for &(t, w) in &self.panel {
                let x = c + half * t;
                out.push((x, (w * half).ln() + law.ln_pdf(x)));
            }
        }
        out
    }
}

/// Appends panel edges covering `(a, b]`, graded toward `b` when
/// `toward_end`, otherwise toward `a`, with no panel wider than `s`.
fn graded_edges(a: f64, b: f64, s: f64, toward_end: bool, edges: &mut Vec<f64>) {
    let width = b - a;
    let mut offsets = vec![0.0];
    let mut d = GRADING_FLOOR * s;
    while d < width {
        offsets.push(d);
        d *= GRADING_RATIO;
    }
    offsets.push(width);
    // offsets measured from the graded end
    let mut points: Vec<f64> = Vec::with_capacity(offsets.len());
    for pair in offsets.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let pieces = ((v - u) / s).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            points.push(u + (v - u) * k as f64 / pieces as f64);
        }
    }
    let mapped: Vec<f64> = if toward_end {
        let mut p: Vec<f64> = points.iter().map(|o| b - o).collect();
        p.push(b);
        p.sort_by(f64::total_cmp);
        p.into_iter().filter(|&x| x > a).collect()
    } else {
        points.iter().map(|o| a + o).collect()
    };
    for x in mapped {
        if x > *edges.last().expect("edges start non-empty") {
            edges.push(x);
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Golub–Welsch.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Nodes with normalized weights after an exponential reweighting.
#[derive(Debug, Clone)]
pub struct TiltedNodes {
    pub xs: Vec<f64>,
    /// Normalized probabilities; they sum to one.
    pub probs: Vec<f64>,
    /// `ln E[exp(g)]` under the untilted law.
    pub ln_norm: f64,
}

impl TiltedNodes {
    /// Normalizes the masses `exp(ln_mass)` at `xs` into probabilities.
    pub fn from_log_masses(xs: Vec<f64>, ln_mass: &[f64]) -> Self {
        let ln_norm = log_sum_exp(ln_mass.iter().copied());
        let probs = ln_mass.iter().map(|l| (l - ln_norm).exp()).collect();
        Self { xs, probs, ln_norm }
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.xs
            .iter()
            .zip(&self.probs)
            .map(|(&x, p)| p * f(x))
            .sum()
    }

    /// `ln E_tilted[exp(g)]`.
    pub fn ln_expect_exp<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        log_sum_exp(
            self.xs
                .iter()
                .zip(&self.probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&x, p)| p.ln() + g(x)),
        )
    }
}

/// Max-shifted `ln sum exp(a_i)`. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

struct Recurrence {
    p_n: f64,
    p_n_minus_1: f64,
    ln_christoffel_sum: f64,
}

/// Orthonormal probabilists' Hermite recurrence
/// `p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1)`, rescaled to stay finite.
fn hermite_recurrence(x: f64, n: usize) -> Recurrence {
    const BIG: f64 = 1e150;
    let mut prev = 0.0_f64;
    let mut cur = 1.0_f64;
    let mut sum = 0.0_f64;
    let mut ln_scale = 0.0_f64;
    for k in 0..n {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            sum /= BIG * BIG;
            ln_scale += BIG.ln();
        }
    }
    Recurrence {
        p_n: cur,
        p_n_minus_1: prev,
        ln_christoffel_sum: sum.ln() + 2.0 * ln_scale,
    }
}

/// Law proportional to `exp(-b x^2 / 2 + c x) * density(law)`.
pub fn tilted_gaussian(law: &GaussianLaw, b: f64, c: f64) -> Result<GaussianLaw> {
    let precision = 1.0 / law.variance() + b;
    if !(precision > 0.0) {
        return Err(PceError::Degenerate(format!(
            "tilted precision {precision} is not positive"
        )));
    }
    let variance = 1.0 / precision;
    GaussianLaw::new(variance * (law.mean() / law.variance() + c), variance)
}
