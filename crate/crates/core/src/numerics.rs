//! Scalar numerics: the standard Gaussian, expectations over it, binary and
//! differential entropy, and bracketed bisection.
//!
//! Everything here is a pure function. Quadrature rules are built once per
//! distinct [`QuadratureSpec`] and shared through a process-wide cache.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Densities below this contribute nothing to entropy integrands.
pub const DENSITY_FLOOR: f64 = 1e-300;

const NEGATIVE_DENSITY_SLACK: f64 = 1e-12;

/// Default node count for expectations over a standard Gaussian.
pub const DEFAULT_GH_NODES: usize = 96;

/// Standard normal CDF.
///
/// Computed through the complementary error function, which keeps full
/// relative precision deep into the lower tail.
///
/// ```
/// use ggcoord::numerics::std_normal_cdf;
/// assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
/// assert!(std_normal_cdf(f64::NAN).is_err());
/// ```
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("std_normal_cdf requires a finite argument, got {x}")));
    }
    Ok(phi_cdf(x))
}

/// Infallible Φ used on hot paths. Infinite arguments map to 0 or 1.
#[inline]
pub(crate) fn phi_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Which family of nodes a [`QuadratureSpec`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadratureKind {
    GaussHermite,
    TrapezoidTruncated,
}

/// Describes a rule for `E[f(W)]`, `W ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    node_count: usize,
    kind: QuadratureKind,
    truncation_sigmas: f64,
}

impl QuadratureSpec {
    pub fn new(node_count: usize, kind: QuadratureKind, truncation_sigmas: f64) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least 2 nodes, got {node_count}"
            )));
        }
        if !(truncation_sigmas >= 4.0) || !truncation_sigmas.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "truncation_sigmas must be a finite value >= 4, got {truncation_sigmas}"
            )));
        }
        Ok(Self { node_count, kind, truncation_sigmas })
    }

    pub fn gauss_hermite(node_count: usize) -> Result<Self> {
        Self::new(node_count, QuadratureKind::GaussHermite, 8.0)
    }

    pub fn trapezoid(node_count: usize, truncation_sigmas: f64) -> Result<Self> {
        Self::new(node_count, QuadratureKind::TrapezoidTruncated, truncation_sigmas)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn truncation_sigmas(&self) -> f64 {
        self.truncation_sigmas
    }

    /// Shared, cached rule for this spec.
    pub fn rule(&self) -> Arc<GaussianRule> {
        type Key = (QuadratureKind, usize, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<GaussianRule>>>> = OnceLock::new();
        let key = (self.kind, self.node_count, self.truncation_sigmas.to_bits());
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard.entry(key).or_insert_with(|| Arc::new(GaussianRule::build(self))).clone()
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { node_count: DEFAULT_GH_NODES, kind: QuadratureKind::GaussHermite, truncation_sigmas: 8.0 }
    }
}

/// Nodes and weights such that `Σ wᵢ f(xᵢ) ≈ E[f(W)]` for standard normal `W`.
#[derive(Debug, Clone)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    fn build(spec: &QuadratureSpec) -> Self {
        match spec.kind {
            QuadratureKind::GaussHermite => Self::gauss_hermite(spec.node_count),
            QuadratureKind::TrapezoidTruncated => Self::trapezoid(spec.node_count, spec.truncation_sigmas),
        }
    }

    /// Gauss–Hermite rule rescaled to the standard normal weight.
    ///
    /// Roots of the physicists' Hermite polynomial are found by Newton's
    /// method on the orthonormal three-term recurrence, largest root first,
    /// using the asymptotic initial guesses of Stroud and Secrest.
    fn gauss_hermite(n: usize) -> Self {
        const PI_M4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
        let nf = n as f64;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let half = n.div_ceil(2);
        let mut z = 0.0_f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PI_M4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let norm = PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * SQRT_2).collect();
        let weights = w.iter().rev().map(|v| v / norm).collect();
        Self { nodes, weights }
    }

    /// Composite trapezoid rule against the Gaussian density on
    /// `[-t, t]`. Mass beyond the truncation is dropped.
    fn trapezoid(n: usize, t: f64) -> Self {
        let h = 2.0 * t / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|k| -t + h * k as f64).collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let end = k == 0 || k == n - 1;
                let base = normal_pdf(x, 0.0, 1.0) * h;
                if end {
                    0.5 * base
                } else {
                    base
                }
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(W)]`; errors if `f` is non-finite at any node.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NumericalDomain(format!("integrand is {v} at quadrature node {x}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// `E[f(W)]` for `W ~ N(0, 1)` under the given rule.
///
/// ```
/// use ggcoord::numerics::{gaussian_expectation, QuadratureSpec};
/// let spec = QuadratureSpec::default();
/// let second_moment = gaussian_expectation(|w| w * w, &spec).unwrap();
/// assert!((second_moment - 1.0).abs() < 1e-12);
/// ```
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.rule().expectation(f)
}

/// Binary entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("binary_entropy needs p in [0, 1], got {p}")));
    }
    Ok(binary_entropy_unchecked(p))
}

#[inline]
pub(crate) fn binary_entropy_unchecked(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Inverse of [`binary_entropy`] restricted to `[0, 1/2]`.
///
/// ```
/// use ggcoord::numerics::{binary_entropy, inverse_binary_entropy};
/// let p = inverse_binary_entropy(binary_entropy(0.11).unwrap()).unwrap();
/// assert!((p - 0.11).abs() < 1e-9);
/// ```
pub fn inverse_binary_entropy(hval: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&hval) {
        return Err(Error::InvalidArgument(format!(
            "inverse_binary_entropy needs a value in [0, 1], got {hval}"
        )));
    }
    if hval == 0.0 {
        return Ok(0.0);
    }
    if hval == 1.0 {
        return Ok(0.5);
    }
    find_root_bracketed(|p| binary_entropy_unchecked(p) - hval, 0.0, 0.5, 1e-15)
}

/// Bisection on a sign-change bracket. Returns the midpoint of the final
/// bracket once its width is at most `tol`, or an endpoint where `f`
/// vanishes exactly.
pub fn find_root_bracketed<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (a, b) = bisect_bracket(f, lo, hi, tol)?;
    Ok(if a == b { a } else { 0.5 * (a + b) })
}

/// Bisection returning the final bracket `(a, b)` with `f(a)` and `f(b)` of
/// opposite sign (or `a == b` at an exact zero).
pub(crate) fn bisect_bracket<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bracket requires finite lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NumericalDomain(format!(
            "function is NaN at a bracket endpoint: f({lo}) = {f_lo}, f({hi}) = {f_hi}"
        )));
    }
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    if f_hi == 0.0 {
        return Ok((hi, hi));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if (fm < 0.0) == lo_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a, b))
}

/// Differential entropy `-∫ p log₂ p` of a density over `[lo, hi]`.
///
/// Uses composite Simpson when `node_count` is odd and at least 3, the
/// trapezoid rule otherwise.
pub fn differential_entropy<F: Fn(f64) -> f64>(
    density: F,
    lo: f64,
    hi: f64,
    node_count: usize,
) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "integration range must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    if node_count < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {node_count}")));
    }
    let integrand = |x: f64| -> Result<f64> {
        let p = density(x);
        if p.is_nan() {
            return Err(Error::NumericalDomain(format!("density is NaN at {x}")));
        }
        if p < -NEGATIVE_DENSITY_SLACK {
            return Err(Error::InvalidDensity { x, value: p });
        }
        Ok(if p < DENSITY_FLOOR { 0.0 } else { -p * p.log2() })
    };
    composite_rule(integrand, lo, hi, node_count)
}

/// Composite Simpson (odd node counts) or trapezoid over `[lo, hi]`.
pub(crate) fn composite_rule<F>(f: F, lo: f64, hi: f64, node_count: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let intervals = node_count - 1;
    let h = (hi - lo) / intervals as f64;
    let x_at = |k: usize| if k == intervals { hi } else { lo + h * k as f64 };
    let simpson = node_count >= 3 && intervals.is_multiple_of(2);
    let mut acc = 0.0;
    for k in 0..=intervals {
        let c = if k == 0 || k == intervals {
            1.0
        } else if simpson {
            if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        } else {
            2.0
        };
        acc += c * f(x_at(k))?;
    }
    Ok(if simpson { acc * h / 3.0 } else { acc * h / 2.0 })
}
