//! Beliefs, best responses and equilibrium thresholds for the linear-benefit
//! global game.
//!
//! With a linear benefit `b(ξ) = λξ/N`, an agent that observes `y` engages
//! iff the expected number of engaging peers (scaled by `λ/N`) covers the
//! posterior mean `αy` of the state. When every peer uses the threshold
//! `τ`, the probability that a given peer engages is the belief
//!
//! ```text
//! π(ξ; τ) = E[ Φ((τ − σ̃W − αξ) / σZ) ],   W ~ N(0, 1),  σ̃² = ασZ²
//! ```
//!
//! and the best response is the unique `ξ*` with `λ(N−1)/N · π(ξ*; τ) = αξ*`.
//! The left side decreases in `ξ` and the right side increases, so the
//! crossing is found by bisection on `[0, λ(N−1)/(Nα)]`.
//!
//! All functions here take the noise level `σZ² > 0`; the noiseless case is
//! only represented by [`oracle_threshold`].

use crate::error::{Error, Result};
use crate::game::{GameParams, PolicyProfile};
use crate::numerics::{bisect_bracket, phi_cdf, GaussianRule, QuadratureSpec};

const ROOT_TOL: f64 = 1e-13;

/// Maximum number of best-response iterations in [`ne_threshold`].
pub const BR_MAX_ITERATIONS: usize = 10_000;
/// Step size below which best-response iteration counts as converged.
pub const BR_STEP_TOL: f64 = 1e-12;
/// Agreement required between the direct root and best-response iteration.
pub const BR_AGREEMENT_TOL: f64 = 1e-6;

/// How an equilibrium threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeMethod {
    DirectRoot,
    BrIteration,
}

/// Symmetric equilibrium threshold together with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NeSolution {
    pub tau_star: f64,
    /// Bisection steps used for the direct root.
    pub iterations: usize,
    /// `|λ(N−1)/N · π(τ*; τ*) − ατ*|`.
    pub residual: f64,
    pub method: NeMethod,
    /// Best-response iteration cross-check.
    pub br_check: BrIterationCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrIterationCheck {
    pub tau: f64,
    pub steps: usize,
    pub converged: bool,
    /// `|tau − tau_star|`.
    pub deviation: f64,
    /// `converged && deviation <= 1e-6`.
    pub agrees: bool,
}

impl NeSolution {
    /// `true` when best-response iteration did not reproduce the root.
    pub fn warning(&self) -> bool {
        !self.br_check.agrees
    }
}

/// Posterior mean of the state, `α·y`.
pub fn mmse_estimate(y: f64, params: &GameParams) -> f64 {
    params.alpha() * y
}

struct Beliefs<'a> {
    params: &'a GameParams,
    rule: std::sync::Arc<GaussianRule>,
}

impl<'a> Beliefs<'a> {
    fn new(params: &'a GameParams, quad: &QuadratureSpec) -> Result<Self> {
        params.require_noisy()?;
        Ok(Self { params, rule: quad.rule() })
    }

    /// `E[Φ((τ − σ̃W − αξ)/σZ)]`.
    fn pi(&self, xi: f64, tau: f64) -> Result<f64> {
        let alpha = self.params.alpha();
        let sz = self.params.sigma_z();
        let st = self.params.sigma_tilde_sq().sqrt();
        let centre = tau - alpha * xi;
        self.rule.expectation(|w| phi_cdf((centre - st * w) / sz))
    }

    /// `E_V[Φ((τⱼ − V − α yᵢ)/σZ)]` with `V ~ N(0, σX²σZ²/(σX²+σZ²))`.
    fn pair(&self, tau_j: f64, y_i: f64) -> Result<f64> {
        let p = self.params;
        let sd_v = (p.sigma_x_sq() * p.sigma_z_sq() / (p.sigma_x_sq() + p.sigma_z_sq())).sqrt();
        let centre = tau_j - p.alpha() * y_i;
        let sz = p.sigma_z();
        self.rule.expectation(|w| phi_cdf((centre - sd_v * w) / sz))
    }

    fn best_response(&self, tau: f64) -> Result<f64> {
        let c = self.params.br_coeff();
        let alpha = self.params.alpha();
        let upper = c / alpha;
        solve_decreasing(|xi| Ok(c * self.pi(xi, tau)? - alpha * xi), upper, self.params)
    }
}

/// Bisection for the root of a function that is `>= 0` at `0` and `<= 0`
/// at `upper`. Errors inside `f` are surfaced, bracket failures reported as
/// numerical inconsistencies.
fn solve_decreasing<F>(f: F, upper: f64, params: &GameParams) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let first_err = std::cell::RefCell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            first_err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = bisect_bracket(g, 0.0, upper, ROOT_TOL * upper.max(1.0));
    if let Some(e) = first_err.into_inner() {
        return Err(e);
    }
    match out {
        Ok((a, b)) => Ok(if a == b { a } else { 0.5 * (a + b) }),
        Err(Error::Bracket { lo, hi, f_lo, f_hi }) => Err(Error::NumericalInconsistency(format!(
            "best-response bracket [{lo}, {hi}] has f = ({f_lo}, {f_hi}) for {params:?}"
        ))),
        Err(e) => Err(e),
    }
}

/// Probability that a peer with threshold `τ` engages, seen by an agent
/// whose signal is `ξ`.
///
/// ```
/// use ggcoord::equilibrium::belief_pi;
/// use ggcoord::game::{AgentCount, GameParams};
/// let p = GameParams::new(AgentCount::Finite(10), 1.0, 1.0, 1.0).unwrap();
/// // centred argument: the peer is equally likely to engage or not
/// let v = belief_pi(0.8, p.alpha() * 0.8, &p).unwrap();
/// assert!((v - 0.5).abs() < 1e-8);
/// ```
pub fn belief_pi(xi: f64, tau: f64, params: &GameParams) -> Result<f64> {
    belief_pi_with(xi, tau, params, &QuadratureSpec::default())
}

pub fn belief_pi_with(xi: f64, tau: f64, params: &GameParams, quad: &QuadratureSpec) -> Result<f64> {
    Beliefs::new(params, quad)?.pi(xi, tau)
}

/// `P(Yⱼ ≤ τⱼ | Yᵢ = yᵢ)`.
pub fn belief_pair(tau_j: f64, y_i: f64, params: &GameParams) -> Result<f64> {
    belief_pair_with(tau_j, y_i, params, &QuadratureSpec::default())
}

pub fn belief_pair_with(tau_j: f64, y_i: f64, params: &GameParams, quad: &QuadratureSpec) -> Result<f64> {
    Beliefs::new(params, quad)?.pair(tau_j, y_i)
}

/// Best-response threshold to a homogeneous profile with threshold `τ`.
pub fn best_response_threshold(tau: f64, params: &GameParams) -> Result<f64> {
    best_response_threshold_with(tau, params, &QuadratureSpec::default())
}

pub fn best_response_threshold_with(tau: f64, params: &GameParams, quad: &QuadratureSpec) -> Result<f64> {
    Beliefs::new(params, quad)?.best_response(tau)
}

/// Symmetric Bayesian Nash equilibrium threshold `τ*`.
///
/// Solved directly as the root of `g(τ) = λ(N−1)/N · π(τ; τ) − ατ` on
/// `[0, λ(N−1)/(Nα)]`, where `g(0) > 0` and `g` is nonpositive at the upper
/// end. Best-response iteration from the lower bound `λ(N−1)/(2Nα)` is run as
/// a cross-check; it is not guaranteed to contract, so disagreement is
/// reported through [`NeSolution::warning`] rather than as an error.
pub fn ne_threshold(params: &GameParams) -> Result<NeSolution> {
    ne_threshold_with(params, &QuadratureSpec::default())
}

pub fn ne_threshold_with(params: &GameParams, quad: &QuadratureSpec) -> Result<NeSolution> {
    let beliefs = Beliefs::new(params, quad)?;
    let c = params.br_coeff();
    let alpha = params.alpha();
    let upper = c / alpha;
    let g = |t: f64| -> Result<f64> { Ok(c * beliefs.pi(t, t)? - alpha * t) };

    let iterations = std::cell::Cell::new(0usize);
    let tau_star = solve_decreasing(
        |t| {
            iterations.set(iterations.get() + 1);
            g(t)
        },
        upper,
        params,
    )?;
    let residual = g(tau_star)?.abs();

    let mut tau = c / (2.0 * alpha);
    let mut steps = 0;
    let mut converged = false;
    while steps < BR_MAX_ITERATIONS {
        let next = beliefs.best_response(tau)?;
        steps += 1;
        let step = (next - tau).abs();
        tau = next;
        if step <= BR_STEP_TOL * tau.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let deviation = (tau - tau_star).abs();
    Ok(NeSolution {
        tau_star,
        iterations: iterations.get(),
        residual,
        method: NeMethod::DirectRoot,
        br_check: BrIterationCheck {
            tau,
            steps,
            converged,
            deviation,
            agrees: converged && deviation <= BR_AGREEMENT_TOL,
        },
    })
}

/// One application of the best-response map to a heterogeneous profile.
///
/// Component `i` is the root of `(λ/N) Σ_{j≠i} π_ij(τⱼ, ξ) − αξ`.
pub fn br_map_heterogeneous(taus: &PolicyProfile, params: &GameParams) -> Result<PolicyProfile> {
    br_map_heterogeneous_with(taus, params, &QuadratureSpec::default())
}

pub fn br_map_heterogeneous_with(
    taus: &PolicyProfile,
    params: &GameParams,
    quad: &QuadratureSpec,
) -> Result<PolicyProfile> {
    let n = params.require_finite_n()?;
    if taus.len() as u64 != n {
        return Err(Error::InvalidArgument(format!("profile has {} thresholds but N = {n}", taus.len())));
    }
    let beliefs = Beliefs::new(params, quad)?;
    let scale = params.lambda() / n as f64;
    let alpha = params.alpha();
    let upper = params.br_coeff() / alpha;
    let t = taus.thresholds();
    let out = (0..t.len())
        .map(|i| {
            solve_decreasing(
                |xi| {
                    let mut s = 0.0;
                    for (j, &tj) in t.iter().enumerate() {
                        if j != i {
                            s += beliefs.pair(tj, xi)?;
                        }
                    }
                    Ok(scale * s - alpha * xi)
                },
                upper,
                params,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    PolicyProfile::new(out)
}

/// Perfect-information threshold `λ/2 · (1 − 1/N)` (`λ/2` in the limit).
pub fn oracle_threshold(params: &GameParams) -> f64 {
    0.5 * params.br_coeff()
}

/// Certainty-equivalent threshold `(1 + σZ²/σX²) · λ/2 · (1 − 1/N)`:
/// the oracle rule applied to the MMSE estimate `αy`.
pub fn ce_threshold(params: &GameParams) -> f64 {
    (1.0 + params.sigma_z_sq() / params.sigma_x_sq()) * oracle_threshold(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::AgentCount;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(n: AgentCount, lambda: f64, sx2: f64, sz2: f64) -> GameParams {
        GameParams::new(n, lambda, sx2, sz2).unwrap()
    }

    fn ten(sz2: f64) -> GameParams {
        params(AgentCount::Finite(10), 1.0, 1.0, sz2)
    }

    /// Closed form of the belief: E[Φ(a − cW)] = Φ(a / sqrt(1 + c²)).
    fn pi_closed(xi: f64, tau: f64, p: &GameParams) -> f64 {
        let a = p.alpha();
        phi_cdf((tau - a * xi) / (p.sigma_z() * (1.0 + a).sqrt()))
    }

    /// Root of a continuous function by a step-1e-5 scan followed by linear
    /// interpolation within the sign-change cell.
    fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
        let step = 1e-5;
        let n = ((hi - lo) / step).ceil() as usize;
        let mut roots = Vec::new();
        let mut x0 = lo;
        let mut f0 = f(x0);
        for k in 1..=n {
            let x1 = lo + step * k as f64;
            let f1 = f(x1);
            if f0.signum() != f1.signum() {
                roots.push(x0 - f0 * (x1 - x0) / (f1 - f0));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn mmse_examples() {
        assert_eq!(mmse_estimate(0.0, &ten(1.0)), 0.0);
        assert_eq!(mmse_estimate(2.0, &ten(1.0)), 1.0);
        assert_eq!(mmse_estimate(1.7, &ten(0.0)), 1.7);
    }

    #[test]
    fn belief_examples() {
        let p = ten(1.0);
        for xi in [-2.0, 0.0, 0.6, 3.0] {
            assert_abs_diff_eq!(belief_pi(xi, p.alpha() * xi, &p).unwrap(), 0.5, epsilon = 1e-8);
            let far = p.alpha() * xi + 50.0 * p.sigma_z();
            assert_abs_diff_eq!(belief_pi(xi, far, &p).unwrap(), 1.0, epsilon = 1e-8);
        }
        // mpmath quadrature of the defining integral; a 1e7-sample Monte Carlo
        // gave 0.59679 ± 0.00007.
        let v = belief_pi(0.6, 0.6, &p).unwrap();
        assert_abs_diff_eq!(v, 0.596_752_029_746_329_96, epsilon = 1e-12);
        assert!(v > 0.5 && v < 1.0);
    }

    #[test]
    fn belief_matches_closed_form() {
        for sz2 in [0.01, 0.3, 1.0, 7.0] {
            let p = params(AgentCount::Finite(5), 1.3, 2.0, sz2);
            for k in 0..20 {
                let xi = -3.0 + 0.37 * k as f64;
                let tau = 0.8 - 0.11 * k as f64;
                assert_abs_diff_eq!(belief_pi(xi, tau, &p).unwrap(), pi_closed(xi, tau, &p), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn belief_pair_examples() {
        let p = ten(1.0);
        for y in [-1.0, 0.0, 2.5] {
            assert_abs_diff_eq!(belief_pair(p.alpha() * y, y, &p).unwrap(), 0.5, epsilon = 1e-8);
        }
        for k in 0..100 {
            let tau = -2.0 + 0.04 * k as f64;
            let y = 1.5 - 0.03 * k as f64;
            assert_abs_diff_eq!(
                belief_pair(tau, y, &p).unwrap(),
                belief_pi(y, tau, &p).unwrap(),
                epsilon = 1e-10
            );
        }
        let q = params(AgentCount::Finite(10), 1.0, 1.0, 0.5);
        let v = belief_pair(0.0, 1.0, &q).unwrap();
        assert_abs_diff_eq!(v, 0.232_604_409_226_070_84, epsilon = 1e-12);
        assert!(v < 0.5);
    }

    #[test]
    fn noiseless_channel_rejected() {
        let p = ten(0.0);
        assert_eq!(belief_pi(0.0, 0.0, &p), Err(Error::NoiselessDegenerate));
        assert_eq!(belief_pair(0.0, 0.0, &p), Err(Error::NoiselessDegenerate));
        assert_eq!(best_response_threshold(0.0, &p), Err(Error::NoiselessDegenerate));
        assert!(matches!(ne_threshold(&p), Err(Error::NoiselessDegenerate)));
        assert_eq!(oracle_threshold(&p), 0.45);
    }

    #[test]
    fn best_response_examples() {
        let p = ten(1.0);
        let br = best_response_threshold(0.5, &p).unwrap();
        let scan = scan_roots(|x| p.br_coeff() * pi_closed(x, 0.5, &p) - p.alpha() * x, -1.0, 3.0);
        assert_eq!(scan.len(), 1);
        assert_abs_diff_eq!(br, scan[0], epsilon = 1e-8);
        assert_abs_diff_eq!(br, 0.922_667_226_781_956_5, epsilon = 1e-8);

        let low = best_response_threshold(-50.0, &p).unwrap();
        assert_abs_diff_eq!(low, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn br_curve_fixed_points_increase_with_noise() {
        let mut prev = f64::NEG_INFINITY;
        for sz2 in [0.1, 0.5, 1.0] {
            let p = ten(sz2);
            let taus: Vec<f64> = (0..=200).map(|k| 0.02 * k as f64).collect();
            let diffs: Vec<f64> = taus.iter().map(|&t| best_response_threshold(t, &p).unwrap() - t).collect();
            let crossings = diffs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
            assert_eq!(crossings, 1, "sz2 = {sz2}");
            let fp = ne_threshold(&p).unwrap().tau_star;
            assert!(fp > prev);
            prev = fp;
        }
    }

    #[test]
    fn ne_threshold_examples() {
        let p = ten(1.0);
        let sol = ne_threshold(&p).unwrap();
        assert_eq!(sol.method, NeMethod::DirectRoot);
        assert!(sol.residual <= 1e-9);
        let scan = scan_roots(|t| p.br_coeff() * pi_closed(t, t, &p) - p.alpha() * t, -1.0, 4.0);
        assert_eq!(scan.len(), 1);
        assert_abs_diff_eq!(sol.tau_star, scan[0], epsilon = 1e-8);
        assert_abs_diff_eq!(sol.tau_star, 1.251_547_603_388_009, epsilon = 1e-8);
        assert!(sol.br_check.agrees, "{:?}", sol.br_check);

        let diffuse = params(AgentCount::Finite(10), 1.0, 1e8, 1.0);
        assert_abs_diff_eq!(ne_threshold(&diffuse).unwrap().tau_star, 0.45, epsilon = 1e-3);
    }

    #[test]
    fn ne_threshold_mean_field() {
        let p = params(AgentCount::Infinite, 1.0, 1.0, 0.25);
        assert_abs_diff_eq!(ne_threshold(&p).unwrap().tau_star, 0.733_139_164_552_683_2, epsilon = 1e-8);
    }

    #[test]
    fn ne_sandwich_and_residual_on_grid() {
        for &lambda in &[0.5, 1.0, 2.0] {
            for &sx2 in &[0.5, 1.0, 4.0] {
                for &sz2 in &[0.1, 1.0, 4.0] {
                    let p = params(AgentCount::Finite(10), lambda, sx2, sz2);
                    let sol = ne_threshold(&p).unwrap();
                    let c = p.br_coeff();
                    let ratio = p.alpha() * sol.tau_star / c;
                    assert!(ratio >= 0.5 - 1e-9);
                    assert!(ratio <= 0.5 + p.sigma_z() / sx2 * c + 1e-9);
                    assert!(sol.residual <= 1e-9 * lambda.max(1.0));
                }
            }
        }
    }

    #[test]
    fn heterogeneous_map_examples() {
        let p = ten(0.7);
        let tau = 0.4;
        let h = PolicyProfile::homogeneous(10, tau).unwrap();
        let out = br_map_heterogeneous(&h, &p).unwrap();
        let br = best_response_threshold(tau, &p).unwrap();
        for &v in out.thresholds() {
            assert_abs_diff_eq!(v, br, epsilon = 1e-10);
        }

        let ne = ne_threshold(&p).unwrap().tau_star;
        let fixed = br_map_heterogeneous(&PolicyProfile::homogeneous(10, ne).unwrap(), &p).unwrap();
        for &v in fixed.thresholds() {
            assert_abs_diff_eq!(v, ne, epsilon = 1e-6);
        }

        let q = params(AgentCount::Finite(3), 1.0, 1.0, 0.5);
        let taus = [0.2, 0.5, 0.8];
        let out = br_map_heterogeneous(&PolicyProfile::new(taus.to_vec()).unwrap(), &q).unwrap();
        let expected = [0.605_083_501_661_659_9, 0.553_951_071_343_407_5, 0.505_581_470_462_221_1];
        for i in 0..3 {
            let scan = scan_roots(
                |x| {
                    let s: f64 = (0..3).filter(|&j| j != i).map(|j| pi_closed(x, taus[j], &q)).sum();
                    s / 3.0 - q.alpha() * x
                },
                -1.0,
                3.0,
            );
            assert_eq!(scan.len(), 1);
            assert_abs_diff_eq!(out.thresholds()[i], scan[0], epsilon = 1e-8);
            assert_abs_diff_eq!(out.thresholds()[i], expected[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn heterogeneous_map_requires_matching_length() {
        let p = ten(1.0);
        assert!(br_map_heterogeneous(&PolicyProfile::homogeneous(3, 0.1).unwrap(), &p).is_err());
        let inf = params(AgentCount::Infinite, 1.0, 1.0, 1.0);
        assert!(br_map_heterogeneous(&PolicyProfile::homogeneous(3, 0.1).unwrap(), &inf).is_err());
    }

    #[test]
    fn closed_form_thresholds() {
        assert_eq!(oracle_threshold(&params(AgentCount::Infinite, 1.0, 1.0, 1.0)), 0.5);
        assert_abs_diff_eq!(oracle_threshold(&ten(1.0)), 0.45, epsilon = 1e-15);
        assert_eq!(oracle_threshold(&params(AgentCount::Finite(2), 4.0, 1.0, 1.0)), 1.0);

        assert_eq!(ce_threshold(&ten(0.0)), oracle_threshold(&ten(0.0)));
        assert_eq!(ce_threshold(&params(AgentCount::Infinite, 1.0, 1.0, 1.0)), 1.0);
        assert_abs_diff_eq!(
            ce_threshold(&params(AgentCount::Finite(10), 2.0, 1.0, 3.0)),
            3.6,
            epsilon = 1e-14
        );
    }

    #[test]
    fn thresholds_scale_with_lambda() {
        let p = params(AgentCount::Finite(7), 1.0, 1.5, 0.8);
        for s in [0.25, 2.0, 3.0] {
            let q = p.with_lambda(s).unwrap();
            assert_abs_diff_eq!(oracle_threshold(&q), s * oracle_threshold(&p), epsilon = 1e-14);
            assert_abs_diff_eq!(ce_threshold(&q), s * ce_threshold(&p), epsilon = 1e-14);
            let t = ne_threshold(&q).unwrap().tau_star;
            let resid = q.br_coeff() * belief_pi(t, t, &q).unwrap() - q.alpha() * t;
            assert!(resid.abs() <= 1e-9 * s.max(1.0));
        }
    }

    #[test]
    fn single_crossing_of_best_response_equation() {
        for sz2 in [0.05, 1.0, 3.0] {
            let p = ten(sz2);
            let c = p.br_coeff();
            let a = p.alpha();
            let tau = 0.7;
            let (lo, hi) = (-c / a, 2.0 * c / a);
            let vals: Vec<f64> = (0..10_000)
                .map(|k| {
                    let x = lo + (hi - lo) * k as f64 / 9_999.0;
                    c * belief_pi(x, tau, &p).unwrap() - a * x
                })
                .collect();
            let changes = vals.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
            assert_eq!(changes, 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn belief_strictly_decreasing_in_signal(
            tau in -2.0f64..3.0,
            sx2 in 0.2f64..5.0,
            sz2 in 0.05f64..4.0,
            start in -2.0f64..2.0,
        ) {
            let p = params(AgentCount::Finite(10), 1.0, sx2, sz2);
            let mut prev = belief_pi(start, tau, &p).unwrap();
            for k in 1..40 {
                let v = belief_pi(start + 0.05 * k as f64, tau, &p).unwrap();
                prop_assert!(v < prev + 1e-10);
                prev = v;
            }
        }

        #[test]
        fn belief_increasing_in_threshold(
            xi in -2.0f64..3.0,
            sz2 in 0.05f64..4.0,
        ) {
            let p = params(AgentCount::Finite(4), 1.0, 1.0, sz2);
            let a = belief_pi(xi, 0.0, &p).unwrap();
            let b = belief_pi(xi, 0.5, &p).unwrap();
            prop_assert!(b > a - 1e-10);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
