//! Coordination efficiency, expected utility and the Fano ceiling.
//!
//! An agent *coordinates* when its action equals the action an omniscient
//! agent would take, `A* = 1(X ≤ τ_oracle)`. For a homogeneous threshold
//! profile the efficiency `ρ` is one agent's probability of coordinating.
//! Any policy, threshold or not, is bounded by Fano's inequality:
//!
//! ```text
//! ρ ≤ 1 − h⁻¹( H(A* | Y) ),   H(A* | Y) = H(A*) − H(Y) + H(Y | A*)
//! ```
//!
//! State integrals run over `±8σX` with composite Simpson panels. Panel
//! boundaries are placed at the oracle threshold (where the miscoordination
//! probability jumps) and around the policy threshold when the channel is
//! sharp enough to make the integrand steep there.

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::numerics::{
    binary_entropy, composite_rule, differential_entropy, inverse_binary_entropy, normal_pdf, phi_cdf,
};

/// Half-width of every state/signal integration range, in standard deviations.
pub const INTEGRATION_SIGMAS: f64 = 8.0;
/// Nodes across the whole integration range.
pub const INTEGRATION_NODES: usize = 4001;
const MIN_PANEL_INTERVALS: usize = 64;
/// Half-width, in channel standard deviations, of the refined panel placed
/// around steep features.
const FEATURE_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfficiencyMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub rho: f64,
    pub miscoordination_integral: f64,
    pub oracle_tau: f64,
    pub policy_tau: f64,
    pub method: EfficiencyMethod,
    /// Zero for quadrature.
    pub std_error: f64,
}

/// Which side of the oracle threshold the state lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `X ≤ τ_oracle`: the oracle engages.
    Below,
    /// `X > τ_oracle`: the oracle stays safe.
    Above,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    nodes: usize,
}

/// Splits `[lo, hi]` at the given interior breakpoints and shares roughly
/// `total_nodes − 1` Simpson intervals between the panels by length.
fn panels(lo: f64, hi: f64, breaks: &[f64], total_nodes: usize) -> Vec<Panel> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let width = hi - lo;
    let budget = (total_nodes - 1) as f64;
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let share = (budget * (w[1] - w[0]) / width).round() as usize;
            let mut intervals = share.max(MIN_PANEL_INTERVALS);
            intervals += intervals % 2;
            Panel { lo: w[0], hi: w[1], nodes: intervals + 1 }
        })
        .collect()
}

fn feature_breaks(centre: f64, half_width: f64) -> [f64; 3] {
    [centre - half_width, centre, centre + half_width]
}

/// State-range panels for integrands that jump at `tau_oracle` and change
/// on the scale `σZ` around `tau`.
fn state_panels(tau: f64, tau_oracle: f64, params: &GameParams) -> Vec<Panel> {
    let half = INTEGRATION_SIGMAS * params.sigma_x();
    let mut breaks = vec![tau_oracle];
    breaks.extend(feature_breaks(tau, FEATURE_SIGMAS * params.sigma_z()));
    panels(-half, half, &breaks, INTEGRATION_NODES)
}

fn integrate<F: Fn(f64) -> f64>(f: F, panel: &Panel) -> Result<f64> {
    composite_rule(|x| Ok(f(x)), panel.lo, panel.hi, panel.nodes)
}

#[inline]
fn engage_prob(x: f64, tau: f64, sigma_z: f64) -> f64 {
    phi_cdf((tau - x) / sigma_z)
}

#[inline]
fn miscoordination_on_side(x: f64, tau: f64, sigma_z: f64, side: Side) -> f64 {
    let p = engage_prob(x, tau, sigma_z);
    match side {
        Side::Below => 1.0 - p,
        Side::Above => p,
    }
}

/// `P(agent's action ≠ oracle action | X = x)` for a threshold `tau`.
pub fn miscoordination_prob_given_x(x: f64, tau: f64, tau_oracle: f64, params: &GameParams) -> Result<f64> {
    params.require_noisy()?;
    let side = if x <= tau_oracle { Side::Below } else { Side::Above };
    Ok(miscoordination_on_side(x, tau, params.sigma_z(), side))
}

/// Coordination efficiency of the homogeneous threshold policy `tau`.
///
/// ```
/// use ggcoord::analysis::coordination_efficiency;
/// use ggcoord::game::{AgentCount, GameParams};
/// let p = GameParams::new(AgentCount::Infinite, 1.0, 1.0, 1e-8).unwrap();
/// let report = coordination_efficiency(0.5, 0.5, &p).unwrap();
/// assert!(report.rho > 0.999);
/// ```
pub fn coordination_efficiency(tau: f64, tau_oracle: f64, params: &GameParams) -> Result<EfficiencyReport> {
    params.require_noisy()?;
    if !tau.is_finite() || !tau_oracle.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "thresholds must be finite, got tau = {tau}, tau_oracle = {tau_oracle}"
        )));
    }
    let sz = params.sigma_z();
    let sx2 = params.sigma_x_sq();
    let mut miss = 0.0;
    for panel in state_panels(tau, tau_oracle, params) {
        let side = if panel.hi <= tau_oracle { Side::Below } else { Side::Above };
        miss += integrate(|x| miscoordination_on_side(x, tau, sz, side) * normal_pdf(x, 0.0, sx2), &panel)?;
    }
    let miss = miss.clamp(0.0, 1.0);
    Ok(EfficiencyReport {
        rho: 1.0 - miss,
        miscoordination_integral: miss,
        oracle_tau: tau_oracle,
        policy_tau: tau,
        method: EfficiencyMethod::Quadrature,
        std_error: 0.0,
    })
}

/// Expected payoff of one agent when everybody uses threshold `tau`.
///
/// Given the state, actions are independent Bernoulli(`p(x)`), `p(x) =
/// Φ((τ − x)/σZ)`, so `E[u] = ∫ (λ(N−1)/N · p² − x p) f_X`.
pub fn expected_utility(tau: f64, params: &GameParams) -> Result<f64> {
    params.require_noisy()?;
    if !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be finite, got {tau}")));
    }
    let sz = params.sigma_z();
    let sx2 = params.sigma_x_sq();
    let c = params.br_coeff();
    let half = INTEGRATION_SIGMAS * params.sigma_x();
    let grid = panels(-half, half, &feature_breaks(tau, FEATURE_SIGMAS * sz), INTEGRATION_NODES);
    let mut total = 0.0;
    for panel in grid {
        total += integrate(
            |x| {
                let p = engage_prob(x, tau, sz);
                (c * p * p - x * p) * normal_pdf(x, 0.0, sx2)
            },
            &panel,
        )?;
    }
    Ok(total)
}

/// Whether `ρ(τ)` sampled on `tau_grid` rises then falls (up to `1e-9`).
///
/// A diagnostic only: callers report a `false` rather than fail.
pub fn efficiency_is_unimodal(tau_grid: &[f64], tau_oracle: f64, params: &GameParams) -> Result<bool> {
    let rho = tau_grid
        .iter()
        .map(|&t| coordination_efficiency(t, tau_oracle, params).map(|r| r.rho))
        .collect::<Result<Vec<_>>>()?;
    const SLACK: f64 = 1e-9;
    let mut falling = false;
    for w in rho.windows(2) {
        if w[1] < w[0] - SLACK {
            falling = true;
        } else if falling && w[1] > w[0] + SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

fn side_probability(side: Side, tau_oracle: f64, params: &GameParams) -> f64 {
    let z = tau_oracle / params.sigma_x();
    match side {
        Side::Below => phi_cdf(z),
        Side::Above => phi_cdf(-z),
    }
}

/// Density of the signal conditioned on the side of the oracle threshold.
///
/// Uses `X | Y = y ~ N(αy, σ̃²)`, so that
/// `f(y | side) = f_Y(y) · Φ(±(τ_oracle − αy)/σ̃) / P(side)`.
pub fn cond_density_y_given_side(y: f64, side: Side, tau_oracle: f64, params: &GameParams) -> Result<f64> {
    params.require_noisy()?;
    let mass = side_probability(side, tau_oracle, params);
    if !(mass > 0.0) {
        return Err(Error::NumericalDomain(format!(
            "conditioning event {side:?} of tau_oracle = {tau_oracle} has zero probability"
        )));
    }
    Ok(cond_density_unchecked(y, side, tau_oracle, mass, params))
}

fn cond_density_unchecked(y: f64, side: Side, tau_oracle: f64, mass: f64, params: &GameParams) -> f64 {
    let alpha = params.alpha();
    let st = params.sigma_tilde_sq().sqrt();
    let z = (tau_oracle - alpha * y) / st;
    let tail = match side {
        Side::Below => phi_cdf(z),
        Side::Above => phi_cdf(-z),
    };
    normal_pdf(y, 0.0, params.sigma_x_sq() + params.sigma_z_sq()) * tail / mass
}

/// All terms of the entropy decomposition together with the resulting bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FanoReport {
    pub tau_oracle: f64,
    /// `P(A* = 1) = P(X ≤ τ_oracle)`.
    pub p_astar_one: f64,
    /// `H(A*)` in bits.
    pub h_astar: f64,
    /// Differential entropy of the signal.
    pub h_y: f64,
    pub h_y_given_astar: f64,
    /// `H(A* | Y)` clamped to `[0, H(A*)]`.
    pub h_astar_given_y: f64,
    /// `H(A*) − H(Y) + H(Y | A*)` before clamping.
    pub h_astar_given_y_unclamped: f64,
    /// `1 − h⁻¹(H(A* | Y))`.
    pub rho_upper_bound: f64,
}

/// Conditional differential entropy `H(Y | side)` on panels that resolve the
/// edge of the conditional density near `y = τ_oracle/α`.
fn conditional_signal_entropy(side: Side, tau_oracle: f64, mass: f64, params: &GameParams) -> Result<f64> {
    let sy = (params.sigma_x_sq() + params.sigma_z_sq()).sqrt();
    let half = INTEGRATION_SIGMAS * sy;
    let edge = tau_oracle / params.alpha();
    let st = params.sigma_tilde_sq().sqrt();
    let grid = panels(-half, half, &feature_breaks(edge, FEATURE_SIGMAS * st), INTEGRATION_NODES);
    let mut total = 0.0;
    for panel in grid {
        total += differential_entropy(
            |y| cond_density_unchecked(y, side, tau_oracle, mass, params),
            panel.lo,
            panel.hi,
            panel.nodes,
        )?;
    }
    Ok(total)
}

/// Upper bound on the coordination efficiency of any homogeneous policy.
///
/// ```
/// use ggcoord::analysis::fano_bound;
/// use ggcoord::game::{AgentCount, GameParams};
/// let p = GameParams::new(AgentCount::Infinite, 1.0, 1.0, 1.0).unwrap();
/// let report = fano_bound(0.5, &p).unwrap();
/// assert!(report.rho_upper_bound > 0.5 && report.rho_upper_bound < 1.0);
/// ```
pub fn fano_bound(tau_oracle: f64, params: &GameParams) -> Result<FanoReport> {
    params.require_noisy()?;
    if !tau_oracle.is_finite() {
        return Err(Error::InvalidArgument(format!("tau_oracle must be finite, got {tau_oracle}")));
    }
    let p1 = side_probability(Side::Below, tau_oracle, params);
    let p0 = side_probability(Side::Above, tau_oracle, params);
    let h_astar = binary_entropy(p1)?;
    let h_y = 0.5
        * (2.0 * std::f64::consts::PI * std::f64::consts::E * (params.sigma_x_sq() + params.sigma_z_sq()))
            .log2();
    let mut h_y_given_astar = 0.0;
    for (side, mass) in [(Side::Below, p1), (Side::Above, p0)] {
        if mass > 0.0 {
            h_y_given_astar += mass * conditional_signal_entropy(side, tau_oracle, mass, params)?;
        }
    }
    let raw = h_astar - h_y + h_y_given_astar;
    let clamped = raw.clamp(0.0, h_astar);
    let rho_upper_bound = 1.0 - inverse_binary_entropy(clamped)?;
    Ok(FanoReport {
        tau_oracle,
        p_astar_one: p1,
        h_astar,
        h_y,
        h_y_given_astar,
        h_astar_given_y: clamped,
        h_astar_given_y_unclamped: raw,
        rho_upper_bound,
    })
}
