//! The homogeneous binary-action coordination game.
//!
//! Payoffs follow `u_i = a_i · (b(#engaged others) − x)`: action `0` is the
//! safe action (payoff zero), action `1` the risky one. Because the payoff
//! only depends on *how many* others engage, it can be written as a function
//! of the opponents' empirical mass vector.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::bisect_bracket;

/// Number of agents, possibly the mean-field limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentCount {
    Finite(u64),
    Infinite,
}

impl AgentCount {
    pub fn finite(self) -> Option<u64> {
        match self {
            AgentCount::Finite(n) => Some(n),
            AgentCount::Infinite => None,
        }
    }

    /// `(N − 1) / N`, or `1` in the limit.
    pub fn others_fraction(self) -> f64 {
        match self {
            AgentCount::Finite(n) => (n as f64 - 1.0) / n as f64,
            AgentCount::Infinite => 1.0,
        }
    }
}

impl fmt::Display for AgentCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentCount::Finite(n) => write!(f, "{n}"),
            AgentCount::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for AgentCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
            return Ok(AgentCount::Infinite);
        }
        t.parse::<u64>().map(AgentCount::Finite).map_err(|_| {
            Error::InvalidArgument(format!("agent count must be an integer or \"inf\", got {s:?}"))
        })
    }
}

/// Scalar model parameters.
///
/// The state is `X ~ N(0, σX²)` and agent `i` observes `Yᵢ = X + Zᵢ` with
/// independent `Zᵢ ~ N(0, σZ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    n_agents: AgentCount,
    lambda: f64,
    sigma_x_sq: f64,
    sigma_z_sq: f64,
}

impl GameParams {
    pub fn new(n_agents: AgentCount, lambda: f64, sigma_x_sq: f64, sigma_z_sq: f64) -> Result<Self> {
        if let AgentCount::Finite(n) = n_agents {
            if n < 2 {
                return Err(Error::InvalidParams(format!("n_agents must be >= 2, got {n}")));
            }
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!("lambda must be positive and finite, got {lambda}")));
        }
        if !(sigma_x_sq > 0.0) || !sigma_x_sq.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma_x_sq must be positive and finite, got {sigma_x_sq}"
            )));
        }
        if !(sigma_z_sq >= 0.0) || !sigma_z_sq.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma_z_sq must be nonnegative and finite, got {sigma_z_sq}"
            )));
        }
        Ok(Self { n_agents, lambda, sigma_x_sq, sigma_z_sq })
    }

    pub fn n_agents(&self) -> AgentCount {
        self.n_agents
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma_x_sq(&self) -> f64 {
        self.sigma_x_sq
    }

    pub fn sigma_z_sq(&self) -> f64 {
        self.sigma_z_sq
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x_sq.sqrt()
    }

    pub fn sigma_z(&self) -> f64 {
        self.sigma_z_sq.sqrt()
    }

    /// MMSE gain `σX² / (σX² + σZ²)`.
    pub fn alpha(&self) -> f64 {
        self.sigma_x_sq / (self.sigma_x_sq + self.sigma_z_sq)
    }

    /// Posterior variance of the state given one signal, `α·σZ²`.
    pub fn sigma_tilde_sq(&self) -> f64 {
        self.alpha() * self.sigma_z_sq
    }

    /// `λ (N − 1) / N`, or `λ` for infinitely many agents.
    pub fn br_coeff(&self) -> f64 {
        self.lambda * self.n_agents.others_fraction()
    }

    pub fn with_sigma_z_sq(&self, sigma_z_sq: f64) -> Result<Self> {
        Self::new(self.n_agents, self.lambda, self.sigma_x_sq, sigma_z_sq)
    }

    pub fn with_sigma_x_sq(&self, sigma_x_sq: f64) -> Result<Self> {
        Self::new(self.n_agents, self.lambda, sigma_x_sq, self.sigma_z_sq)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n_agents, lambda, self.sigma_x_sq, self.sigma_z_sq)
    }

    pub fn with_n_agents(&self, n_agents: AgentCount) -> Result<Self> {
        Self::new(n_agents, self.lambda, self.sigma_x_sq, self.sigma_z_sq)
    }

    pub(crate) fn require_noisy(&self) -> Result<()> {
        if self.sigma_z_sq > 0.0 {
            Ok(())
        } else {
            Err(Error::NoiselessDegenerate)
        }
    }

    pub(crate) fn require_finite_n(&self) -> Result<u64> {
        self.n_agents
            .finite()
            .ok_or_else(|| Error::InvalidArgument("operation needs a finite number of agents".into()))
    }
}

/// The two actions of the binary game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Safe = 0,
    Risky = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Action::Safe),
            1 => Ok(Action::Risky),
            _ => Err(Error::InvalidArgument(format!("binary action index must be 0 or 1, got {i}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Action::Safe => Action::Risky,
            Action::Risky => Action::Safe,
        }
    }
}

type BenefitFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const MONOTONE_GRID: usize = 1000;
const MONOTONE_SLACK: f64 = 1e-12;

/// The benefit function `b` on `[0, N − 1]`.
#[derive(Clone)]
pub enum BenefitSpec {
    /// `b(ξ) = λ ξ / N`.
    Linear { lambda: f64, n: u64 },
    /// A validated nonnegative, strictly increasing function.
    Custom(CustomBenefit),
}

/// Opaque holder for a validated custom benefit; build with [`BenefitSpec::custom`].
#[derive(Clone)]
pub struct CustomBenefit {
    f: BenefitFn,
    domain_max: f64,
}

impl fmt::Debug for BenefitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenefitSpec::Linear { lambda, n } => {
                f.debug_struct("Linear").field("lambda", lambda).field("n", n).finish()
            }
            BenefitSpec::Custom(c) => {
                f.debug_struct("Custom").field("domain_max", &c.domain_max).finish_non_exhaustive()
            }
        }
    }
}

impl BenefitSpec {
    /// The linear benefit matching `params`; requires a finite `N`.
    pub fn linear(params: &GameParams) -> Result<Self> {
        let n = params.require_finite_n()?;
        Ok(BenefitSpec::Linear { lambda: params.lambda(), n })
    }

    /// Wraps `f` after checking on a 1000-point grid over `[0, n − 1]` that
    /// it is finite, nonnegative and strictly increasing.
    pub fn custom<F>(n: u64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if n < 2 {
            return Err(Error::InvalidBenefit(format!("domain [0, N-1] needs N >= 2, got {n}")));
        }
        let domain_max = (n - 1) as f64;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..MONOTONE_GRID {
            let x = domain_max * k as f64 / (MONOTONE_GRID - 1) as f64;
            let v = f(x);
            if !v.is_finite() || v < -MONOTONE_SLACK {
                return Err(Error::InvalidBenefit(format!("b({x}) = {v} is not a finite nonnegative value")));
            }
            if let Some((px, pv)) = prev {
                if v - pv <= MONOTONE_SLACK {
                    return Err(Error::InvalidBenefit(format!(
                        "b is not strictly increasing: b({px}) = {pv}, b({x}) = {v}"
                    )));
                }
            }
            prev = Some((x, v));
        }
        Ok(BenefitSpec::Custom(CustomBenefit { f: Arc::new(f), domain_max }))
    }

    pub fn domain_max(&self) -> f64 {
        match self {
            BenefitSpec::Linear { n, .. } => (*n - 1) as f64,
            BenefitSpec::Custom(c) => c.domain_max,
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            BenefitSpec::Linear { lambda, n } => lambda * xi / *n as f64,
            BenefitSpec::Custom(c) => (c.f)(xi),
        }
    }
}

/// Empirical distribution of a profile over `M` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    masses: Vec<f64>,
    provenance: usize,
}

impl MassVector {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Number of agents the masses were computed from.
    pub fn provenance(&self) -> usize {
        self.provenance
    }

    pub fn action_count(&self) -> usize {
        self.masses.len()
    }

    pub fn get(&self, action: usize) -> f64 {
        self.masses[action]
    }

    /// Binary mass vector of `d` agents of which `engaged` play the risky action.
    pub fn binary(engaged: usize, d: usize) -> Result<Self> {
        if d == 0 || engaged > d {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= engaged <= d, d >= 1; got {engaged} of {d}"
            )));
        }
        let g1 = engaged as f64 / d as f64;
        Ok(Self { masses: vec![(d - engaged) as f64 / d as f64, g1], provenance: d })
    }
}

/// Proportion of entries of `actions` equal to each of `0..action_count`.
///
/// ```
/// use ggcoord::game::empirical_mass;
/// let g = empirical_mass(&[1, 0, 1], 2).unwrap();
/// assert_eq!(g.masses(), &[1.0 / 3.0, 2.0 / 3.0]);
/// ```
pub fn empirical_mass(actions: &[usize], action_count: usize) -> Result<MassVector> {
    if actions.is_empty() {
        return Err(Error::InvalidArgument("empirical mass of an empty profile".into()));
    }
    if action_count == 0 {
        return Err(Error::InvalidArgument("action_count must be positive".into()));
    }
    let mut counts = vec![0usize; action_count];
    for &a in actions {
        if a >= action_count {
            return Err(Error::InvalidArgument(format!(
                "action {a} out of range for {action_count} actions"
            )));
        }
        counts[a] += 1;
    }
    let d = actions.len();
    let masses = counts.into_iter().map(|c| c as f64 / d as f64).collect();
    Ok(MassVector { masses, provenance: d })
}

/// Payoff `a_i · (b((N − 1) g₁) − x)` of one agent facing opponent mass `g`.
pub fn utility(
    a_i: Action,
    mass_minus_i: &MassVector,
    x: f64,
    b: &BenefitSpec,
    params: &GameParams,
) -> Result<f64> {
    let n = params.require_finite_n()?;
    if mass_minus_i.action_count() != 2 {
        return Err(Error::InvalidArgument(format!(
            "utility needs a binary mass vector, got {} actions",
            mass_minus_i.action_count()
        )));
    }
    if mass_minus_i.provenance() as u64 != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "opponent mass must come from N-1 = {} agents, got {}",
            n - 1,
            mass_minus_i.provenance()
        )));
    }
    Ok(match a_i {
        Action::Safe => 0.0,
        Action::Risky => b.eval((n - 1) as f64 * mass_minus_i.get(1)) - x,
    })
}

/// An action that is optimal once at least a `cutoff` share of the others
/// (and a plurality) play it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatingAction {
    pub action: Action,
    pub cutoff: f64,
}

const CUTOFF_TOL: f64 = 1e-10;

/// Coordinating actions for state `x`.
///
/// Below `b(0)` engaging dominates, above `b(N − 1)` staying safe does, and
/// in between both actions coordinate with their own cutoffs.
pub fn coordinating_action_set(
    x: f64,
    b: &BenefitSpec,
    params: &GameParams,
) -> Result<Vec<CoordinatingAction>> {
    let n = params.require_finite_n()?;
    if (b.domain_max() - (n - 1) as f64).abs() > 0.0 {
        return Err(Error::InvalidBenefit(format!(
            "benefit domain [0, {}] does not match N - 1 = {}",
            b.domain_max(),
            n - 1
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("state must be finite, got {x}")));
    }
    let top = b.domain_max();
    let (b_lo, b_hi) = (b.eval(0.0), b.eval(top));
    if !(b_hi > b_lo) {
        return Err(Error::InvalidBenefit(format!("b(0) = {b_lo} is not below b(N-1) = {b_hi}")));
    }
    if x <= b_lo {
        return Ok(vec![CoordinatingAction { action: Action::Risky, cutoff: 0.0 }]);
    }
    if x >= b_hi {
        return Ok(vec![CoordinatingAction { action: Action::Safe, cutoff: 0.0 }]);
    }
    // Smallest q with b(q (N-1)) >= x: take the upper end of the final bracket.
    let (_, c1) = bisect_bracket(|q| b.eval(q * top) - x, 0.0, 1.0, CUTOFF_TOL)?;
    // Largest q with b((1 - q)(N-1)) >= x: the lower end.
    let (c0, _) = bisect_bracket(|q| b.eval((1.0 - q) * top) - x, 0.0, 1.0, CUTOFF_TOL)?;
    Ok(vec![
        CoordinatingAction { action: Action::Risky, cutoff: c1 },
        CoordinatingAction { action: Action::Safe, cutoff: c0 },
    ])
}

/// Largest `N` for which exhaustive profile enumeration is allowed.
pub const MAX_ENUMERATION_AGENTS: u64 = 12;

const COORDINATION_SLACK: f64 = 1e-12;

/// A violation of the coordination property.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationCounterexample {
    pub x: f64,
    pub action: CoordinatingAction,
    pub opponent_profile: Vec<usize>,
    pub coordinated_payoff: f64,
    pub deviation_payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationReport {
    pub passed: bool,
    /// Number of (state, action, profile) triples that met the majority
    /// condition and were checked.
    pub checks: usize,
    pub counterexample: Option<CoordinationCounterexample>,
}

/// Exhaustively checks that playing the coordinating action is a best reply
/// whenever it is the plurality action with share at least its cutoff.
pub fn verify_coordination_property(
    b: &BenefitSpec,
    params: &GameParams,
    x_grid: &[f64],
) -> Result<CoordinationReport> {
    let n = params.require_finite_n()?;
    if n > MAX_ENUMERATION_AGENTS {
        return Err(Error::ResourceLimit(format!(
            "exhaustive enumeration supports N <= {MAX_ENUMERATION_AGENTS}, got {n}"
        )));
    }
    let d = (n - 1) as usize;
    let mut checks = 0;
    let mut profile = vec![0usize; d];
    for &x in x_grid {
        for ca in coordinating_action_set(x, b, params)? {
            let star = ca.action.index();
            for bits in 0u32..(1u32 << d) {
                for (j, slot) in profile.iter_mut().enumerate() {
                    *slot = ((bits >> j) & 1) as usize;
                }
                let g = empirical_mass(&profile, 2)?;
                let share = g.get(star);
                let plurality = g.masses().iter().all(|&m| share >= m);
                if !(plurality && share >= ca.cutoff) {
                    continue;
                }
                checks += 1;
                let coordinated = utility(ca.action, &g, x, b, params)?;
                let deviation = utility(ca.action.other(), &g, x, b, params)?;
                if coordinated < deviation - COORDINATION_SLACK {
                    return Ok(CoordinationReport {
                        passed: false,
                        checks,
                        counterexample: Some(CoordinationCounterexample {
                            x,
                            action: ca,
                            opponent_profile: profile.clone(),
                            coordinated_payoff: coordinated,
                            deviation_payoff: deviation,
                        }),
                    });
                }
            }
        }
    }
    Ok(CoordinationReport { passed: true, checks, counterexample: None })
}

/// A threshold per agent; agent `i` engages iff its signal is at most `τᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    thresholds: Vec<f64>,
}

impl PolicyProfile {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidArgument("policy profile needs at least one agent".into()));
        }
        if let Some(t) = thresholds.iter().find(|t| t.is_nan()) {
            return Err(Error::InvalidArgument(format!("threshold {t} is not a number")));
        }
        Ok(Self { thresholds })
    }

    pub fn homogeneous(n: usize, tau: f64) -> Result<Self> {
        Self::new(vec![tau; n])
    }

    /// Checks the profile length against `params`.
    pub fn for_params(thresholds: Vec<f64>, params: &GameParams) -> Result<Self> {
        let n = params.require_finite_n()?;
        if thresholds.len() as u64 != n {
            return Err(Error::InvalidArgument(format!(
                "profile has {} thresholds but N = {n}",
                thresholds.len()
            )));
        }
        Self::new(thresholds)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.thresholds.windows(2).all(|w| w[0] == w[1])
    }

    pub fn action(&self, agent: usize, signal: f64) -> Action {
        if signal <= self.thresholds[agent] {
            Action::Risky
        } else {
            Action::Safe
        }
    }
}
