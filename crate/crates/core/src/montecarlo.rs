//! Seeded forward simulation of the game.
//!
//! Draws are produced in fixed blocks of [`BLOCK_SIZE`]. Block `k` uses a
//! ChaCha8 generator seeded with `seed_from_u64(seed)` on stream `k`, so the
//! blocks can run on any number of threads and the merged report does not
//! change. Per-block statistics are merged in block order.
//!
//! Agent 1's signal and action are always sampled. The others are sampled one
//! by one when there are at most [`EXPLICIT_OTHERS_LIMIT`] of them or when the
//! profile is heterogeneous; otherwise the number of engaging others is drawn
//! from its exact conditional law, `Binomial(N − 1, Φ((τ − x)/σZ))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{utility, Action, AgentCount, BenefitSpec, GameParams, MassVector, PolicyProfile};
use crate::numerics::phi_cdf;

pub const BLOCK_SIZE: u64 = 1 << 16;
pub const EXPLICIT_OTHERS_LIMIT: u64 = 64;
pub const DEFAULT_AGENTS_EFFECTIVE: u64 = 10_000;
/// Written into every report.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9); seed_from_u64(seed), stream = block index, 65536 draws per block";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_samples: u64,
    /// Agent count used in place of an infinite population.
    pub n_agents_effective: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_samples: u64, seed: u64) -> Result<Self> {
        Self { n_samples, n_agents_effective: DEFAULT_AGENTS_EFFECTIVE, seed }.validated()
    }

    pub fn with_agents_effective(self, n: u64) -> Result<Self> {
        Self { n_agents_effective: n, ..self }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
        }
        if self.n_agents_effective < 2 {
            return Err(Error::InvalidArgument("n_agents_effective must be at least 2".into()));
        }
        Ok(self)
    }
}

/// Policy used by every simulated agent.
#[derive(Debug, Clone, PartialEq)]
pub enum SimPolicy {
    Homogeneous(f64),
    Profile(PolicyProfile),
}

impl From<f64> for SimPolicy {
    fn from(tau: f64) -> Self {
        SimPolicy::Homogeneous(tau)
    }
}

impl From<PolicyProfile> for SimPolicy {
    fn from(p: PolicyProfile) -> Self {
        SimPolicy::Profile(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub empirical_rho: f64,
    pub rho_std_error: f64,
    pub empirical_utility: f64,
    pub utility_std_error: f64,
    pub n_samples: u64,
    /// Population size actually simulated.
    pub n_agents: u64,
    pub rng_algorithm: &'static str,
}

/// One simulated state draw, seen from agent 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub x: f64,
    pub y1: f64,
    pub action1: Action,
    pub engaged_others: u64,
    pub utility: f64,
    pub coordinated: bool,
}

struct Setup {
    n: u64,
    params: GameParams,
    benefit: BenefitSpec,
    thresholds: Option<Vec<f64>>,
    tau: f64,
    tau_oracle: f64,
    sampled_others: bool,
}

impl Setup {
    fn new(policy: &SimPolicy, tau_oracle: f64, params: &GameParams, cfg: &SimConfig) -> Result<Self> {
        params.require_noisy()?;
        let cfg = cfg.validated()?;
        if tau_oracle.is_nan() {
            return Err(Error::InvalidArgument("tau_oracle is not a number".into()));
        }
        let n = match params.n_agents() {
            AgentCount::Finite(n) => n,
            AgentCount::Infinite => cfg.n_agents_effective,
        };
        let params = params.with_n_agents(AgentCount::Finite(n))?;
        let benefit = BenefitSpec::linear(&params)?;
        let (thresholds, tau) = match policy {
            SimPolicy::Homogeneous(t) if t.is_nan() => {
                return Err(Error::InvalidArgument("threshold is not a number".into()))
            }
            SimPolicy::Homogeneous(t) => (None, *t),
            SimPolicy::Profile(p) => {
                if p.len() as u64 != n {
                    return Err(Error::InvalidArgument(format!(
                        "profile has {} thresholds but {n} agents are simulated",
                        p.len()
                    )));
                }
                if p.is_homogeneous() {
                    (None, p.thresholds()[0])
                } else {
                    (Some(p.thresholds().to_vec()), f64::NAN)
                }
            }
        };
        let sampled_others = thresholds.is_some() || n - 1 <= EXPLICIT_OTHERS_LIMIT;
        Ok(Self { n, params, benefit, thresholds, tau, tau_oracle, sampled_others })
    }

    fn threshold(&self, agent: usize) -> f64 {
        match &self.thresholds {
            Some(t) => t[agent],
            None => self.tau,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Draw> {
        let sx = self.params.sigma_x();
        let sz = self.params.sigma_z();
        let x = sx * rng.sample::<f64, _>(StandardNormal);
        let y1 = x + sz * rng.sample::<f64, _>(StandardNormal);
        let action1 = if y1 <= self.threshold(0) { Action::Risky } else { Action::Safe };
        let others = self.n - 1;
        let engaged_others = if self.sampled_others {
            (1..self.n as usize)
                .filter(|&j| x + sz * rng.sample::<f64, _>(StandardNormal) <= self.threshold(j))
                .count() as u64
        } else {
            let p = phi_cdf((self.tau - x) / sz);
            Binomial::new(others, p)
                .map_err(|e| Error::NumericalDomain(format!("binomial({others}, {p}): {e}")))?
                .sample(rng)
        };
        let mass = MassVector::binary(engaged_others as usize, others as usize)?;
        let utility = utility(action1, &mass, x, &self.benefit, &self.params)?;
        let oracle = if x <= self.tau_oracle { Action::Risky } else { Action::Safe };
        Ok(Draw { x, y1, action1, engaged_others, utility, coordinated: action1 == oracle })
    }

    fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        rng
    }
}

fn block_len(total: u64, block: u64) -> u64 {
    (total - block * BLOCK_SIZE).min(BLOCK_SIZE)
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0)).sqrt() / self.n.sqrt()
        }
    }
}

/// Empirical coordination efficiency and agent-1 utility.
///
/// ```
/// use ggcoord::game::{AgentCount, GameParams};
/// use ggcoord::montecarlo::{simulate, SimConfig};
/// let p = GameParams::new(AgentCount::Finite(10), 1.0, 1.0, 1.0).unwrap();
/// let cfg = SimConfig::new(10_000, 7).unwrap();
/// let a = simulate(1.25, 0.45, &p, &cfg).unwrap();
/// let b = simulate(1.25, 0.45, &p, &cfg).unwrap();
/// assert_eq!(a, b);
/// assert!(a.empirical_rho > 0.5);
/// ```
pub fn simulate(
    policy: impl Into<SimPolicy>,
    tau_oracle: f64,
    params: &GameParams,
    cfg: &SimConfig,
) -> Result<SimReport> {
    let setup = Setup::new(&policy.into(), tau_oracle, params, cfg)?;
    let blocks = cfg.n_samples.div_ceil(BLOCK_SIZE);
    let per_block: Vec<Result<(Moments, Moments)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = Setup::block_rng(cfg.seed, b);
            let (mut rho, mut util) = (Moments::default(), Moments::default());
            for _ in 0..block_len(cfg.n_samples, b) {
                let d = setup.draw(&mut rng)?;
                rho.push(if d.coordinated { 1.0 } else { 0.0 });
                util.push(d.utility);
            }
            Ok((rho, util))
        })
        .collect();
    let (mut rho, mut util) = (Moments::default(), Moments::default());
    for r in per_block {
        let (r, u) = r?;
        rho = rho.merge(r);
        util = util.merge(u);
    }
    Ok(SimReport {
        empirical_rho: rho.mean,
        rho_std_error: rho.std_error(),
        empirical_utility: util.mean,
        utility_std_error: util.std_error(),
        n_samples: cfg.n_samples,
        n_agents: setup.n,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// The individual draws behind [`simulate`], in order.
pub fn simulate_draws(
    policy: impl Into<SimPolicy>,
    tau_oracle: f64,
    params: &GameParams,
    cfg: &SimConfig,
) -> Result<Vec<Draw>> {
    let setup = Setup::new(&policy.into(), tau_oracle, params, cfg)?;
    let blocks = cfg.n_samples.div_ceil(BLOCK_SIZE);
    let chunks: Vec<Result<Vec<Draw>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = Setup::block_rng(cfg.seed, b);
            (0..block_len(cfg.n_samples, b)).map(|_| setup.draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(cfg.n_samples as usize);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{coordination_efficiency, expected_utility};
    use crate::equilibrium::{ne_threshold, oracle_threshold};

    fn params(n: AgentCount, sz2: f64) -> GameParams {
        GameParams::new(n, 1.0, 1.0, sz2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1).is_err());
        assert!(SimConfig::new(10, 1).unwrap().with_agents_effective(1).is_err());
        assert_eq!(SimConfig::new(10, 1).unwrap().n_agents_effective, DEFAULT_AGENTS_EFFECTIVE);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SimConfig::new(10, 1).unwrap();
        assert_eq!(
            simulate(0.0, 0.0, &params(AgentCount::Finite(3), 0.0), &cfg),
            Err(Error::NoiselessDegenerate)
        );
        let profile = PolicyProfile::new(vec![0.0, 1.0]).unwrap();
        assert!(simulate(profile, 0.0, &params(AgentCount::Finite(3), 1.0), &cfg).is_err());
    }

    #[test]
    fn deterministic_and_block_aligned() {
        let p = params(AgentCount::Finite(5), 0.7);
        let cfg = SimConfig::new(3 * BLOCK_SIZE + 17, 99).unwrap();
        let a = simulate(0.8, 0.4, &p, &cfg).unwrap();
        let b = simulate(0.8, 0.4, &p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rng_algorithm, RNG_ALGORITHM);

        // a prefix run reuses the same streams
        let short = SimConfig { n_samples: BLOCK_SIZE + 3, ..cfg };
        let all = simulate_draws(0.8, 0.4, &p, &cfg).unwrap();
        let head = simulate_draws(0.8, 0.4, &p, &short).unwrap();
        assert_eq!(&all[..head.len()], &head[..]);

        let other = simulate(0.8, 0.4, &p, &SimConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.empirical_rho, other.empirical_rho);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = params(AgentCount::Infinite, 1.0);
        let cfg = SimConfig::new(4 * BLOCK_SIZE, 5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(1.0, 0.5, &p, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn standard_errors_match_draws() {
        let p = params(AgentCount::Finite(4), 1.0);
        let cfg = SimConfig::new(5_000, 3).unwrap();
        let r = simulate(0.5, 0.375, &p, &cfg).unwrap();
        let draws = simulate_draws(0.5, 0.375, &p, &cfg).unwrap();
        let n = draws.len() as f64;
        let u: Vec<f64> = draws.iter().map(|d| d.utility).collect();
        let mean = u.iter().sum::<f64>() / n;
        let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((r.empirical_utility - mean).abs() < 1e-12);
        assert!((r.utility_std_error - (var / n).sqrt()).abs() < 1e-12);
        let hits = draws.iter().filter(|d| d.coordinated).count() as f64;
        assert!((r.empirical_rho - hits / n).abs() < 1e-12);
    }

    #[test]
    fn noiseless_alignment() {
        let p = params(AgentCount::Finite(10), 1e-10);
        let cfg = SimConfig::new(100_000, 11).unwrap();
        let r = simulate(0.45, 0.45, &p, &cfg).unwrap();
        assert!(1.0 - r.empirical_rho <= 3.0 * r.rho_std_error.max(1e-5), "{r:?}");
    }

    #[test]
    fn never_engaging_earns_exactly_zero() {
        for n in [AgentCount::Finite(3), AgentCount::Finite(200), AgentCount::Infinite] {
            let r = simulate(-1e6, 0.5, &params(n, 1.0), &SimConfig::new(20_000, 2).unwrap()).unwrap();
            assert_eq!(r.empirical_utility, 0.0);
            assert_eq!(r.utility_std_error, 0.0);
        }
    }

    #[test]
    fn heterogeneous_profile_runs() {
        let p = params(AgentCount::Finite(3), 0.5);
        let prof = PolicyProfile::new(vec![0.2, 0.5, 0.8]).unwrap();
        let r = simulate(prof, 0.333, &p, &SimConfig::new(50_000, 8).unwrap()).unwrap();
        assert!(r.empirical_rho > 0.5 && r.empirical_rho < 1.0);
    }

    #[test]
    fn ne_regression_and_quadrature_agreement() {
        let p = params(AgentCount::Finite(10), 1.0);
        let tau = ne_threshold(&p).unwrap().tau_star;
        let to = oracle_threshold(&p);
        let r = simulate(tau, to, &p, &SimConfig::new(1_000_000, 42).unwrap()).unwrap();
        let rho = coordination_efficiency(tau, to, &p).unwrap().rho;
        let j = expected_utility(tau, &p).unwrap();
        assert!((r.empirical_rho - rho).abs() <= 3.0 * r.rho_std_error, "{r:?} vs {rho}");
        assert!((r.empirical_utility - j).abs() <= 3.0 * r.utility_std_error, "{r:?} vs {j}");
        // frozen output of this run
        assert_eq!(r.empirical_rho, NE_RUN_RHO);
        assert_eq!(r.empirical_utility, NE_RUN_UTILITY);
    }

    const NE_RUN_RHO: f64 = 0.772_647_000_000_000_9;
    const NE_RUN_UTILITY: f64 = 0.822_743_958_781_603_9;

    #[test]
    fn binomial_path_agrees_with_sampled_agents() {
        // 65 others is the first size above the limit
        let big = params(AgentCount::Finite(66), 0.8);
        let small = params(AgentCount::Finite(65), 0.8);
        let cfg = SimConfig::new(400_000, 21).unwrap();
        for p in [big, small] {
            let r = simulate(0.9, 0.5, &p, &cfg).unwrap();
            let j = expected_utility(0.9, &p).unwrap();
            assert!((r.empirical_utility - j).abs() <= 3.0 * r.utility_std_error, "{r:?} vs {j}");
        }
    }

    #[test]
    fn engagement_benefit_decreases_in_signal() {
        let p = params(AgentCount::Finite(10), 1.0);
        let cfg = SimConfig::new(400_000, 77).unwrap();
        let mut draws = simulate_draws(1.25, 0.45, &p, &cfg).unwrap();
        draws.sort_by(|a, b| a.y1.total_cmp(&b.y1));
        let bins = 20;
        let size = draws.len() / bins;
        let stats: Vec<(f64, f64)> = draws
            .chunks(size)
            .take(bins)
            .map(|c| {
                let b: Vec<f64> = c.iter().map(|d| d.engaged_others as f64 / 10.0).collect();
                let n = b.len() as f64;
                let m = b.iter().sum::<f64>() / n;
                let v = b.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
                (m, (v / n).sqrt())
            })
            .collect();
        for w in stats.windows(2) {
            assert!(w[1].0 <= w[0].0 + 2.0 * (w[0].1 + w[1].1), "{stats:?}");
        }
    }
}
