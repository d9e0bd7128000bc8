//! Model settings: built-in defaults, then an optional JSON file, then flags.

use std::path::Path;

use ggcoord::numerics::QuadratureSpec;
use ggcoord::{AgentCount, GameParams};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_N_AGENTS: AgentCount = AgentCount::Finite(10);
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_SIGMA_X_SQ: f64 = 1.0;
pub const DEFAULT_SIGMA_Z_SQ: f64 = 1.0;
pub const DEFAULT_QUADRATURE_NODES: usize = 96;
pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n_agents: Option<NAgents>,
    pub lambda: Option<f64>,
    pub sigma_x_sq: Option<f64>,
    pub sigma_z_sq: Option<f64>,
    pub quadrature_nodes: Option<usize>,
    pub mc_samples: Option<u64>,
    pub seed: Option<u64>,
}

/// `n_agents` as an integer or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NAgents {
    Count(u64),
    Label(String),
}

impl NAgents {
    fn resolve(&self) -> Result<AgentCount, CliError> {
        match self {
            NAgents::Count(n) => Ok(AgentCount::Finite(*n)),
            NAgents::Label(s) => parse_agent_count(s),
        }
    }
}

pub fn parse_agent_count(s: &str) -> Result<AgentCount, CliError> {
    s.parse::<AgentCount>()
        .map_err(|_| CliError::Usage(format!("n_agents must be an integer or \"inf\", got {s:?}")))
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Flag values; `None` falls through to the file and then the defaults.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Overrides {
    pub n_agents: Option<String>,
    pub lambda: Option<f64>,
    pub sigma_x_sq: Option<f64>,
    pub sigma_z_sq: Option<f64>,
    pub quadrature_nodes: Option<usize>,
    pub mc_samples: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub params: GameParams,
    pub quadrature: QuadratureSpec,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Settings {
    pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Self, CliError> {
        let n_agents = match (&flags.n_agents, &file.n_agents) {
            (Some(s), _) => parse_agent_count(s)?,
            (None, Some(n)) => n.resolve()?,
            (None, None) => DEFAULT_N_AGENTS,
        };
        let params = GameParams::new(
            n_agents,
            flags.lambda.or(file.lambda).unwrap_or(DEFAULT_LAMBDA),
            flags.sigma_x_sq.or(file.sigma_x_sq).unwrap_or(DEFAULT_SIGMA_X_SQ),
            flags.sigma_z_sq.or(file.sigma_z_sq).unwrap_or(DEFAULT_SIGMA_Z_SQ),
        )?;
        let nodes = flags.quadrature_nodes.or(file.quadrature_nodes).unwrap_or(DEFAULT_QUADRATURE_NODES);
        let mc_samples = flags.mc_samples.or(file.mc_samples).unwrap_or(DEFAULT_MC_SAMPLES);
        if mc_samples == 0 {
            return Err(CliError::Usage("mc_samples must be at least 1".into()));
        }
        Ok(Self {
            params,
            quadrature: QuadratureSpec::gauss_hermite(nodes)?,
            mc_samples,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }
}
