//! Command-line driver for `ggcoord`.
//!
//! Exit codes: 0 on success, 2 for bad arguments or model errors, 3 for
//! I/O failures. Every float is printed with [`format::fmt_g`], so repeated
//! invocations produce identical bytes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book {}

pub mod config;
pub mod format;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ggcoord::analysis::{coordination_efficiency, expected_utility, fano_bound};
use ggcoord::equilibrium::{best_response_threshold_with, ce_threshold, ne_threshold_with, oracle_threshold};
use ggcoord::montecarlo::{simulate, SimConfig, SimPolicy};
use ggcoord::PolicyProfile;

use config::{FileConfig, Overrides, Settings};
use format::fmt_g;
use sweep::{linspace, parse_list, render_csv, run_sweep, Output, SweepSpec, SweepVariable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ggcoord::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ggcoord",
    version,
    about = "Threshold equilibria and coordination efficiency in Gaussian global games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium, oracle and certainty-equivalent thresholds
    Solve(ModelArgs),
    /// Evaluate thresholds, utilities and efficiencies over a parameter grid
    Sweep(SweepArgs),
    /// Best response to a homogeneous threshold, over a grid of thresholds
    BrCurve(BrCurveArgs),
    /// Seeded Monte Carlo estimate of efficiency and utility
    Simulate(SimulateArgs),
    /// Information-theoretic ceiling on coordination efficiency
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON file with any of: n_agents, lambda, sigma_x_sq, sigma_z_sq, quadrature_nodes, mc_samples, seed
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of agents, or "inf"
    #[arg(long = "n", value_name = "N", allow_hyphen_values = true)]
    pub n_agents: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_x_sq: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_z_sq: Option<f64>,
    /// Gauss-Hermite nodes for belief expectations
    #[arg(long)]
    pub quadrature_nodes: Option<usize>,
}

impl ModelArgs {
    fn settings(&self, mc_samples: Option<u64>, seed: Option<u64>) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = Overrides {
            n_agents: self.n_agents.clone(),
            lambda: self.lambda,
            sigma_x_sq: self.sigma_x_sq,
            sigma_z_sq: self.sigma_z_sq,
            quadrature_nodes: self.quadrature_nodes,
            mc_samples,
            seed,
        };
        Settings::resolve(&file, &flags)
    }
}

/// Either an explicit list or `points` values from `start` to `stop`.
#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Comma-separated values
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["start", "stop", "points"])]
    pub grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

impl GridArgs {
    fn resolve(&self, default: Option<(f64, f64, usize)>) -> Result<Vec<f64>, CliError> {
        if let Some(list) = &self.grid {
            return parse_list(list, "grid");
        }
        let (d_start, d_stop, d_points) = default.unwrap_or((f64::NAN, f64::NAN, 0));
        let start = self.start.unwrap_or(d_start);
        let stop = self.stop.unwrap_or(d_stop);
        let points = self.points.unwrap_or(d_points);
        if start.is_nan() || stop.is_nan() || points == 0 {
            return Err(CliError::Usage("give --grid or all of --start, --stop, --points".into()));
        }
        linspace(start, stop, points)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// sigma_z_sq, sigma_x_sq, lambda or n_agents
    #[arg(long, default_value = "sigma_z_sq")]
    pub variable: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Comma-separated subset of the output columns (default: all)
    #[arg(long)]
    pub outputs: Option<String>,
    /// CSV destination (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BrCurveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Threshold grid; defaults to 41 points on [0, λ(N−1)/(Nα)]
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Common threshold (default: the equilibrium threshold)
    #[arg(long, allow_hyphen_values = true, conflicts_with = "profile")]
    pub tau: Option<f64>,
    /// Comma-separated per-agent thresholds
    #[arg(long, allow_hyphen_values = true)]
    pub profile: Option<String>,
    /// Oracle threshold used for the coordination indicator (default: λ(N−1)/(2N))
    #[arg(long, allow_hyphen_values = true)]
    pub tau_oracle: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Population simulated when N is infinite
    #[arg(long, default_value_t = ggcoord::montecarlo::DEFAULT_AGENTS_EFFECTIVE)]
    pub agents_effective: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub tau_oracle: Option<f64>,
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(key);
    out.push('=');
    out.push_str(&value.to_string());
    out.push('\n');
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn params_block(out: &mut String, s: &Settings) {
    kv(out, "n_agents", s.params.n_agents());
    kv(out, "lambda", fmt_g(s.params.lambda()));
    kv(out, "sigma_x_sq", fmt_g(s.params.sigma_x_sq()));
    kv(out, "sigma_z_sq", fmt_g(s.params.sigma_z_sq()));
}

pub fn cmd_solve(args: &ModelArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = args.settings(None, None)?;
    let ne = ne_threshold_with(&s.params, &s.quadrature)?;
    if ne.warning() {
        eprintln!(
            "warning: best-response iteration ended at {} (converged: {}), {} away from the direct root",
            fmt_g(ne.br_check.tau),
            ne.br_check.converged,
            fmt_g(ne.br_check.deviation)
        );
    }
    let mut out = String::new();
    params_block(&mut out, &s);
    kv(&mut out, "ne_tau", fmt_g(ne.tau_star));
    kv(&mut out, "residual", fmt_g(ne.residual));
    kv(&mut out, "iterations", ne.iterations);
    kv(&mut out, "br_iteration_tau", fmt_g(ne.br_check.tau));
    kv(&mut out, "br_iteration_steps", ne.br_check.steps);
    kv(&mut out, "methods_agree", ne.br_check.agrees);
    kv(&mut out, "oracle_tau", fmt_g(oracle_threshold(&s.params)));
    kv(&mut out, "ce_tau", fmt_g(ce_threshold(&s.params)));
    emit(&out, None, stdout)
}

pub fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec, CliError> {
    let s = args.model.settings(None, None)?;
    let variable: SweepVariable = args.variable.parse()?;
    let outputs = match &args.outputs {
        Some(list) => parse_list::<Output>(list, "output")?,
        None => Output::ALL.to_vec(),
    };
    SweepSpec::new(s.params, s.quadrature, variable, args.grid.resolve(None)?, outputs)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = sweep_spec(args)?;
    let rows = run_sweep(&spec)?;
    for r in rows.iter().filter(|r| r.non_unimodal) {
        eprintln!(
            "warning: coordination efficiency is not unimodal in the threshold at {}={}",
            spec.sweep_variable.name(),
            fmt_g(r.sweep_value)
        );
    }
    emit(&render_csv(&spec, &rows), args.out.as_deref(), stdout)
}

pub fn cmd_br_curve(args: &BrCurveArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = args.model.settings(None, None)?;
    let p = &s.params;
    let taus = args.grid.resolve(Some((0.0, p.br_coeff() / p.alpha(), 41)))?;
    let fixed = ne_threshold_with(p, &s.quadrature)?.tau_star;
    let mut out = String::from("tau,br_tau\n");
    for &t in &taus {
        let br = best_response_threshold_with(t, p, &s.quadrature)?;
        out.push_str(&format!("{},{}\n", fmt_g(t), fmt_g(br)));
    }
    out.push_str(&format!("# fixed_point={}\n", fmt_g(fixed)));
    emit(&out, args.out.as_deref(), stdout)
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = args.model.settings(args.samples, args.seed)?;
    let p = &s.params;
    let cfg = SimConfig::new(s.mc_samples, s.seed)?.with_agents_effective(args.agents_effective)?;
    let tau_oracle = args.tau_oracle.unwrap_or_else(|| oracle_threshold(p));
    let policy = match (&args.profile, args.tau) {
        (Some(list), _) => SimPolicy::Profile(PolicyProfile::new(parse_list(list, "profile")?)?),
        (None, Some(t)) => SimPolicy::Homogeneous(t),
        (None, None) => SimPolicy::Homogeneous(ne_threshold_with(p, &s.quadrature)?.tau_star),
    };
    let common_tau = match &policy {
        SimPolicy::Homogeneous(t) => Some(*t),
        SimPolicy::Profile(pr) if pr.is_homogeneous() => Some(pr.thresholds()[0]),
        SimPolicy::Profile(_) => None,
    };
    let r = simulate(policy, tau_oracle, p, &cfg)?;
    let mut out = String::new();
    params_block(&mut out, &s);
    if let Some(t) = common_tau {
        kv(&mut out, "tau", fmt_g(t));
    }
    kv(&mut out, "tau_oracle", fmt_g(tau_oracle));
    kv(&mut out, "empirical_rho", fmt_g(r.empirical_rho));
    kv(&mut out, "rho_std_error", fmt_g(r.rho_std_error));
    kv(&mut out, "empirical_utility", fmt_g(r.empirical_utility));
    kv(&mut out, "utility_std_error", fmt_g(r.utility_std_error));
    kv(&mut out, "n_samples", r.n_samples);
    kv(&mut out, "n_agents_simulated", r.n_agents);
    kv(&mut out, "seed", s.seed);
    kv(&mut out, "rng", r.rng_algorithm);
    if let Some(t) = common_tau {
        kv(&mut out, "quadrature_rho", fmt_g(coordination_efficiency(t, tau_oracle, p)?.rho));
        kv(&mut out, "quadrature_utility", fmt_g(expected_utility(t, p)?));
    }
    emit(&out, None, stdout)
}

pub fn cmd_bound(args: &BoundArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = args.model.settings(None, None)?;
    let tau_oracle = args.tau_oracle.unwrap_or_else(|| oracle_threshold(&s.params));
    let f = fano_bound(tau_oracle, &s.params)?;
    let mut out = String::new();
    params_block(&mut out, &s);
    kv(&mut out, "tau_oracle", fmt_g(f.tau_oracle));
    kv(&mut out, "p_astar_one", fmt_g(f.p_astar_one));
    kv(&mut out, "h_astar", fmt_g(f.h_astar));
    kv(&mut out, "h_y", fmt_g(f.h_y));
    kv(&mut out, "h_y_given_astar", fmt_g(f.h_y_given_astar));
    kv(&mut out, "h_astar_given_y", fmt_g(f.h_astar_given_y));
    kv(&mut out, "h_astar_given_y_unclamped", fmt_g(f.h_astar_given_y_unclamped));
    kv(&mut out, "rho_upper_bound", fmt_g(f.rho_upper_bound));
    emit(&out, None, stdout)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::BrCurve(a) => cmd_br_curve(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Bound(a) => cmd_bound(a, stdout),
    }
}
