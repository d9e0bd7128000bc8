//! Parameter sweeps and their CSV form.

use std::fmt::Write as _;
use std::str::FromStr;

use ggcoord::analysis::{coordination_efficiency, efficiency_is_unimodal, expected_utility, fano_bound};
use ggcoord::equilibrium::{ce_threshold, ne_threshold_with, oracle_threshold};
use ggcoord::numerics::QuadratureSpec;
use ggcoord::{AgentCount, GameParams};
use rayon::prelude::*;

use crate::format::fmt_g;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    SigmaZSq,
    SigmaXSq,
    Lambda,
    NAgents,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SigmaZSq => "sigma_z_sq",
            SweepVariable::SigmaXSq => "sigma_x_sq",
            SweepVariable::Lambda => "lambda",
            SweepVariable::NAgents => "n_agents",
        }
    }

    fn apply(self, base: &GameParams, v: f64) -> Result<GameParams, CliError> {
        Ok(match self {
            SweepVariable::SigmaZSq => base.with_sigma_z_sq(v)?,
            SweepVariable::SigmaXSq => base.with_sigma_x_sq(v)?,
            SweepVariable::Lambda => base.with_lambda(v)?,
            SweepVariable::NAgents => {
                if v.fract() != 0.0 || v > u64::MAX as f64 {
                    return Err(CliError::Usage(format!("n_agents grid values must be integers, got {v}")));
                }
                base.with_n_agents(AgentCount::Finite(v as u64))?
            }
        })
    }
}

impl FromStr for SweepVariable {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        [SweepVariable::SigmaZSq, SweepVariable::SigmaXSq, SweepVariable::Lambda, SweepVariable::NAgents]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown sweep variable {s:?}")))
    }
}

/// A sweep column, listed in header order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Output {
    NeTau,
    CeTau,
    OracleTau,
    UtilityNe,
    UtilityCe,
    RhoNe,
    RhoCe,
    FanoBound,
}

impl Output {
    pub const ALL: [Output; 8] = [
        Output::NeTau,
        Output::CeTau,
        Output::OracleTau,
        Output::UtilityNe,
        Output::UtilityCe,
        Output::RhoNe,
        Output::RhoCe,
        Output::FanoBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::NeTau => "ne_tau",
            Output::CeTau => "ce_tau",
            Output::OracleTau => "oracle_tau",
            Output::UtilityNe => "utility_ne",
            Output::UtilityCe => "utility_ce",
            Output::RhoNe => "rho_ne",
            Output::RhoCe => "rho_ce",
            Output::FanoBound => "fano_bound",
        }
    }
}

impl FromStr for Output {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Output::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown output column {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: GameParams,
    pub quadrature: QuadratureSpec,
    pub sweep_variable: SweepVariable,
    grid: Vec<f64>,
    outputs: Vec<Output>,
}

impl SweepSpec {
    /// Outputs are reordered to header order and deduplicated.
    pub fn new(
        params: GameParams,
        quadrature: QuadratureSpec,
        sweep_variable: SweepVariable,
        grid: Vec<f64>,
        mut outputs: Vec<Output>,
    ) -> Result<Self, CliError> {
        if grid.is_empty() {
            return Err(CliError::Usage("sweep grid is empty".into()));
        }
        if let Some(v) = grid.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(CliError::Usage(format!("sweep grid values must be positive and finite, got {v}")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("sweep grid must be strictly increasing".into()));
        }
        outputs.sort();
        outputs.dedup();
        if outputs.is_empty() {
            return Err(CliError::Usage("no output columns requested".into()));
        }
        Ok(Self { params, quadrature, sweep_variable, grid, outputs })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    fn wants(&self, any: &[Output]) -> bool {
        self.outputs.iter().any(|o| any.contains(o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    /// Same order as [`SweepSpec::outputs`].
    pub values: Vec<f64>,
    /// Set when `ρ(τ)` failed the unimodality diagnostic at this point.
    pub non_unimodal: bool,
}

impl SweepRow {
    pub fn get(&self, spec: &SweepSpec, o: Output) -> Option<f64> {
        spec.outputs.iter().position(|x| *x == o).map(|i| self.values[i])
    }
}

const DIAGNOSTIC_POINTS: usize = 61;

fn evaluate(spec: &SweepSpec, v: f64) -> Result<SweepRow, CliError> {
    use Output::*;
    let p = spec.sweep_variable.apply(&spec.params, v)?;
    let ne = if spec.wants(&[NeTau, UtilityNe, RhoNe]) {
        ne_threshold_with(&p, &spec.quadrature)?.tau_star
    } else {
        f64::NAN
    };
    let ce = ce_threshold(&p);
    let oracle = oracle_threshold(&p);
    let mut values = Vec::with_capacity(spec.outputs.len());
    for o in &spec.outputs {
        values.push(match o {
            NeTau => ne,
            CeTau => ce,
            OracleTau => oracle,
            UtilityNe => expected_utility(ne, &p)?,
            UtilityCe => expected_utility(ce, &p)?,
            RhoNe => coordination_efficiency(ne, oracle, &p)?.rho,
            RhoCe => coordination_efficiency(ce, oracle, &p)?.rho,
            FanoBound => fano_bound(oracle, &p)?.rho_upper_bound,
        });
    }
    let non_unimodal = if spec.wants(&[RhoNe, RhoCe]) {
        let sy = (p.sigma_x_sq() + p.sigma_z_sq()).sqrt();
        let (lo, hi) = (oracle.min(ce) - 4.0 * sy, oracle.max(ce) + 4.0 * sy);
        let step = (hi - lo) / (DIAGNOSTIC_POINTS - 1) as f64;
        let taus: Vec<f64> = (0..DIAGNOSTIC_POINTS).map(|k| lo + step * k as f64).collect();
        !efficiency_is_unimodal(&taus, oracle, &p)?
    } else {
        false
    };
    Ok(SweepRow { sweep_value: v, values, non_unimodal })
}

/// Evaluates every grid point, in parallel, returning rows in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    spec.grid.par_iter().map(|&v| evaluate(spec, v)).collect()
}

pub fn render_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep_value");
    for o in &spec.outputs {
        out.push(',');
        out.push_str(o.name());
    }
    out.push('\n');
    for row in rows {
        out.push_str(&fmt_g(row.sweep_value));
        for v in &row.values {
            let _ = write!(out, ",{}", fmt_g(*v));
        }
        out.push('\n');
    }
    out
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points == 0 {
        return Err(CliError::Usage("a grid needs at least one point".into()));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| if k == points - 1 { stop } else { start + step * k as f64 }).collect())
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}"))))
        .collect()
}
