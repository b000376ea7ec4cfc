//! Simulation harness: scenario generation, the four comparison policies,
//! the evaluation metrics and the CSV tables.
//!
//! The default setup is a week-long sensing task: `T = 70` hourly slots,
//! `L = 6` locations, per-cell participant requirements drawn uniformly
//! from `[1, l^2]` and bidding functions `b(x) = l x^3`. Requirement draws
//! are fixed per replication and swept over the robustness grids, so a
//! sweep compares policies on identical instances.
//!
//! Metrics are analytic: joint success probabilities are exact products and
//! soft slacks come from the exact tail, which is the only way values at the
//! 1e-14 scale are observable at all.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::hard::{solve_pa2, solve_pa3};
use crate::model::{
    joint_success_probability, total_payment, BiddingCurve, PolicyMatrix, RobustnessSpec, Scenario,
};
use crate::rng::{self, tag};
use crate::soft::{algorithm1, solve_pb3, verify_pb1, SoftSearchParams};

/// Hard-constraint tolerance grid, in the row order of the success table.
pub const HARD_EPSILON_GRID: [f64; 5] = [0.08, 0.06, 0.04, 0.02, 0.0];
/// Soft-constraint confidence grid.
pub const SOFT_BETA_GRID: [f64; 5] = [0.91, 0.93, 0.95, 0.97, 0.99];
/// Per-location success-fraction interval, setting I.
pub const SETTING1_ALPHA: (f64, f64) = (0.9, 1.0);
/// Per-location success-fraction interval, setting II.
pub const SETTING2_ALPHA: (f64, f64) = (0.75, 1.0);

/// Experiment shape: instance dimensions, per-location generation rules,
/// replication count and the master seed.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub t: usize,
    pub l: usize,
    /// Per-location requirement interval (inclusive).
    pub r_low: Vec<u32>,
    pub r_high: Vec<u32>,
    /// Per-location bidding curve.
    pub curves: Vec<BiddingCurve>,
    pub replications: usize,
    pub master_seed: u64,
    /// Tolerance grid swept by the hard-case tables (row order preserved).
    pub epsilons: Vec<f64>,
    /// Confidence grid swept by the soft-case tables.
    pub betas: Vec<f64>,
    /// Binary-search knobs for the soft case.
    pub search: SoftSearchParams,
}

impl ExperimentConfig {
    /// The default week-long instance: `T = 70`, `L = 6`, `r ~ U[1, l^2]`,
    /// `b(x) = l x^3`, 20 replications.
    pub fn paper_defaults() -> Self {
        let l = 6;
        Self {
            t: 70,
            l,
            r_low: vec![1; l],
            r_high: (1..=l as u32).map(|i| i * i).collect(),
            curves: (1..=l).map(|i| BiddingCurve::new(i as f64, 3.0).expect("valid curve")).collect(),
            replications: 20,
            master_seed: 0x5256_4353,
            epsilons: HARD_EPSILON_GRID.to_vec(),
            betas: SOFT_BETA_GRID.to_vec(),
            search: SoftSearchParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.l == 0 {
            return Err(Error::Config("experiment needs T >= 1 and L >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        for (name, len) in [
            ("r_low", self.r_low.len()),
            ("r_high", self.r_high.len()),
            ("curves", self.curves.len()),
        ] {
            if len != self.l {
                return Err(Error::Config(format!(
                    "{name} has {len} entries, expected one per location ({})",
                    self.l
                )));
            }
        }
        for l in 0..self.l {
            if self.r_low[l] < 1 || self.r_low[l] > self.r_high[l] {
                return Err(Error::Config(format!(
                    "requirement interval [{}, {}] at location {l} is empty or below 1",
                    self.r_low[l], self.r_high[l]
                )));
            }
        }
        if self.epsilons.is_empty() || self.betas.is_empty() {
            return Err(Error::Config("epsilon and beta grids must be nonempty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("epsilon grid value {e} outside [0, 1)")));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Config(format!("beta grid value {b} outside (0, 1)")));
        }
        self.search.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// The `T x L` requirement draw of one replication (row-major).
pub fn generate_requirement(cfg: &ExperimentConfig, replication: usize) -> Vec<u32> {
    let mut rng = rng::substream(cfg.master_seed, &[tag::SCENARIO_REQ, replication as u64]);
    let mut r = Vec::with_capacity(cfg.t * cfg.l);
    for _ in 0..cfg.t {
        for l in 0..cfg.l {
            r.push(rng::uniform_u32(&mut rng, cfg.r_low[l], cfg.r_high[l]));
        }
    }
    r
}

/// Per-location success fractions drawn uniformly from `interval`.
pub fn generate_alphas(cfg: &ExperimentConfig, interval: (f64, f64), replication: usize) -> Vec<f64> {
    let mut rng = rng::substream(cfg.master_seed, &[tag::SCENARIO_ALPHA, replication as u64]);
    (0..cfg.l)
        .map(|_| interval.0 + (interval.1 - interval.0) * rng::uniform_f64(&mut rng))
        .collect()
}

/// Assemble the scenario of one replication under a given robustness spec.
pub fn generate_scenario(
    cfg: &ExperimentConfig,
    spec: RobustnessSpec,
    replication: usize,
) -> Result<Scenario> {
    cfg.validate()?;
    let requirement = generate_requirement(cfg, replication);
    let mut curves = Vec::with_capacity(cfg.t * cfg.l);
    for _ in 0..cfg.t {
        curves.extend_from_slice(&cfg.curves);
    }
    Scenario::new(cfg.t, cfg.l, requirement, curves, spec)
}

/// The policy under evaluation: conservative solve in the hard case, binary
/// search in the soft case.
pub fn policy_our(scenario: &Scenario, search: &SoftSearchParams) -> Result<PolicyMatrix> {
    match scenario.spec() {
        RobustnessSpec::Hard { .. } => Ok(solve_pa2(scenario)?.policy),
        RobustnessSpec::Soft { .. } => Ok(algorithm1(scenario, search)?.policy),
    }
}

/// The relaxation optimum; its payment lower-bounds every feasible policy.
pub fn policy_lower_bound(scenario: &Scenario) -> Result<PolicyMatrix> {
    match scenario.spec() {
        RobustnessSpec::Hard { .. } => Ok(solve_pa3(scenario)?.policy),
        RobustnessSpec::Soft { .. } => Ok(solve_pb3(scenario)?.policy),
    }
}

/// Constant accept probability `1 - epsilon` (hard) or `beta` (soft).
pub fn policy_uniform(scenario: &Scenario) -> Result<PolicyMatrix> {
    let value = match scenario.spec() {
        RobustnessSpec::Hard { epsilon } => 1.0 - epsilon,
        RobustnessSpec::Soft { beta, .. } => *beta,
    };
    PolicyMatrix::constant(scenario.t(), scenario.l(), value)
}

/// Accept probabilities drawn uniformly from `[0, 1)` per cell.
pub fn policy_random(scenario: &Scenario, seed: u64) -> PolicyMatrix {
    let mut rng = rng::substream(seed, &[tag::RANDOM_POLICY]);
    let rho: Vec<f64> = (0..scenario.cells()).map(|_| rng::uniform_f64(&mut rng)).collect();
    PolicyMatrix::new(scenario.t(), scenario.l(), rho).expect("draws lie in [0, 1)")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Our,
    LowerBound,
    Uniform,
    Random,
}

impl PolicyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyName::Our => "our",
            PolicyName::LowerBound => "lower_bound",
            PolicyName::Uniform => "uniform",
            PolicyName::Random => "random",
        }
    }
}

pub const POLICY_ORDER: [PolicyName; 4] = [
    PolicyName::Our,
    PolicyName::LowerBound,
    PolicyName::Uniform,
    PolicyName::Random,
];

/// One policy's metrics on one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub policy: PolicyName,
    pub total_payment: f64,
    /// `(F(policy) - F(lower bound)) / T`.
    pub time_avg_gap: f64,
    /// Joint success probability (hard case only).
    pub hard_success_prob: Option<f64>,
    /// Per-location exact-tail slack (soft case only).
    pub per_location_soft_slack: Option<Vec<f64>>,
}

/// Evaluate named policies on a scenario. The lower-bound policy must be
/// included; it anchors the gap metric.
pub fn evaluate(
    scenario: &Scenario,
    policies: &[(PolicyName, PolicyMatrix)],
) -> Result<Vec<ComparisonRow>> {
    let f_lb = policies
        .iter()
        .find(|(name, _)| *name == PolicyName::LowerBound)
        .map(|(_, p)| total_payment(p, scenario))
        .transpose()?
        .ok_or_else(|| Error::Invalid("evaluation requires the lower-bound policy".into()))?;

    policies
        .iter()
        .map(|(name, policy)| {
            let f = total_payment(policy, scenario)?;
            let (hard_success_prob, per_location_soft_slack) = match scenario.spec() {
                RobustnessSpec::Hard { .. } => (Some(joint_success_probability(policy)), None),
                RobustnessSpec::Soft { .. } => {
                    let slacks = verify_pb1(policy, scenario)?
                        .iter()
                        .map(|c| c.slack)
                        .collect();
                    (None, Some(slacks))
                }
            };
            Ok(ComparisonRow {
                policy: *name,
                total_payment: f,
                time_avg_gap: (f - f_lb) / scenario.t() as f64,
                hard_success_prob,
                per_location_soft_slack,
            })
        })
        .collect()
}

fn four_policies(
    scenario: &Scenario,
    search: &SoftSearchParams,
    random_seed: u64,
) -> Result<Vec<(PolicyName, PolicyMatrix)>> {
    Ok(vec![
        (PolicyName::Our, policy_our(scenario, search)?),
        (PolicyName::LowerBound, policy_lower_bound(scenario)?),
        (PolicyName::Uniform, policy_uniform(scenario)?),
        (PolicyName::Random, policy_random(scenario, random_seed)),
    ])
}

/// Success-probability table of the hard case: one row per tolerance, the
/// four policies' joint success probabilities averaged over replications.
#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Table1Row {
    pub one_minus_epsilon: f64,
    pub our: f64,
    pub lower_bound: f64,
    pub uniform: f64,
    pub random: f64,
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<Table1> {
    cfg.validate()?;
    let rows = cfg
        .epsilons
        .iter()
        .map(|&epsilon| {
            let per_rep: Vec<Result<[f64; 4]>> = exec::map_indexed(cfg.replications, |rep| {
                let scenario =
                    generate_scenario(cfg, RobustnessSpec::Hard { epsilon }, rep)?;
                let seed = rng::substream_seed(cfg.master_seed, &[tag::RANDOM_POLICY, rep as u64]);
                let policies = four_policies(&scenario, &cfg.search, seed)?;
                let mut probs = [0.0; 4];
                for (slot, (_, policy)) in probs.iter_mut().zip(&policies) {
                    *slot = joint_success_probability(policy);
                }
                Ok(probs)
            });
            let mut mean = [0.0f64; 4];
            for rep in per_rep {
                let p = rep?;
                for (m, v) in mean.iter_mut().zip(p) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= cfg.replications as f64;
            }
            Ok(Table1Row {
                one_minus_epsilon: 1.0 - epsilon,
                our: mean[0],
                lower_bound: mean[1],
                uniform: mean[2],
                random: mean[3],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1 { rows })
}

/// Payment-gap sweep: per grid point and policy, the replication mean and
/// standard error of the time-average gap.
#[derive(Debug, Clone, Serialize)]
pub struct GapSweep {
    pub rows: Vec<GapRow>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapRow {
    /// `1 - epsilon` (hard) or `beta` (soft).
    pub requirement: f64,
    pub policy: PolicyName,
    pub mean_gap: f64,
    pub stderr: f64,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn gap_rows_for(
    cfg: &ExperimentConfig,
    requirement: f64,
    make_spec: impl Fn(usize) -> RobustnessSpec + Sync + Send,
    spec_index: usize,
) -> Result<Vec<GapRow>> {
    let per_rep: Vec<Result<[f64; 4]>> = exec::map_indexed(cfg.replications, |rep| {
        let scenario = generate_scenario(cfg, make_spec(rep), rep)?;
        let seed = rng::substream_seed(cfg.master_seed, &[tag::RANDOM_POLICY, rep as u64]);
        let mut search = cfg.search.clone();
        search.master_seed =
            rng::substream_seed(cfg.master_seed, &[tag::SOFT_SEARCH, rep as u64, spec_index as u64]);
        let policies = four_policies(&scenario, &search, seed)?;
        let rows = evaluate(&scenario, &policies)?;
        let mut gaps = [0.0; 4];
        for (slot, row) in gaps.iter_mut().zip(&rows) {
            *slot = row.time_avg_gap;
        }
        Ok(gaps)
    });
    let mut by_policy: [Vec<f64>; 4] = Default::default();
    for rep in per_rep {
        let gaps = rep?;
        for (bucket, g) in by_policy.iter_mut().zip(gaps) {
            bucket.push(g);
        }
    }
    Ok(POLICY_ORDER
        .iter()
        .zip(&by_policy)
        .map(|(&policy, values)| {
            let (mean_gap, stderr) = mean_and_stderr(values);
            GapRow {
                requirement,
                policy,
                mean_gap,
                stderr,
            }
        })
        .collect())
}

/// Hard-case gap sweep over the tolerance grid (rows ordered by rising
/// requirement `1 - epsilon`).
pub fn run_gap_hard(cfg: &ExperimentConfig) -> Result<GapSweep> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &epsilon in &cfg.epsilons {
        rows.extend(gap_rows_for(
            cfg,
            1.0 - epsilon,
            |_| RobustnessSpec::Hard { epsilon },
            0,
        )?);
    }
    Ok(GapSweep { rows })
}

/// Soft-case gap sweep over the confidence grid, with per-location success
/// fractions drawn from `alpha_interval` once per replication.
pub fn run_gap_soft(cfg: &ExperimentConfig, alpha_interval: (f64, f64)) -> Result<GapSweep> {
    cfg.validate()?;
    if !(alpha_interval.0 > 0.0
        && alpha_interval.0 <= alpha_interval.1
        && alpha_interval.1 <= 1.0)
    {
        return Err(Error::Config(format!(
            "alpha interval [{}, {}] must satisfy 0 < low <= high <= 1",
            alpha_interval.0, alpha_interval.1
        )));
    }
    let mut rows = Vec::new();
    for (bi, &beta) in cfg.betas.iter().enumerate() {
        rows.extend(gap_rows_for(
            cfg,
            beta,
            |rep| RobustnessSpec::Soft {
                alpha: generate_alphas(cfg, alpha_interval, rep),
                beta,
            },
            bi,
        )?);
    }
    Ok(GapSweep { rows })
}

/// Fixed-point metric formatting: six decimals, switching to scientific
/// notation below 1e-4 so sub-resolution values stay visible.
pub fn format_metric(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:.6e}")
    } else {
        format!("{v:.6}")
    }
}

pub fn write_table1_csv<W: Write>(table: &Table1, out: &mut W) -> io::Result<()> {
    writeln!(out, "one_minus_epsilon,our,lower_bound,uniform,random")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_metric(row.one_minus_epsilon),
            format_metric(row.our),
            format_metric(row.lower_bound),
            format_metric(row.uniform),
            format_metric(row.random)
        )?;
    }
    Ok(())
}

pub fn write_gap_csv<W: Write>(sweep: &GapSweep, out: &mut W) -> io::Result<()> {
    writeln!(out, "requirement,policy,mean_gap,stderr")?;
    for row in &sweep.rows {
        writeln!(
            out,
            "{},{},{},{}",
            format_metric(row.requirement),
            row.policy.as_str(),
            format_metric(row.mean_gap),
            format_metric(row.stderr)
        )?;
    }
    Ok(())
}
