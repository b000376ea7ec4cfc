//! Soft-constraint pipeline.
//!
//! Per location `l` the requirement is probabilistic over the horizon:
//! with probability at least `beta`, at least a fraction `alpha_l` of the
//! `T` slots must be satisfied. Writing `h_l(rho)` for the success-count
//! tail `Pr{#satisfied slots >= k_l}` with `k_l` the smallest integer at or
//! above `T alpha_l`, feasibility means `h_l(rho^l) >= beta` for every `l`.
//!
//! The tail has no tractable closed form, but the budgeted subproblem
//! "minimize column payment subject to `sum_t rho_t >= gamma`" is easy, and
//! the tail of its optimum increases strictly with `gamma`. That monotone
//! coupling drives everything here:
//!
//! * [`solve_pb3`]: relaxation with `gamma_l = T alpha_l beta`; objective
//!   lower-bounds the optimum.
//! * [`algorithm1`]: per-location binary search on `gamma` that stops when
//!   a Monte Carlo estimate `q = h - beta` lands inside the tolerance band
//!   `[sigma_lo, sigma_hi]`; returns a policy feasible with high confidence
//!   and cheap among feasible candidates.
//! * [`solve_pb4`] / [`theorem5_certificate`]: conservative companion with
//!   `gamma = T - 1 + beta` whose per-location multipliers yield a payment
//!   gap certificate for the searched policy.
//! * [`closed_form_rho`] / [`theorem6_certificate`]: for time-independent
//!   columns, the normal-approximation constant policy
//!   `alpha + x_beta sqrt(alpha / T)` (clamped at 1) and its certificate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::hard::{SolveOutcome, SolveStats};
use crate::model::{total_payment, PolicyMatrix, Scenario};
use crate::rng::{substream_seed, tag};
use crate::solver::{
    solve_budgeted, solve_budgeted_scalar, BudgetedSolution, PaymentTerm, DEFAULT_TOL,
};
use crate::tail::{exact_tail, k_threshold, monte_carlo_tail};

/// Interval width below which further bisection is pointless.
const MIN_INTERVAL: f64 = 1e-9;

/// Tuning knobs for the binary search.
#[derive(Debug, Clone, Serialize)]
pub struct SoftSearchParams {
    /// Upper edge of the acceptance band on `q = h - beta`.
    pub sigma_hi: f64,
    /// Lower edge of the acceptance band; keeps Monte Carlo error from
    /// accepting an infeasible policy.
    pub sigma_lo: f64,
    /// Monte Carlo experiments per tail estimate (before escalation).
    pub mc_samples: u64,
    pub master_seed: u64,
    /// Bisection steps per escalation round.
    pub max_bisect: u32,
    /// Sample multiplier applied on each escalation.
    pub escalation_factor: u64,
    /// Escalation rounds after the initial one.
    pub max_escalations: u32,
    /// Require an independent confirmation estimate before accepting an
    /// in-band probe, instead of trusting the single cached value.
    pub fresh_draws: bool,
}

impl Default for SoftSearchParams {
    fn default() -> Self {
        Self {
            sigma_hi: 0.02,
            sigma_lo: 0.01,
            mc_samples: 500,
            master_seed: 0,
            max_bisect: 60,
            escalation_factor: 10,
            max_escalations: 3,
            fresh_draws: false,
        }
    }
}

impl SoftSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_hi > self.sigma_lo && self.sigma_lo > 0.0) {
            return Err(Error::Invalid(format!(
                "search band must satisfy sigma_hi > sigma_lo > 0, got ({}, {})",
                self.sigma_lo, self.sigma_hi
            )));
        }
        if self.mc_samples == 0 || self.max_bisect == 0 {
            return Err(Error::Invalid(
                "mc_samples and max_bisect must be at least 1".into(),
            ));
        }
        if self.escalation_factor < 2 {
            return Err(Error::Invalid(
                "escalation_factor must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Search record for one location.
#[derive(Debug, Clone, Serialize)]
pub struct LocationSearch {
    pub location: usize,
    /// Accepted budget: the probe that landed inside the band, or the full
    /// horizon when `q(T) = 1 - beta` is already in-band.
    pub gamma_final: f64,
    /// Monte Carlo `q = h - beta` that triggered acceptance; lies in
    /// `[sigma_lo, sigma_hi]`.
    pub q_estimate: f64,
    /// Exact tail of the accepted column, recorded post hoc.
    pub exact_tail_check: f64,
    pub bisect_iters: u32,
    pub escalations: u32,
}

/// Output of the binary search across all locations.
#[derive(Debug, Clone, Serialize)]
pub struct SoftSolveOutcome {
    pub policy: PolicyMatrix,
    pub per_location: Vec<LocationSearch>,
    pub objective: f64,
}

/// Per-location gap certificate: the dual-weighted budget spread bounds
/// the distance from the relaxation to the certified policy, and hence the
/// policy's payment gap to the unknown optimum whenever the policy's
/// accepted budgets stay at or below the certificate's own.
#[derive(Debug, Clone, Serialize)]
pub struct SoftCertificate {
    pub bound: f64,
    /// "theorem5" for the conservative-companion bound, "theorem6" for the
    /// closed-form constant-policy bound.
    pub formula: String,
    pub duals: Vec<f64>,
    /// Per-location budget differences multiplying the duals.
    pub factors: Vec<f64>,
    /// Locations whose closed-form budget was clamped at `T` (theorem6 only).
    pub clamped: Vec<bool>,
}

fn require_soft(scenario: &Scenario) -> Result<(&[f64], f64)> {
    scenario
        .soft_spec()
        .ok_or_else(|| Error::Invalid("this operation needs a soft robustness spec".into()))
}

fn column_terms(scenario: &Scenario, l: usize) -> Vec<PaymentTerm> {
    (0..scenario.t())
        .map(|t| PaymentTerm::new(scenario.requirement(t, l), *scenario.curve(t, l)))
        .collect()
}

/// Budgeted column solve: minimize the column payment subject to
/// `sum_t rho_t >= gamma_l`.
pub fn solve_pb2_subproblem(
    scenario: &Scenario,
    location: usize,
    gamma_l: f64,
) -> Result<BudgetedSolution> {
    if location >= scenario.l() {
        return Err(Error::Dimension(format!(
            "location {location} out of range (L = {})",
            scenario.l()
        )));
    }
    if gamma_l > scenario.t() as f64 {
        return Err(Error::Infeasible(format!(
            "column budget {gamma_l} exceeds the horizon {}",
            scenario.t()
        )));
    }
    solve_budgeted(&column_terms(scenario, location), gamma_l, DEFAULT_TOL)
}

fn assemble_policy(scenario: &Scenario, columns: &[Vec<f64>]) -> Result<PolicyMatrix> {
    let (t, l) = (scenario.t(), scenario.l());
    let mut rho = vec![0.0; t * l];
    for (li, col) in columns.iter().enumerate() {
        for (ti, &v) in col.iter().enumerate() {
            rho[ti * l + li] = v;
        }
    }
    PolicyMatrix::new(t, l, rho)
}

fn per_location_outcome(scenario: &Scenario, gammas: &[f64]) -> Result<SolveOutcome> {
    let solved: Vec<Result<BudgetedSolution>> = exec::map_indexed(scenario.l(), |l| {
        solve_pb2_subproblem(scenario, l, gammas[l])
    });
    let mut columns = Vec::with_capacity(scenario.l());
    let mut duals = Vec::with_capacity(scenario.l());
    let mut stats = Vec::with_capacity(scenario.l());
    for sol in solved {
        let sol = sol?;
        duals.push(sol.dual);
        stats.push(SolveStats {
            residual: sol.residual,
            iterations: sol.iterations,
        });
        columns.push(sol.rho);
    }
    let policy = assemble_policy(scenario, &columns)?;
    let objective = total_payment(&policy, scenario)?;
    Ok(SolveOutcome {
        policy,
        objective,
        duals,
        stats,
    })
}

/// Relaxation: `gamma_l = T alpha_l beta`. Objective lower-bounds the
/// soft-constrained optimum.
pub fn solve_pb3(scenario: &Scenario) -> Result<SolveOutcome> {
    let (alpha, beta) = require_soft(scenario)?;
    let t = scenario.t() as f64;
    let gammas: Vec<f64> = alpha.iter().map(|a| t * a * beta).collect();
    per_location_outcome(scenario, &gammas)
}

/// Conservative companion: the common budget `gamma = T - 1 + beta` makes
/// every column feasible outright (the expected number of failed slots is
/// below `1 - beta`), so the objective upper-bounds the optimum.
pub fn solve_pb4(scenario: &Scenario) -> Result<SolveOutcome> {
    let (_, beta) = require_soft(scenario)?;
    let gamma = scenario.t() as f64 - 1.0 + beta;
    let gammas = vec![gamma; scenario.l()];
    per_location_outcome(scenario, &gammas)
}

/// Gap certificate from the conservative companion's multipliers:
/// `sum_l dual_l * (T - T alpha_l beta - 1 + beta)`.
pub fn theorem5_certificate(scenario: &Scenario) -> Result<SoftCertificate> {
    let (alpha, beta) = require_soft(scenario)?;
    let t = scenario.t() as f64;
    let conservative = solve_pb4(scenario)?;
    let factors: Vec<f64> = alpha.iter().map(|a| t - t * a * beta - 1.0 + beta).collect();
    let bound = conservative
        .duals
        .iter()
        .zip(&factors)
        .map(|(d, f)| d * f)
        .sum();
    Ok(SoftCertificate {
        bound,
        formula: "theorem5".into(),
        duals: conservative.duals,
        factors,
        clamped: vec![false; scenario.l()],
    })
}

struct LocationResult {
    column: Vec<f64>,
    search: LocationSearch,
}

fn search_location(
    scenario: &Scenario,
    location: usize,
    alpha: f64,
    beta: f64,
    params: &SoftSearchParams,
) -> Result<LocationResult> {
    let t = scenario.t();
    let k = k_threshold(t, alpha)?;

    // At gamma = T the column is all ones and its tail is exactly 1, so
    // q(T) = 1 - beta needs no sampling. If that already sits inside the
    // band the all-ones policy is the answer (this is the only reachable
    // acceptance when 1 - beta < sigma_hi).
    let q_top = 1.0 - beta;
    if params.sigma_lo <= q_top && q_top <= params.sigma_hi {
        let column = vec![1.0; t];
        let exact = exact_tail(&column, k)?;
        return Ok(LocationResult {
            column,
            search: LocationSearch {
                location,
                gamma_final: t as f64,
                q_estimate: q_top,
                exact_tail_check: exact,
                bisect_iters: 0,
                escalations: 0,
            },
        });
    }

    // Bisection brackets the acceptance band itself: the invariant is
    // q(lo) below the band and q(hi) above it, so the bracket always
    // contains the band's positive-width preimage and a midpoint must land
    // inside it within ~log2(T / width) steps. (Splitting at q = 0 instead
    // would home in on the bare feasibility root and, once a step lands in
    // [0, sigma_lo), could never move back up to reach the band.)
    // A noise-corrupted move can break the invariant; the interval then
    // collapses without an acceptance and the sample budget escalates.
    let mut trajectory: Vec<(f64, f64)> = Vec::new();
    for escalation in 0..=params.max_escalations {
        let samples = params
            .mc_samples
            .saturating_mul(params.escalation_factor.saturating_pow(escalation));
        let mut lo = 0.0f64;
        let mut hi = t as f64;
        let mut iters = 0u32;
        trajectory.clear();

        while iters < params.max_bisect && (hi - lo) >= MIN_INTERVAL {
            iters += 1;
            let mid = 0.5 * (lo + hi);
            let sol = solve_pb2_subproblem(scenario, location, mid)?;
            let probe = |salt: u64| -> Result<f64> {
                let seed = substream_seed(
                    params.master_seed,
                    &[
                        tag::SOFT_SEARCH,
                        location as u64,
                        u64::from(iters) | salt << 32,
                        u64::from(escalation),
                    ],
                );
                Ok(monte_carlo_tail(&sol.rho, k, samples, seed)?.value() - beta)
            };
            let mut q = probe(0)?;
            trajectory.push((mid, q));
            let mut in_band = params.sigma_lo <= q && q <= params.sigma_hi;
            if in_band && params.fresh_draws {
                // confirmation draw: accept only if an independent estimate
                // agrees, otherwise let it drive the next split
                q = probe(1)?;
                trajectory.push((mid, q));
                in_band = params.sigma_lo <= q && q <= params.sigma_hi;
            }
            if in_band {
                let exact = exact_tail(&sol.rho, k)?;
                return Ok(LocationResult {
                    column: sol.rho,
                    search: LocationSearch {
                        location,
                        gamma_final: mid,
                        q_estimate: q,
                        exact_tail_check: exact,
                        bisect_iters: iters,
                        escalations: escalation,
                    },
                });
            }
            if q < params.sigma_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    Err(Error::NonTermination {
        location,
        trajectory,
    })
}

/// Per-location binary search with Monte Carlo feasibility checks.
///
/// Rejects configurations whose acceptance band is unreachable: even the
/// all-ones column only attains `q = 1 - beta`, so `1 - beta >= sigma_lo`
/// is required. When Monte Carlo noise keeps the loop from settling inside
/// the band, the sample budget escalates (`escalation_factor`, at most
/// `max_escalations` rounds) before the location fails with its probe
/// trajectory.
pub fn algorithm1(scenario: &Scenario, params: &SoftSearchParams) -> Result<SoftSolveOutcome> {
    let (alpha, beta) = require_soft(scenario)?;
    params.validate()?;
    if 1.0 - beta < params.sigma_lo {
        return Err(Error::Config(format!(
            "acceptance band is unreachable: 1 - beta = {} is below sigma_lo = {}",
            1.0 - beta,
            params.sigma_lo
        )));
    }

    let alpha = alpha.to_vec();
    let results: Vec<Result<LocationResult>> = exec::map_indexed(scenario.l(), |l| {
        search_location(scenario, l, alpha[l], beta, params)
    });

    let mut columns = Vec::with_capacity(scenario.l());
    let mut per_location = Vec::with_capacity(scenario.l());
    for res in results {
        let res = res?;
        columns.push(res.column);
        per_location.push(res.search);
    }
    let policy = assemble_policy(scenario, &columns)?;
    let objective = total_payment(&policy, scenario)?;
    Ok(SoftSolveOutcome {
        policy,
        per_location,
        objective,
    })
}

/// Normal-approximation constant accept probability for one location:
/// `min(1, alpha + x_beta sqrt(alpha / T))`.
pub fn closed_form_rho(t: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let x_beta = crate::tail::inverse_normal_cdf(beta)?;
    Ok((alpha + x_beta * (alpha / t as f64).sqrt()).min(1.0))
}

/// The constant-column policy built from [`closed_form_rho`], plus the
/// per-location values. Requires every column to be time independent.
pub fn closed_form_policy(scenario: &Scenario) -> Result<(PolicyMatrix, Vec<f64>)> {
    let (alpha, beta) = require_soft(scenario)?;
    for l in 0..scenario.l() {
        if !scenario.column_is_time_independent(l) {
            return Err(Error::Invalid(format!(
                "column {l} is not time independent; the constant policy does not apply"
            )));
        }
    }
    let rhos: Vec<f64> = alpha
        .iter()
        .map(|&a| closed_form_rho(scenario.t(), a, beta))
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<f64>> = rhos.iter().map(|&r| vec![r; scenario.t()]).collect();
    let policy = assemble_policy(scenario, &columns)?;
    Ok((policy, rhos))
}

/// Certificate for the closed-form policy: budgets
/// `gamma_l = T alpha_l + x_beta sqrt(T alpha_l)` (clamped at `T`, flagged),
/// multipliers from the identical-term shortcut at those budgets, bound
/// `sum_l dual_l (gamma_l - T alpha_l beta)`.
pub fn theorem6_certificate(scenario: &Scenario) -> Result<SoftCertificate> {
    let (alpha, beta) = require_soft(scenario)?;
    let t = scenario.t() as f64;
    let x_beta = crate::tail::inverse_normal_cdf(beta)?;
    let mut duals = Vec::with_capacity(scenario.l());
    let mut factors = Vec::with_capacity(scenario.l());
    let mut clamped = Vec::with_capacity(scenario.l());
    for (l, &a) in alpha.iter().enumerate() {
        if !scenario.column_is_time_independent(l) {
            return Err(Error::Invalid(format!(
                "column {l} is not time independent; the constant policy does not apply"
            )));
        }
        let raw_gamma = t * a + x_beta * (t * a).sqrt();
        let gamma = raw_gamma.min(t);
        clamped.push(raw_gamma > t);
        let term = PaymentTerm::new(scenario.requirement(0, l), *scenario.curve(0, l));
        let sol = solve_budgeted_scalar(&term, scenario.t(), gamma)?;
        duals.push(sol.dual);
        factors.push(gamma - t * a * beta);
    }
    let bound = duals.iter().zip(&factors).map(|(d, f)| d * f).sum();
    Ok(SoftCertificate {
        bound,
        formula: "theorem6".into(),
        duals,
        factors,
        clamped,
    })
}

/// Per-location feasibility of a policy under the soft spec, via the exact
/// tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocationFeasibility {
    pub location: usize,
    pub k: usize,
    pub exact_tail: f64,
    /// `exact_tail - beta`; nonnegative iff feasible.
    pub slack: f64,
    pub feasible: bool,
}

pub fn verify_pb1(policy: &PolicyMatrix, scenario: &Scenario) -> Result<Vec<LocationFeasibility>> {
    let (alpha, beta) = require_soft(scenario)?;
    if policy.t() != scenario.t() || policy.l() != scenario.l() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, scenario is {}x{}",
            policy.t(),
            policy.l(),
            scenario.t(),
            scenario.l()
        )));
    }
    (0..scenario.l())
        .map(|l| {
            let k = k_threshold(scenario.t(), alpha[l])?;
            let tail = exact_tail(&policy.column(l), k)?;
            let slack = tail - beta;
            Ok(LocationFeasibility {
                location: l,
                k,
                exact_tail: tail,
                slack,
                feasible: slack >= 0.0,
            })
        })
        .collect()
}
