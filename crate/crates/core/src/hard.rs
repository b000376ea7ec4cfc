//! Hard-constraint pipeline.
//!
//! The exact problem asks for minimum total payment subject to the joint
//! success probability over all `T*L` cells reaching `1 - epsilon`:
//! `prod rho >= 1 - epsilon`. The product constraint is combinatorial, so we
//! solve two additive surrogates instead and certify how far they can be
//! from the exact optimum:
//!
//! * conservative form (`H(rho) <= epsilon`, i.e. mass `>= TL - epsilon`):
//!   every feasible point also satisfies the product constraint, so its
//!   optimum upper-bounds the exact one;
//! * relaxed form (`H(rho) <= TL epsilon`, mass `>= TL (1 - epsilon)`):
//!   its optimum lower-bounds the exact one.
//!
//! With the conservative solve's multiplier `lambda`, the distance from the
//! conservative optimum to the exact one is at most
//! `lambda * min{(TL-1) eps, TL(TL-1)/2 * eps^2}`, a certificate computed
//! for free. A grid oracle solves the exact product-constrained problem at
//! toy sizes to validate all of this end to end.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{joint_success_probability, PolicyMatrix, Scenario};
use crate::solver::{solve_budgeted, Integrand, PaymentTerm, DEFAULT_TOL};

/// A solved policy with its objective and the mass-constraint multiplier(s):
/// one for the hard solves, one per location for the soft relaxations.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub policy: PolicyMatrix,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub stats: Vec<SolveStats>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: u32,
}

impl SolveOutcome {
    /// The single multiplier of a hard-constraint solve.
    pub fn dual(&self) -> f64 {
        self.duals.first().copied().unwrap_or(0.0)
    }
}

/// Which bound expression produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateFormula {
    /// `lambda * TL(TL-1)/2 * eps^2`
    Theorem1,
    /// `lambda * (TL-1) * eps`
    Theorem2,
    /// minimum of the two
    Theorem3Min,
}

/// A proven upper bound on the payment gap to the (unknown) exact optimum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapCertificate {
    pub bound: f64,
    pub dual: f64,
    pub formula: CertificateFormula,
    pub epsilon: f64,
    pub cells: usize,
}

impl GapCertificate {
    pub fn quadratic_bound(dual: f64, epsilon: f64, cells: usize) -> f64 {
        let n = cells as f64;
        dual * n * (n - 1.0) / 2.0 * epsilon * epsilon
    }

    pub fn linear_bound(dual: f64, epsilon: f64, cells: usize) -> f64 {
        let n = cells as f64;
        dual * (n - 1.0) * epsilon
    }
}

fn cell_terms(scenario: &Scenario) -> Vec<PaymentTerm> {
    let mut terms = Vec::with_capacity(scenario.cells());
    for t in 0..scenario.t() {
        for l in 0..scenario.l() {
            terms.push(PaymentTerm::new(
                scenario.requirement(t, l),
                *scenario.curve(t, l),
            ));
        }
    }
    terms
}

fn require_hard(scenario: &Scenario) -> Result<f64> {
    scenario.hard_epsilon().ok_or_else(|| {
        Error::Invalid("this operation needs a hard robustness spec".into())
    })
}

fn budgeted_outcome(scenario: &Scenario, gamma: f64) -> Result<SolveOutcome> {
    let terms = cell_terms(scenario);
    let sol = solve_budgeted(&terms, gamma, DEFAULT_TOL)?;
    let policy = PolicyMatrix::new(scenario.t(), scenario.l(), sol.rho)?;
    Ok(SolveOutcome {
        policy,
        objective: sol.objective,
        duals: vec![sol.dual],
        stats: vec![SolveStats {
            residual: sol.residual,
            iterations: sol.iterations,
        }],
    })
}

/// Conservative solve: mass `>= TL - epsilon`. The returned policy is
/// feasible for the exact product constraint.
pub fn solve_pa2(scenario: &Scenario) -> Result<SolveOutcome> {
    let epsilon = require_hard(scenario)?;
    budgeted_outcome(scenario, scenario.cells() as f64 - epsilon)
}

/// Relaxed solve: mass `>= TL (1 - epsilon)`. Its objective lower-bounds the
/// exact optimum.
pub fn solve_pa3(scenario: &Scenario) -> Result<SolveOutcome> {
    let epsilon = require_hard(scenario)?;
    budgeted_outcome(scenario, scenario.cells() as f64 * (1.0 - epsilon))
}

/// Feasibility of a policy for the exact product constraint.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Pa1Check {
    pub feasible: bool,
    /// `prod rho - (1 - epsilon)`; nonnegative iff feasible.
    pub slack: f64,
}

pub fn verify_pa1(policy: &PolicyMatrix, epsilon: f64) -> Pa1Check {
    let slack = joint_success_probability(policy) - (1.0 - epsilon);
    Pa1Check {
        feasible: slack >= 0.0,
        slack,
    }
}

/// Gap certificate for a conservative-solve outcome, using the minimum of
/// the linear and quadratic bound expressions.
pub fn certify_gap(outcome: &SolveOutcome, scenario: &Scenario) -> Result<GapCertificate> {
    let epsilon = require_hard(scenario)?;
    let cells = scenario.cells();
    let dual = outcome.dual();
    let bound = GapCertificate::linear_bound(dual, epsilon, cells)
        .min(GapCertificate::quadratic_bound(dual, epsilon, cells));
    Ok(GapCertificate {
        bound,
        dual,
        formula: CertificateFormula::Theorem3Min,
        epsilon,
        cells,
    })
}

/// Largest cell count the grid oracle accepts.
pub const BRUTE_FORCE_MAX_CELLS: usize = 4;

/// Exact solve of the product-constrained problem by grid search; a test
/// oracle, deliberately independent of the water-filling path.
///
/// All-but-one coordinates range over the grid `{step, 2 step, ..., 1}`; the
/// last coordinate is the smallest grid value that restores feasibility,
/// which is optimal because the objective increases coordinatewise. When all
/// cells are identical the optimum is symmetric and the constraint is tight,
/// so the scan reduces to the single point `(1 - eps)^(1/n)` per coordinate.
pub fn brute_force_pa1(scenario: &Scenario, step: f64) -> Result<SolveOutcome> {
    let epsilon = require_hard(scenario)?;
    let n = scenario.cells();
    if n > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::Domain(format!(
            "grid oracle is restricted to at most {BRUTE_FORCE_MAX_CELLS} cells, got {n}"
        )));
    }
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::Domain(format!(
            "grid step must lie in (0, 1e-2], got {step}"
        )));
    }
    let terms = cell_terms(scenario);
    let target = 1.0 - epsilon;

    let identical = terms.iter().all(|t| *t == terms[0]);
    if identical {
        let x = target.powf(1.0 / n as f64);
        let rho = vec![x; n];
        let objective = terms.iter().map(|t| t.cost(x)).sum();
        return Ok(SolveOutcome {
            policy: PolicyMatrix::new(scenario.t(), scenario.l(), rho)?,
            objective,
            duals: vec![],
            stats: vec![],
        });
    }

    let levels = (1.0 / step).ceil() as usize;
    let grid = |i: usize| (i as f64) / levels as f64; // i in 1..=levels
    let mut best_obj = f64::INFINITY;
    let mut best: Vec<usize> = Vec::new();

    // odometer over the first n-1 coordinates
    let free = n - 1;
    let mut idx = vec![1usize; free];
    loop {
        let mut partial = 1.0;
        let mut partial_cost = 0.0;
        for (j, &i) in idx.iter().enumerate() {
            partial *= grid(i);
            partial_cost += terms[j].cost(grid(i));
        }
        if partial >= target && partial_cost < best_obj {
            // last coordinate: smallest feasible grid level (the quotient
            // can round just past 1 when partial sits on the boundary)
            let need = (target / partial).min(1.0);
            let last = ((need * levels as f64).ceil() as usize).max(1);
            if last <= levels {
                let obj = partial_cost + terms[free].cost(grid(last));
                if obj < best_obj {
                    best_obj = obj;
                    best = idx.clone();
                    best.push(last);
                }
            }
        }
        // advance odometer
        let mut pos = 0;
        loop {
            if pos == free {
                break;
            }
            idx[pos] += 1;
            if idx[pos] <= levels {
                break;
            }
            idx[pos] = 1;
            pos += 1;
        }
        if pos == free {
            break;
        }
    }

    if best.is_empty() {
        return Err(Error::Infeasible(
            "grid oracle found no feasible point (epsilon too small for the grid)".into(),
        ));
    }
    let rho: Vec<f64> = best.iter().map(|&i| grid(i)).collect();
    Ok(SolveOutcome {
        policy: PolicyMatrix::new(scenario.t(), scenario.l(), rho)?,
        objective: best_obj,
        duals: vec![],
        stats: vec![],
    })
}

/// Lipschitz slack of the grid oracle: moving every coordinate by one grid
/// cell changes the objective by at most `step * sum_i f_i'(1)`.
pub fn brute_force_slack(scenario: &Scenario, step: f64) -> f64 {
    cell_terms(scenario)
        .iter()
        .map(|t| t.marginal(1.0))
        .sum::<f64>()
        * step
}
