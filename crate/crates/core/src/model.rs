//! Domain model: bidding curves, scenarios, policies and the two robustness
//! functionals.
//!
//! A task owner posts a bid `b` per (time slot, location) cell; a potential
//! participant accepts with probability `rho(b)`. We work with the inverse
//! mapping, the bidding function `b(rho)`: the bid needed to induce accept
//! probability `rho`. With `r` participants required per cell, the expected
//! cell payment is `f(rho) = rho * r * b(rho)` and the total expected payment
//! of a policy is `F(rho) = sum_{t,l} f_tl(rho_tl)`.
//!
//! Two robustness functionals drive everything downstream:
//!
//! * `G(rho) = 1 - prod_{t,l} rho_tl`: joint failure probability over all
//!   cells (hard constraint `G <= epsilon`);
//! * `H(rho) = sum_{t,l} (1 - rho_tl)`: expected number of unsatisfied
//!   cells, the additive surrogate obtained from Boole's inequality.

use serde::Serialize;

use crate::error::{Error, Result};

/// A strictly increasing convex bidding function from the power family
/// `b(rho) = scale * rho^exponent`, with `scale > 0` and `exponent >= 1`.
///
/// `b_max` caps the admissible bid range `[0, b_max]`; it is validated
/// (`b(1) = scale <= b_max`) but never used to truncate, since optimal
/// policies always price within `[0, b(1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiddingCurve {
    scale: f64,
    exponent: f64,
    b_max: f64,
}

/// Anything that can serve as a bidding function: the bid and its derivative
/// in `rho`. Implementations must be strictly increasing and convex on
/// `[0, 1]` with `b(0) = 0`; the solver checks the induced marginal cost for
/// a sign violation but cannot prove convexity for arbitrary curves.
pub trait Curve {
    fn bid(&self, rho: f64) -> f64;
    fn bid_derivative(&self, rho: f64) -> f64;
}

impl BiddingCurve {
    /// Power-family curve with the conventional cap `b_max = b(1) = scale`.
    pub fn new(scale: f64, exponent: f64) -> Result<Self> {
        Self::with_cap(scale, exponent, scale)
    }

    /// Power-family curve with an explicit bid cap.
    pub fn with_cap(scale: f64, exponent: f64, b_max: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!(
                "curve scale must be positive and finite, got {scale}"
            )));
        }
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::Invalid(format!(
                "curve exponent must be >= 1 for convexity, got {exponent}"
            )));
        }
        if !(b_max >= scale) {
            return Err(Error::Invalid(format!(
                "bid cap {b_max} is below b(1) = {scale}"
            )));
        }
        Ok(Self {
            scale,
            exponent,
            b_max,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }
}

impl Curve for BiddingCurve {
    fn bid(&self, rho: f64) -> f64 {
        self.scale * rho.powf(self.exponent)
    }

    fn bid_derivative(&self, rho: f64) -> f64 {
        self.scale * self.exponent * rho.powf(self.exponent - 1.0)
    }
}

/// Robustness requirement attached to a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RobustnessSpec {
    /// Joint success probability over all cells must reach `1 - epsilon`.
    ///
    /// `epsilon = 0` is admitted and degenerates to the all-ones policy.
    Hard { epsilon: f64 },
    /// Per location `l`: with probability at least `beta`, the fraction of
    /// satisfied slots over the horizon reaches `alpha[l]`.
    Soft { alpha: Vec<f64>, beta: f64 },
}

impl RobustnessSpec {
    fn validate(&self, locations: usize) -> Result<()> {
        match self {
            RobustnessSpec::Hard { epsilon } => {
                if !(*epsilon >= 0.0 && *epsilon < 1.0) {
                    return Err(Error::Invalid(format!(
                        "spec.epsilon must lie in [0, 1), got {epsilon}"
                    )));
                }
            }
            RobustnessSpec::Soft { alpha, beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::Invalid(format!(
                        "spec.beta must lie in (0, 1), got {beta}"
                    )));
                }
                if alpha.len() != locations {
                    return Err(Error::Dimension(format!(
                        "spec.alpha has {} entries, expected one per location ({locations})",
                        alpha.len()
                    )));
                }
                for (l, a) in alpha.iter().enumerate() {
                    if !(*a > 0.0 && *a <= 1.0) {
                        return Err(Error::Invalid(format!(
                            "spec.alpha[{l}] must lie in (0, 1], got {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A complete problem instance: horizon `T`, locations `L`, per-cell
/// participant requirements, per-cell bidding curves and the robustness spec.
///
/// Matrices are stored row-major: cell `(t, l)` lives at index `t * L + l`.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    t: usize,
    l: usize,
    requirement: Vec<u32>,
    curves: Vec<BiddingCurve>,
    spec: RobustnessSpec,
}

impl Scenario {
    pub fn new(
        t: usize,
        l: usize,
        requirement: Vec<u32>,
        curves: Vec<BiddingCurve>,
        spec: RobustnessSpec,
    ) -> Result<Self> {
        if t == 0 || l == 0 {
            return Err(Error::Invalid(format!(
                "scenario needs T >= 1 and L >= 1, got T={t}, L={l}"
            )));
        }
        if requirement.len() != t * l {
            return Err(Error::Dimension(format!(
                "requirement has {} entries, expected T*L = {}",
                requirement.len(),
                t * l
            )));
        }
        if curves.len() != t * l {
            return Err(Error::Dimension(format!(
                "curves has {} entries, expected T*L = {}",
                curves.len(),
                t * l
            )));
        }
        if let Some(idx) = requirement.iter().position(|&r| r < 1) {
            return Err(Error::Invalid(format!(
                "requirement[{}][{}] must be >= 1",
                idx / l,
                idx % l
            )));
        }
        spec.validate(l)?;
        Ok(Self {
            t,
            l,
            requirement,
            curves,
            spec,
        })
    }

    /// Convenience constructor for one curve and one requirement per
    /// location, replicated across the horizon.
    pub fn time_independent(
        t: usize,
        per_location_requirement: Vec<u32>,
        per_location_curves: Vec<BiddingCurve>,
        spec: RobustnessSpec,
    ) -> Result<Self> {
        let l = per_location_curves.len();
        if per_location_requirement.len() != l {
            return Err(Error::Dimension(format!(
                "{} requirements for {} location curves",
                per_location_requirement.len(),
                l
            )));
        }
        let mut requirement = Vec::with_capacity(t * l);
        let mut curves = Vec::with_capacity(t * l);
        for _ in 0..t {
            requirement.extend_from_slice(&per_location_requirement);
            curves.extend_from_slice(&per_location_curves);
        }
        Self::new(t, l, requirement, curves, spec)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Total number of (time, location) cells.
    pub fn cells(&self) -> usize {
        self.t * self.l
    }

    pub fn requirement(&self, t: usize, l: usize) -> u32 {
        self.requirement[t * self.l + l]
    }

    pub fn curve(&self, t: usize, l: usize) -> &BiddingCurve {
        &self.curves[t * self.l + l]
    }

    pub fn spec(&self) -> &RobustnessSpec {
        &self.spec
    }

    pub fn hard_epsilon(&self) -> Option<f64> {
        match &self.spec {
            RobustnessSpec::Hard { epsilon } => Some(*epsilon),
            RobustnessSpec::Soft { .. } => None,
        }
    }

    pub fn soft_spec(&self) -> Option<(&[f64], f64)> {
        match &self.spec {
            RobustnessSpec::Hard { .. } => None,
            RobustnessSpec::Soft { alpha, beta } => Some((alpha, *beta)),
        }
    }

    /// True when every slot in column `l` shares one requirement and one
    /// curve, which is what the closed-form constant policy requires.
    pub fn column_is_time_independent(&self, l: usize) -> bool {
        let r0 = self.requirement(0, l);
        let c0 = *self.curve(0, l);
        (1..self.t).all(|t| self.requirement(t, l) == r0 && *self.curve(t, l) == c0)
    }
}

/// An accept-probability policy: one `rho_tl` in `[0, 1]` per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyMatrix {
    t: usize,
    l: usize,
    rho: Vec<f64>,
}

impl PolicyMatrix {
    pub fn new(t: usize, l: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != t * l {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected T*L = {}",
                rho.len(),
                t * l
            )));
        }
        if let Some(idx) = rho.iter().position(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return Err(Error::Invalid(format!(
                "policy entry [{}][{}] = {} is outside [0, 1]",
                idx / l,
                idx % l,
                rho[idx]
            )));
        }
        Ok(Self { t, l, rho })
    }

    pub fn constant(t: usize, l: usize, value: f64) -> Result<Self> {
        Self::new(t, l, vec![value; t * l])
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn get(&self, t: usize, l: usize) -> f64 {
        self.rho[t * self.l + l]
    }

    /// Row-major cell values.
    pub fn entries(&self) -> &[f64] {
        &self.rho
    }

    /// The accept probabilities of column `l` across the horizon.
    pub fn column(&self, l: usize) -> Vec<f64> {
        (0..self.t).map(|t| self.get(t, l)).collect()
    }

    /// Nested row representation, convenient for serialization.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.t)
            .map(|t| self.rho[t * self.l..(t + 1) * self.l].to_vec())
            .collect()
    }

    /// Bid prices induced by this policy under the scenario's curves.
    pub fn bid_rows(&self, scenario: &Scenario) -> Result<Vec<Vec<f64>>> {
        if self.t != scenario.t() || self.l != scenario.l() {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, scenario is {}x{}",
                self.t,
                self.l,
                scenario.t(),
                scenario.l()
            )));
        }
        Ok((0..self.t)
            .map(|t| {
                (0..self.l)
                    .map(|l| scenario.curve(t, l).bid(self.get(t, l)))
                    .collect()
            })
            .collect())
    }
}

/// Expected payment of one cell: `rho * r * b(rho)`.
pub fn expected_cell_payment(rho: f64, r: u32, curve: &BiddingCurve) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!(
            "accept probability must lie in [0, 1], got {rho}"
        )));
    }
    Ok(rho * f64::from(r) * curve.bid(rho))
}

/// Total expected payment `F(rho)` over all cells.
pub fn total_payment(policy: &PolicyMatrix, scenario: &Scenario) -> Result<f64> {
    if policy.t() != scenario.t() || policy.l() != scenario.l() {
        return Err(Error::Dimension(format!(
            "policy is {}x{}, scenario is {}x{}",
            policy.t(),
            policy.l(),
            scenario.t(),
            scenario.l()
        )));
    }
    let mut sum = 0.0;
    for t in 0..scenario.t() {
        for l in 0..scenario.l() {
            sum +=
                expected_cell_payment(policy.get(t, l), scenario.requirement(t, l), scenario.curve(t, l))?;
        }
    }
    Ok(sum)
}

/// Joint probability that every cell meets its requirement:
/// `prod_{t,l} rho_tl`.
///
/// Multiplied directly while the running product stays in normal range;
/// once it threatens to underflow the value switches to `exp(sum log rho)`,
/// which keeps products as small as 1e-300 meaningful. Any exact zero
/// short-circuits to 0.
pub fn joint_success_probability(policy: &PolicyMatrix) -> f64 {
    let mut product = 1.0f64;
    let mut log_sum = 0.0f64;
    let mut underflowed = false;
    for &p in policy.entries() {
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
        product *= p;
        if product < 1e-290 {
            underflowed = true;
        }
    }
    if underflowed {
        log_sum.exp()
    } else {
        product
    }
}

/// Expected number of unsatisfied cells: `H(rho) = sum_{t,l} (1 - rho_tl)`.
pub fn expected_unsatisfiability(policy: &PolicyMatrix) -> f64 {
    policy.entries().iter().map(|p| 1.0 - p).sum()
}
