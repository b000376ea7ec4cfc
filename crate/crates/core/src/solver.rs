//! Separable convex solver for the budgeted mass problem
//!
//! ```text
//!     minimize   sum_i f_i(rho_i)
//!     subject to sum_i rho_i >= gamma,    rho_i in [0, 1],
//! ```
//!
//! where every `f_i` is strictly increasing and strictly convex. At the
//! optimum all interior coordinates share one marginal cost `f_i'(rho_i) =
//! nu` (the water-filling condition), coordinates whose marginal never
//! reaches `nu` sit at 1, and `nu` equals the KKT multiplier of the mass
//! constraint. We bisect on `nu`: `sum_i clamp((f_i')^{-1}(nu))` is
//! continuous and nondecreasing in `nu`, zero at `nu = 0` and `n` at
//! `nu = max_i f_i'(1)`, so a sign change is guaranteed.
//!
//! The multiplier is exposed because downstream optimality-gap certificates
//! are linear in it.

use crate::error::{Error, Result};
use crate::model::{BiddingCurve, Curve};

/// Hard cap on bisection steps; with the default tolerance the loop
/// terminates around 50.
const MAX_BISECT: u32 = 200;

/// Default tolerance on the mass residual `|sum rho - gamma|`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// One separable cost term: a value, its marginal, and the inverse marginal.
pub trait Integrand {
    fn cost(&self, rho: f64) -> f64;
    fn marginal(&self, rho: f64) -> f64;

    /// Solve `marginal(rho) = nu` for `rho` in `[0, 1]`, clamping outside.
    /// The default inverts numerically; closed forms should override.
    fn inverse_marginal(&self, nu: f64) -> f64 {
        if nu <= self.marginal(0.0) {
            return 0.0;
        }
        if nu >= self.marginal(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.marginal(mid) < nu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// The payment integrand `f(rho) = rho * r * b(rho)` for the power family,
/// i.e. `f(rho) = r * scale * rho^(exponent + 1)` with a closed-form inverse
/// marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaymentTerm {
    pub r: f64,
    pub curve: BiddingCurve,
}

impl PaymentTerm {
    pub fn new(r: u32, curve: BiddingCurve) -> Self {
        Self {
            r: f64::from(r),
            curve,
        }
    }
}

impl Integrand for PaymentTerm {
    fn cost(&self, rho: f64) -> f64 {
        self.r * self.curve.scale() * rho.powf(self.curve.exponent() + 1.0)
    }

    fn marginal(&self, rho: f64) -> f64 {
        let p = self.curve.exponent();
        self.r * self.curve.scale() * (p + 1.0) * rho.powf(p)
    }

    fn inverse_marginal(&self, nu: f64) -> f64 {
        let p = self.curve.exponent();
        let k = self.r * self.curve.scale() * (p + 1.0);
        if nu <= 0.0 {
            return 0.0;
        }
        (nu / k).powf(1.0 / p).clamp(0.0, 1.0)
    }
}

/// Payment integrand over an arbitrary [`Curve`]; the inverse marginal falls
/// back to bisection.
#[derive(Debug, Clone, Copy)]
pub struct CurveTerm<C> {
    pub r: f64,
    pub curve: C,
}

impl<C: Curve> Integrand for CurveTerm<C> {
    fn cost(&self, rho: f64) -> f64 {
        rho * self.r * self.curve.bid(rho)
    }

    fn marginal(&self, rho: f64) -> f64 {
        self.r * (self.curve.bid(rho) + rho * self.curve.bid_derivative(rho))
    }
}

/// A budgeted problem instance: the ordered terms and the required mass.
#[derive(Debug, Clone)]
pub struct BudgetedProblem<T = PaymentTerm> {
    terms: Vec<T>,
    gamma: f64,
}

impl<T: Integrand> BudgetedProblem<T> {
    pub fn new(terms: Vec<T>, gamma: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("budgeted problem needs at least one term".into()));
        }
        if !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must be finite, got {gamma}")));
        }
        screen_convexity(&terms)?;
        Ok(Self { terms, gamma })
    }

    pub fn terms(&self) -> &[T] {
        &self.terms
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn solve(&self, tol: f64) -> Result<BudgetedSolution> {
        solve_budgeted(&self.terms, self.gamma, tol)
    }
}

/// Solver output: the optimal coordinates, objective, and the common
/// marginal value (the mass constraint's KKT multiplier).
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedSolution {
    pub rho: Vec<f64>,
    pub objective: f64,
    pub dual: f64,
    /// `sum rho - gamma` at return.
    pub residual: f64,
    pub iterations: u32,
}

fn objective_of<T: Integrand>(terms: &[T], rho: &[f64]) -> f64 {
    terms.iter().zip(rho).map(|(t, &x)| t.cost(x)).sum()
}

/// Cheap convexity screen: the marginal must be finite and strictly
/// increasing where we sample it. A sign violation here means the term
/// breaks the solver's contract.
fn screen_convexity<T: Integrand>(terms: &[T]) -> Result<()> {
    for (i, term) in terms.iter().enumerate() {
        let mut prev = term.marginal(0.0);
        for x in [0.25, 0.5, 0.75, 1.0] {
            let m = term.marginal(x);
            if !(m > prev) || !m.is_finite() {
                return Err(Error::Invalid(format!(
                    "term {i} violates strict convexity: marginal not increasing at rho={x}"
                )));
            }
            prev = m;
        }
    }
    Ok(())
}

/// Water-filling solve of the budgeted problem.
///
/// `gamma <= 0` returns the all-zero vector with a zero multiplier;
/// `gamma = n` returns all ones; `gamma > n` is infeasible.
///
/// ```
/// use robust_crowdsense::model::BiddingCurve;
/// use robust_crowdsense::solver::{solve_budgeted, PaymentTerm, DEFAULT_TOL};
///
/// // two copies of f(x) = x^4 sharing one unit of mass split evenly
/// let term = PaymentTerm::new(1, BiddingCurve::new(1.0, 3.0)?);
/// let solution = solve_budgeted(&[term, term], 1.0, DEFAULT_TOL)?;
/// assert!((solution.rho[0] - 0.5).abs() < 1e-9);
/// assert!((solution.dual - 0.5).abs() < 1e-8); // common marginal f'(0.5)
/// # Ok::<(), robust_crowdsense::Error>(())
/// ```
pub fn solve_budgeted<T: Integrand>(terms: &[T], gamma: f64, tol: f64) -> Result<BudgetedSolution> {
    if terms.is_empty() {
        return Err(Error::Invalid("budgeted problem needs at least one term".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    screen_convexity(terms)?;
    let n = terms.len() as f64;
    if gamma > n {
        return Err(Error::Infeasible(format!(
            "required mass {gamma} exceeds the number of coordinates {n}"
        )));
    }
    if gamma <= 0.0 {
        let rho = vec![0.0; terms.len()];
        return Ok(BudgetedSolution {
            objective: objective_of(terms, &rho),
            rho,
            dual: 0.0,
            residual: -gamma,
            iterations: 0,
        });
    }
    if gamma >= n {
        let rho = vec![1.0; terms.len()];
        let dual = terms
            .iter()
            .map(|t| t.marginal(1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        return Ok(BudgetedSolution {
            objective: objective_of(terms, &rho),
            rho,
            dual,
            residual: n - gamma,
            iterations: 0,
        });
    }

    let mass_at = |nu: f64| -> f64 { terms.iter().map(|t| t.inverse_marginal(nu)).sum() };

    // Convergence is one-sided: the mass constraint reads `sum rho >= gamma`,
    // so the accepted residual lies in [0, tol]. The upper bracket endpoint
    // always carries mass >= gamma, which gives a safe fallback if the
    // midpoint sequence exhausts the iteration budget on the short side.
    let mut lo = 0.0;
    let mut hi = terms
        .iter()
        .map(|t| t.marginal(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut nu = 0.5 * (lo + hi);
    let mut iterations = 0;
    let mut residual = mass_at(nu) - gamma;
    while !(residual >= 0.0 && residual <= tol) && iterations < MAX_BISECT {
        if residual < 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        nu = 0.5 * (lo + hi);
        residual = mass_at(nu) - gamma;
        iterations += 1;
    }
    if residual < 0.0 {
        nu = hi;
        residual = mass_at(nu) - gamma;
    }

    let rho: Vec<f64> = terms.iter().map(|t| t.inverse_marginal(nu)).collect();
    Ok(BudgetedSolution {
        objective: objective_of(terms, &rho),
        rho,
        dual: nu,
        residual,
        iterations,
    })
}

/// Identical-term shortcut: with all `n` terms equal the optimum is the
/// constant vector `gamma / n`, so no search is needed.
pub fn solve_budgeted_scalar<T: Integrand>(term: &T, n: usize, gamma: f64) -> Result<BudgetedSolution> {
    if n == 0 {
        return Err(Error::Invalid("budgeted problem needs at least one term".into()));
    }
    if !(0.0..=n as f64).contains(&gamma) {
        return Err(Error::Infeasible(format!(
            "required mass {gamma} lies outside [0, {n}]"
        )));
    }
    let x = (gamma / n as f64).clamp(0.0, 1.0);
    let dual = if gamma <= 0.0 { 0.0 } else { term.marginal(x) };
    Ok(BudgetedSolution {
        rho: vec![x; n],
        objective: n as f64 * term.cost(x),
        dual,
        residual: 0.0,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BiddingCurve;

    fn unit_term() -> PaymentTerm {
        PaymentTerm::new(1, BiddingCurve::new(1.0, 3.0).unwrap())
    }

    #[test]
    fn symmetric_two_term_split() {
        // two copies of f(x) = x^4, gamma = 1 -> (0.5, 0.5), objective 0.125,
        // dual f'(0.5) = 4 * 0.125 = 0.5
        let terms = vec![unit_term(), unit_term()];
        let sol = solve_budgeted(&terms, 1.0, DEFAULT_TOL).unwrap();
        assert!((sol.rho[0] - 0.5).abs() < 1e-9);
        assert!((sol.rho[1] - 0.5).abs() < 1e-9);
        assert!((sol.objective - 0.125).abs() < 1e-9);
        assert!((sol.dual - 0.5).abs() < 1e-8);
        assert!((0.0..=DEFAULT_TOL).contains(&sol.residual));
    }

    #[test]
    fn asymmetric_two_term_matches_stationarity() {
        // f1 = x^4, f2 = 6 y^4 (r=2, scale=3), gamma = 1.2.
        // Equal marginals: 4 x^3 = 24 y^3 -> x = 6^(1/3) y, frozen from an
        // independent grid search at step 1e-5.
        let terms = vec![
            unit_term(),
            PaymentTerm::new(2, BiddingCurve::new(3.0, 3.0).unwrap()),
        ];
        let sol = solve_budgeted(&terms, 1.2, DEFAULT_TOL).unwrap();
        assert!((sol.rho[0] - 0.774033).abs() < 1e-5);
        assert!((sol.rho[1] - 0.425967).abs() < 1e-5);
        assert!((sol.objective - 0.556493274).abs() < 1e-7);
        assert!((sol.dual - 1.854978).abs() < 1e-4);
    }

    #[test]
    fn slack_constraint_returns_zero() {
        let terms = vec![unit_term(), unit_term()];
        let sol = solve_budgeted(&terms, 0.0, DEFAULT_TOL).unwrap();
        assert_eq!(sol.rho, vec![0.0, 0.0]);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.dual, 0.0);
    }

    #[test]
    fn full_budget_returns_ones() {
        let terms = vec![unit_term(), unit_term(), unit_term()];
        let sol = solve_budgeted(&terms, 3.0, DEFAULT_TOL).unwrap();
        assert_eq!(sol.rho, vec![1.0, 1.0, 1.0]);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn over_budget_is_infeasible() {
        let terms = vec![unit_term()];
        assert!(matches!(
            solve_budgeted(&terms, 1.5, DEFAULT_TOL),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn scalar_matches_vector_for_identical_terms() {
        let term = unit_term();
        let scalar = solve_budgeted_scalar(&term, 2, 1.0).unwrap();
        assert_eq!(scalar.rho, vec![0.5, 0.5]);
        assert!((scalar.objective - 0.125).abs() < 1e-15);

        let vector = solve_budgeted(&[term, term], 1.0, DEFAULT_TOL).unwrap();
        assert!((scalar.objective - vector.objective).abs() < 1e-9);
        assert!((scalar.dual - vector.dual).abs() < 1e-8);

        assert_eq!(solve_budgeted_scalar(&term, 3, 0.0).unwrap().rho, vec![0.0; 3]);
        assert_eq!(solve_budgeted_scalar(&term, 3, 3.0).unwrap().rho, vec![1.0; 3]);
        assert!(solve_budgeted_scalar(&term, 2, 2.5).is_err());
        assert!(solve_budgeted_scalar(&term, 2, -0.1).is_err());
    }

    #[test]
    fn interior_marginals_are_equalized() {
        let terms: Vec<PaymentTerm> = (1..=5)
            .map(|i| PaymentTerm::new(i, BiddingCurve::new(f64::from(i), 2.0).unwrap()))
            .collect();
        let sol = solve_budgeted(&terms, 2.3, DEFAULT_TOL).unwrap();
        for (t, &x) in terms.iter().zip(&sol.rho) {
            if x < 1.0 - 1e-9 {
                assert!((t.marginal(x) - sol.dual).abs() <= 1e-9 * sol.dual.max(1.0));
            }
        }
    }

    /// A non-power curve exercises the numeric inverse-marginal fallback.
    struct ExpCurve;

    impl Curve for ExpCurve {
        fn bid(&self, rho: f64) -> f64 {
            (rho.exp() - 1.0) / (1f64.exp() - 1.0)
        }

        fn bid_derivative(&self, rho: f64) -> f64 {
            rho.exp() / (1f64.exp() - 1.0)
        }
    }

    #[test]
    fn general_curve_solves_through_numeric_inverse() {
        let terms = vec![
            CurveTerm { r: 1.0, curve: ExpCurve },
            CurveTerm { r: 2.0, curve: ExpCurve },
        ];
        let sol = solve_budgeted(&terms, 1.1, 1e-9).unwrap();
        assert!((sol.rho.iter().sum::<f64>() - 1.1).abs() <= 1e-8);
        for (t, &x) in terms.iter().zip(&sol.rho) {
            if x < 1.0 - 1e-9 && x > 1e-9 {
                assert!((t.marginal(x) - sol.dual).abs() <= 1e-6 * sol.dual.max(1.0));
            }
        }
    }

    #[test]
    fn problem_constructor_screens_nonconvex_terms() {
        struct Linear;
        impl Curve for Linear {
            fn bid(&self, _rho: f64) -> f64 {
                1.0 // constant bid: f(rho) = r * rho is not strictly convex
            }
            fn bid_derivative(&self, _rho: f64) -> f64 {
                0.0
            }
        }
        let err = BudgetedProblem::new(vec![CurveTerm { r: 1.0, curve: Linear }], 0.5);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }
}
