//! Bid optimization for crowdsensing tasks under probabilistic
//! sensing-robustness constraints.
//!
//! A task owner must recruit enough participants per (time slot, location)
//! cell while paying as little as possible; bids map to accept probabilities
//! through per-cell bidding curves. The crate solves for minimum-payment
//! accept-probability policies under two robustness regimes, emits provable
//! optimality-gap certificates alongside every solution, and ships a
//! simulation harness that compares the solved policies against baselines.
//!
//! Module map:
//!
//! * [`model`]: curves, scenarios, policies, payment and robustness
//!   functionals.
//! * [`solver`]: the shared water-filling solver for separable convex
//!   budgeted problems, multiplier included.
//! * [`hard`]: joint-probability constraint: conservative and relaxed
//!   solves, feasibility checks, gap certificates, grid oracle.
//! * [`tail`]: exact and Monte Carlo success-count tails, normal quantile.
//! * [`soft`]: per-location chance constraints: relaxation, binary search
//!   with Monte Carlo feasibility, conservative companion, closed form.
//! * [`sim`]: scenario generation, baseline policies, metric tables, CSV.
//! * [`config`]: TOML scenario/experiment parsing.
//!
//! All solves are pure functions of their inputs; randomness is derived
//! from explicit seeds via tagged substreams ([`rng`]), so results are
//! reproducible bit for bit at any worker count. The `parallel` feature
//! (default) fans independent work out on rayon; disabling it yields a
//! fully sequential build with identical outputs.
//!
//! ```
//! use robust_crowdsense::hard::{certify_gap, solve_pa2, verify_pa1};
//! use robust_crowdsense::model::{BiddingCurve, RobustnessSpec, Scenario};
//!
//! // two slots, one location, requirement 1, bid curve b(rho) = rho^3,
//! // joint success probability at least 0.8
//! let scenario = Scenario::time_independent(
//!     2,
//!     vec![1],
//!     vec![BiddingCurve::new(1.0, 3.0)?],
//!     RobustnessSpec::Hard { epsilon: 0.2 },
//! )?;
//! let outcome = solve_pa2(&scenario)?;
//! assert!((outcome.objective - 1.3122).abs() < 1e-8);
//!
//! let certificate = certify_gap(&outcome, &scenario)?;
//! assert!(certificate.bound < 0.12); // proven distance to the optimum
//! assert!(verify_pa1(&outcome.policy, 0.2).feasible);
//! # Ok::<(), robust_crowdsense::Error>(())
//! ```

// Validation guards use negated comparisons (`!(x > 0.0)`) deliberately:
// the negation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod hard;
pub mod model;
pub mod rng;
pub mod sim;
pub mod soft;
pub mod solver;
pub mod tail;

pub use error::{Error, Result};
