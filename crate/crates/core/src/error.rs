//! Error types shared across the library.

use std::fmt;

/// Everything that can go wrong when building inputs or running a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside its mathematical domain (e.g. a probability
    /// outside `[0, 1]`).
    Domain(String),
    /// Matrix shapes or lengths disagree.
    Dimension(String),
    /// A value-level invariant was violated at construction time.
    Invalid(String),
    /// The requested constraint cannot be satisfied by any policy.
    Infeasible(String),
    /// A configuration was rejected before any solve started.
    Config(String),
    /// The soft-constraint search exhausted its sample-escalation budget.
    /// Carries the last `(gamma, q)` trajectory for diagnosis.
    NonTermination {
        location: usize,
        trajectory: Vec<(f64, f64)>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid value: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonTermination {
                location,
                trajectory,
            } => {
                write!(
                    f,
                    "search did not terminate at location {location} after sample escalation; \
                     last {} probes: ",
                    trajectory.len().min(8)
                )?;
                for (gamma, q) in trajectory.iter().rev().take(8).rev() {
                    write!(f, "(gamma={gamma:.6}, q={q:+.4}) ")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
