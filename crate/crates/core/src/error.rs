use thiserror::Error;

/// Errors raised by the bound, key-rate and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The decoy condition (exact or robust) does not hold, so no bound is certified.
    #[error("decoy condition violated at k = {k}{}", if *.degenerate { " (degenerate denominator a_2)" } else { "" })]
    ConditionViolated { k: usize, degenerate: bool },

    /// The 2x2 elimination denominator is not strictly positive.
    #[error("coefficient ordering violated: denominator {denominator:e} is not positive")]
    CoefficientOrdering { denominator: f64 },

    /// A quantity is undefined for the given observations (e.g. a fraction over zero counts).
    #[error("undefined quantity: {0}")]
    Undefined(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_probability(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(domain(format!("{name} = {x} is not in [0, 1]")))
    }
}
