use thiserror::Error;

/// Errors reported by the model, optimizer and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("`{name}` = {value} is outside the domain of {what}")]
    Domain {
        name: &'static str,
        value: f64,
        what: &'static str,
    },

    #[error("no relay available: receiver density is zero")]
    NoRelay,

    #[error("numeric failure in {what} (best estimate {estimate})")]
    NumericFailure { what: &'static str, estimate: f64 },

    #[error("at least one trial is required")]
    NoTrials,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require(
    cond: bool,
    name: &'static str,
    value: f64,
    reason: &'static str,
) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
