use thiserror::Error;

use crate::protocol::{FailureReason, Protocol};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate configuration: no light reaches the sidebands (kappa0 = kappa1 = 0)")]
    Degenerate,

    #[error("phase offset undefined: one of the kappa factors vanishes")]
    ThetaUndefined,

    #[error("bessel argument {0} outside supported domain |x| <= 1.5")]
    BesselDomain(f64),

    #[error("harmonic truncation risk: {0}")]
    TruncationRisk(String),

    #[error("{protocol} infeasible for this configuration: {reason}")]
    Infeasible {
        protocol: Protocol,
        reason: FailureReason,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
