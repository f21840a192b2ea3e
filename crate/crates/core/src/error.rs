use thiserror::Error;

/// Errors raised by the analysis, mechanism and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "invalid hypergeometric law: population={population}, successes={successes}, draws={draws}"
    )]
    InvalidLaw {
        population: u32,
        successes: u32,
        draws: u32,
    },

    #[error("cartel fraction {beta} of {lanes} lanes is not an integral lane count; nearest integral cartel is {suggested} lanes (beta = {suggested_beta})")]
    NonIntegralCartel {
        beta: f64,
        lanes: u32,
        suggested: u32,
        suggested_beta: f64,
    },

    #[error("cartel is defined over {cartel_lanes} lanes but the instance has {instance_lanes}")]
    CartelMismatch {
        cartel_lanes: u32,
        instance_lanes: u32,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("contact schedule never reaches {kappa} bundles (total {total})")]
    ScheduleTooShort { kappa: u32, total: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires a knife-edge instance (slack 0), got slack {slack}")]
    NotKnifeEdge { slack: u32 },

    #[error("decode not reached: {available} admissible bundles, {required} required")]
    DecodeNotReached { available: usize, required: u32 },

    #[error("ticket hash collision between distinct tickets {first} and {second}")]
    TicketHashCollision { first: String, second: String },

    #[error(
        "horizon cap {cap} leaves residual mass {residual:e}; try a cap of at least {suggested}"
    )]
    HorizonTooShort {
        cap: u32,
        residual: f64,
        suggested: u32,
    },

    #[error(
        "ratchet provides no within-transaction benefit when the honest horizon is a single slot"
    )]
    SingleSlotHorizon,

    #[error("replay mismatch on trace {index}: {detail}")]
    ReplayMismatch { index: usize, detail: String },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
