//! Crate-wide error type.
//!
//! Pipeline stages report recoverable estimation failures through [`Error`];
//! the harness maps each variant to a short tag so failed Monte-Carlo trials
//! stay in the record instead of being dropped.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band plan: {0}")]
    InvalidBandPlan(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid distortion parameters: {0}")]
    InvalidDistortions(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid solver problem: {0}")]
    InvalidProblem(String),

    #[error(
        "channel generation failed after {attempts} attempts: minimum difference gap \
         {min_gap_s:e} s is too coarse for {paths} paths over [0, {tau_max_s:e}] s"
    )]
    ChannelGeneration {
        attempts: usize,
        min_gap_s: f64,
        paths: usize,
        tau_max_s: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient least-squares system (condition estimate {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("cubic spline needs at least 4 observed points, found {found}")]
    TooFewSplinePoints { found: usize },

    #[error("insufficient autocorrelation support: {found} candidates above threshold, need {needed}")]
    InsufficientSupport { found: usize, needed: usize },

    #[error("no consistent delay placement reproduces the estimated lag set")]
    NoConsistentPlacement,

    #[error("lag {lag_s:e} s is claimed by more than one delay pair")]
    LagCollision { lag_s: f64 },

    #[error("delay pair ({later}, {earlier}) has no matching lag within tolerance")]
    UnmatchedPair { later: usize, earlier: usize },

    #[error("degenerate pair coefficient magnitude {value:e} breaks log-domain gain recovery")]
    DegeneratePairCoefficient { value: f64 },

    #[error("zero-lag coefficient {value:e} is negative beyond tolerance")]
    NegativeZeroLag { value: f64 },

    #[error("leading gain magnitude {value:e} is too small to divide by")]
    VanishingLeadGain { value: f64 },

    #[error("baseline recovered no significant self-convolution component")]
    EmptySupport,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in per-trial failure records.
    pub fn failure_tag(&self) -> &'static str {
        match self {
            Error::InvalidBandPlan(_) => "invalid-band-plan",
            Error::InvalidChannel(_) => "invalid-channel",
            Error::InvalidDistortions(_) => "invalid-distortions",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidProblem(_) => "invalid-problem",
            Error::ChannelGeneration { .. } => "channel-generation",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::TooFewSplinePoints { .. } => "too-few-spline-points",
            Error::InsufficientSupport { .. } => "insufficient-support",
            Error::NoConsistentPlacement => "no-consistent-placement",
            Error::LagCollision { .. } => "lag-collision",
            Error::UnmatchedPair { .. } => "unmatched-pair",
            Error::DegeneratePairCoefficient { .. } => "degenerate-pair-coefficient",
            Error::NegativeZeroLag { .. } => "negative-zero-lag",
            Error::VanishingLeadGain { .. } => "vanishing-lead-gain",
            Error::EmptySupport => "empty-support",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
