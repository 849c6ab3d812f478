use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("stream mixes devices {first:?} and {other:?}")]
    MixedDevice { first: String, other: String },

    #[error("ordering violation at record {position}: {reason}")]
    Order { position: usize, reason: String },

    #[error("duplicate access point {bssid} in scan {seq}")]
    DuplicateAp { seq: u64, bssid: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("fingerprint is empty")]
    EmptyFingerprint,

    #[error("fingerprints share no access point")]
    Disjoint,

    #[error("fingerprint index {index} out of range (T = {len})")]
    IndexRange { index: usize, len: usize },

    #[error("node {node} out of range ({len} nodes)")]
    NodeRange { node: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cluster assignment covers {assigned} fingerprints, matrix has {expected}")]
    Coverage { assigned: usize, expected: usize },

    #[error("only one class present")]
    DegenerateLabels,

    #[error("design matrix is rank deficient ({rank} < {cols})")]
    RankDeficiency { rank: usize, cols: usize },

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("feature mismatch: expected {expected:?}, got {found:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("no labeled fingerprints to evaluate")]
    NoLabels,

    #[error("label sequence contains no transitions")]
    NoTransitions,

    #[error("cross-validation needs at least two locations, found {0}")]
    SingleLocation(usize),

    #[error("no fingerprints in the first minute")]
    EmptyPrefix,
}

pub type Result<T> = std::result::Result<T, Error>;
