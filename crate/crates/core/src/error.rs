use alloc::string::String;

/// Errors raised by the library. Data errors describe bad inputs; the guard
/// variants refuse work that would blow up combinatorially.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("label {label} out of range for {classes} classes (model {model}, sample {sample})")]
    LabelOutOfRange {
        model: String,
        sample: usize,
        label: u32,
        classes: u32,
    },
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("perfect focal model {0}: negative sample set is empty")]
    PerfectFocalModel(usize),
    #[error("invalid team: {0}")]
    InvalidTeam(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("refusing to enumerate teams over {models} models (limit {limit}); pass an explicit override")]
    CombinatorialGuard { models: usize, limit: usize },
    #[error("soft voting requires confidences")]
    MissingConfidences,
    #[error("team {0} is not covered by the oracle table")]
    NotInOracle(String),
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
}

pub type Result<T> = core::result::Result<T, Error>;
