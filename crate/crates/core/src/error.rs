use thiserror::Error;

/// Errors raised across the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node '{0}'")]
    UnknownNode(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph parse error at line {line}: {msg}")]
    GraphParse { line: usize, msg: String },

    #[error("node sets overlap: {0}")]
    OverlappingSets(String),

    #[error("interventions on the target '{0}' are not modeled")]
    TargetIntervention(String),

    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),

    #[error("infeasible observation: {0}")]
    InfeasibleObservation(String),

    #[error("singular design matrix when fitting node '{0}'")]
    SingularDesign(String),

    #[error("logistic regression did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("observation outside the known support: {0}")]
    OutsideSupport(String),

    #[error("zero-probability observation {0}")]
    ZeroProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Q1 requires finite support (setting '{0}')")]
    ContinuousSupport(String),

    #[error("cannot collect cohort: {0}")]
    CohortCollection(String),

    #[error("unknown setting '{0}'")]
    UnknownSetting(String),

    #[error("missing columns: {0}")]
    MissingColumns(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
