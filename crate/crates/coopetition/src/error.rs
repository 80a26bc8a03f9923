use thiserror::Error;

/// Crate-wide error type. Exit-code mapping for the CLI:
/// config errors -> 2, data errors -> 3, numeric divergence -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("grade {grade} outside scale [{min}, {max}] for entity {entity}")]
    GradeOutOfRange {
        entity: String,
        grade: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown label {label:?} for entity {entity} (declared set: {declared:?})")]
    UnknownLabel {
        entity: String,
        label: String,
        declared: Vec<String>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative weight {weight} at feature index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("modularity undefined on an edgeless graph")]
    EdgelessGraph,

    #[error("unknown community id {0}")]
    UnknownCommunity(usize),

    #[error("no ground-truth labels present in metadata")]
    MissingGroundTruth,

    #[error("unknown export format {0:?}")]
    UnknownFormat(String),

    #[error("layout diverged: non-finite force between nodes {a} and {b}")]
    LayoutDivergence { a: usize, b: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownFormat(_) => 2,
            Error::LayoutDivergence { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
