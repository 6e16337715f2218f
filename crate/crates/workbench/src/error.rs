use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPERIMENT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable or missing input files, datasets or checkpoints.
    #[error("input error: {0}")]
    Input(String),
    /// An earlier stage has not produced what this one needs.
    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),
    /// Translation, training or evaluation failed.
    #[error("{0}")]
    Experiment(String),
}

impl WorkbenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Experiment(_) => EXIT_EXPERIMENT,
            _ => EXIT_INPUT,
        }
    }
}
