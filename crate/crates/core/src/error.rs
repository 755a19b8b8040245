use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("receiver {receiver} and satellite {satellite} are coincident (zero range)")]
    ZeroRange { receiver: usize, satellite: usize },

    #[error("node {node} has an empty visibility set")]
    EmptyVisibility { node: usize },

    #[error("node {node} sees {visible} satellites, at least {required} required")]
    InsufficientVisibility {
        node: usize,
        visible: usize,
        required: usize,
    },

    #[error("receiver-satellite visibility graph is disconnected: {component}")]
    DisconnectedVisibility { component: String },

    #[error("communication graph is disconnected into components {components:?}")]
    DisconnectedGraph { components: Vec<Vec<usize>> },

    #[error("no truth value for link (node {node}, satellite {satellite})")]
    MissingTruth { node: usize, satellite: usize },

    #[error("rank deficiency not eliminated: {detail}")]
    RankDeficient { detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("gradient tracking diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("enumeration guard: dimension {dim} exceeds {max}")]
    EnumerationGuard { dim: usize, max: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by numerics (rank, divergence, definiteness)
    /// rather than by inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. }
            | Error::NotPositiveDefinite(_)
            | Error::Diverged { .. }
            | Error::DisconnectedVisibility { .. }
            | Error::InsufficientVisibility { .. }
            | Error::EmptyVisibility { .. }
            | Error::DisconnectedGraph { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
