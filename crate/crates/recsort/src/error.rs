use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Pipeline stage, used to attribute failures in multi-stage executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Plan,
    Read,
    Sort,
    Merge,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Plan => "plan",
            Stage::Read => "read",
            Stage::Sort => "sort",
            Stage::Merge => "merge",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context} `{path}`: {source}")]
    Io {
        path: PathBuf,
        context: &'static str,
        #[source]
        source: io::Error,
    },

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("buffer request of {requested} bytes exceeds the pool budget of {budget} bytes")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error(
        "buffer pool exhausted: waited {waited:?} for {requested} bytes \
         with {outstanding} of {budget} bytes outstanding"
    )]
    BudgetExhausted {
        requested: usize,
        waited: Duration,
        outstanding: usize,
        budget: usize,
    },

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(context: &'static str, path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            context,
            source,
        }
    }

    /// Wraps the error with a stage attribution; already-attributed errors
    /// keep their original (innermost) stage.
    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
