use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("no feasible point in the sweep: {0}")]
    InfeasibleEverywhere(String),

    #[error(transparent)]
    Core(#[from] stn_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 infeasible everywhere, 4 guard, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use stn_core::Error as E;
        match self {
            Self::Usage(_) | Self::Json(_) => 2,
            Self::InfeasibleEverywhere(_) => 3,
            Self::Core(E::Guard { .. }) => 4,
            Self::Core(E::Infeasible(_)) => 3,
            Self::Core(E::Domain { .. } | E::UnknownStrategy { .. } | E::SubsetSize { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
