use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),

    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<bsreg::Error> for CliError {
    fn from(e: bsreg::Error) -> Self {
        use bsreg::Error::*;
        let msg = e.to_string();
        match e {
            Domain(_) | Unsupported(_) => CliError::Usage(msg),
            InvalidData(_) | Dimension(_) => CliError::Data(msg),
            RankDeficient { .. } | DegenerateFit(_) | Boundary(_) | NotConverged(_) | TooManyFailures { .. } => {
                CliError::Numerical(msg)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
