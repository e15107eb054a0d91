use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] wtap_core::Error),

    #[error("{0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use wtap_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Csv(_) | CliError::Plot(_) => EXIT_IO,
            CliError::Core(E::Io(_) | E::Csv(_) | E::Format { .. }) => EXIT_IO,
            CliError::Core(_) => EXIT_CONTRACT,
        }
    }
}
