use std::io;

use thiserror::Error;

use crate::model::{ItemId, UserId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("rating {value} for (user {user}, item {item}) outside scale [{min}, {max}]")]
    OutOfScale {
        user: UserId,
        item: ItemId,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{malformed} of {total} lines malformed (limit {limit})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit: f64,
    },

    #[error("cannot split: {0}")]
    Split(String),

    #[error("{0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short class tag used as the prefix of command-line error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Error::OutOfScale { .. } => "scale",
            Error::UnknownUser(_) => "unknown-user",
            Error::Config(_) => "config",
            Error::TooManyMalformed { .. } => "malformed-input",
            Error::Split(_) => "split",
            Error::Evaluation(_) => "evaluation",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
