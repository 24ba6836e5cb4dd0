use thiserror::Error;

use crate::hypergraph::ItemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("query {index} is empty")]
    EmptyQuery { index: usize },

    #[error("query {query} references unknown item {item}")]
    DanglingItem { query: usize, item: ItemId },

    #[error("unknown item {0}")]
    UnknownItem(ItemId),

    #[error("item {0} is not placed on any partition")]
    UnplacedItem(ItemId),

    #[error("workload has no queries")]
    NoQueries,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyQuery { .. } => "empty_query",
            Error::DanglingItem { .. } => "dangling_item",
            Error::UnknownItem(_) => "unknown_item",
            Error::UnplacedItem(_) => "unplaced_item",
            Error::NoQueries => "no_queries",
            Error::Infeasible(_) => "infeasible",
            Error::Invalid(_) => "invalid",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
