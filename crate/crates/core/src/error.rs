use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edge at line {line} references unknown node {node}")]
    DanglingEdge { line: usize, node: String },

    #[error("unknown node {0}")]
    UnknownNode(u32),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("payload of {len} bytes exceeds the {cap}-byte message cap; split it across several messages")]
    PayloadTooLarge { len: usize, cap: usize },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
