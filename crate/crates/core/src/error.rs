use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error at node {node}: value {value} outside window [{lo}, {hi}]")]
    Range {
        node: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("stability error{}: {detail}", location(*.node, *.step))]
    Stability {
        node: Option<usize>,
        step: Option<usize>,
        detail: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("mitigation error: {0}")]
    Mitigation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn location(node: Option<usize>, step: Option<usize>) -> String {
    match (node, step) {
        (Some(n), Some(s)) => format!(" at step {s}, node {n}"),
        (Some(n), None) => format!(" at node {n}"),
        (None, Some(s)) => format!(" at step {s}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a step index to a stability error raised inside a time loop.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Stability { node, detail, .. } => Error::Stability {
                node,
                step: Some(step),
                detail,
            },
            other => other,
        }
    }
}
