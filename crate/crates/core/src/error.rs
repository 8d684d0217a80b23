use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label mode mismatch: expected {expected}, found {found}")]
    Mode {
        expected: &'static str,
        found: &'static str,
    },

    #[error("inconsistent annotations in image {image_id}: {detail}")]
    Consistency { image_id: String, detail: String },

    #[error("empty table structure: {0}")]
    EmptyStructure(String),

    #[error("html parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("corpus error for sample {sample}: {message}")]
    Corpus { sample: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("schema violation{} at `{path}`: {message}", .record.map(|r| format!(" in record {r}")).unwrap_or_default())]
    Schema {
        /// Image record index; `None` for file-level fields.
        record: Option<usize>,
        path: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error categories, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Input,
    Structure,
    Parse,
    Numerical,
    Schema,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Input => 3,
            Category::Structure => 4,
            Category::Parse => 5,
            Category::Numerical => 6,
            Category::Schema => 7,
            Category::Io => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Structure => "structure",
            Category::Parse => "parse",
            Category::Numerical => "numerical",
            Category::Schema => "schema",
            Category::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::DegenerateGeometry(_)
            | Error::InvalidInput(_)
            | Error::Mode { .. }
            | Error::Config(_) => Category::Input,
            Error::Consistency { .. } | Error::EmptyStructure(_) | Error::Corpus { .. } => {
                Category::Structure
            }
            Error::Parse { .. } => Category::Parse,
            Error::Numerical(_) => Category::Numerical,
            Error::Schema { .. } => Category::Schema,
            Error::Io { .. } | Error::Csv(_) => Category::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
