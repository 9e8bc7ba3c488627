use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("collinear design: {0}")]
    Collinear(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("origin is {0:.1} m from the nearest street")]
    UnreachableOrigin(f64),
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for degenerate statistics, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateMetric(_)
            | Error::UndefinedCorrelation(_)
            | Error::Collinear(_)
            | Error::InsufficientData(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
