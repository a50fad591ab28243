use qsl_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => EXIT_USAGE,
            LabError::Core(CoreError::Resource { .. }) => EXIT_RESOURCE,
            LabError::Core(CoreError::Domain(_) | CoreError::Shape(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}
