//! Error type of the command layer and its exit-code mapping.

use rigkit::camera_model::CameraError;
use rigkit::clock_sync::ClockError;
use rigkit::dataset_io::DatasetError;
use rigkit::imu_allan::AllanError;
use rigkit::tf_graph::TfError;
use rigkit::traj_eval::TrajError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input.
    #[error("{0}")]
    Input(String),
    /// Inputs parse but violate a domain rule.
    #[error("{0}")]
    Domain(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_PARSE,
            CliError::Domain(_) => EXIT_VALIDATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{context}: {e}"))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<TfError> for CliError {
    fn from(e: TfError) -> Self {
        match e {
            TfError::Parse { .. } | TfError::InvalidFrameId(_) | TfError::Io(_) => {
                CliError::Input(e.to_string())
            }
            TfError::DuplicateEdge { .. }
            | TfError::SelfLoop(_)
            | TfError::UnknownFrame(_)
            | TfError::Disconnected { .. } => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ClockError> for CliError {
    fn from(e: ClockError) -> Self {
        match e {
            ClockError::BadSpec(_) | ClockError::BadCounterFrequency => CliError::Input(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<AllanError> for CliError {
    fn from(e: AllanError) -> Self {
        match e {
            AllanError::BadLog(_)
            | AllanError::BadRate(_)
            | AllanError::Parse { .. }
            | AllanError::Csv(_)
            | AllanError::Io(_) => CliError::Input(e.to_string()),
            AllanError::TooShort { .. }
            | AllanError::NoValidTau
            | AllanError::NoWhiteNoiseRegion
            | AllanError::NoRandomWalkRegion => CliError::Domain(e.to_string()),
        }
    }
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        match e {
            CameraError::Ply(_) | CameraError::Image(_) | CameraError::Json(_) | CameraError::Io(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<TrajError> for CliError {
    fn from(e: TrajError) -> Self {
        match e {
            TrajError::Parse { .. } | TrajError::NonMonotonic { .. } | TrajError::Io(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Camera(inner) => inner.into(),
            DatasetError::MissingManifest(_)
            | DatasetError::Schema(_)
            | DatasetError::CorruptRecord { .. }
            | DatasetError::Io(_) => CliError::Input(e.to_string()),
            DatasetError::UnknownStream(_)
            | DatasetError::Writer { .. }
            | DatasetError::EmptySequence => CliError::Domain(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
