use std::path::PathBuf;

/// Errors produced anywhere in the pose pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid quaternion: {0}")]
    InvalidQuaternion(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("mesh has no faces: {0}")]
    EmptyMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point behind camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("pose sampler exhausted after {attempts} consecutive rejections")]
    SamplerExhausted { attempts: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("class id {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid occlusion spec: {0}")]
    InvalidSpec(String),

    #[error("record {record}: {msg}")]
    Validation { record: String, msg: String },

    #[error("record {record}: missing file {}", path.display())]
    MissingFile { record: String, path: PathBuf },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs (files, configs, arguments) as
    /// opposed to failures while running a valid request.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::SamplerExhausted { .. } | Error::NumericDegeneracy(_))
            && !matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
