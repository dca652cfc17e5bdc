//! Run configuration, target images and exported artifacts.

mod config;
mod image;
mod mesh;
mod polyline;

pub use config::{load_config, parse_config, KnotConfig, InnConfig, Preset, RunConfig, SceneConfig};
pub use image::{load_target, save_silhouette, save_mask};
pub use mesh::{tube_mesh, TubeMesh};
pub use polyline::{read_polyline_csv, write_polyline_csv, write_polyline_obj};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("degenerate polyline: {0}")]
    Degenerate(String),
}

impl IoError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}
