use std::path::PathBuf;

use crate::nifti::NiftiError;

/// Top-level error for the batch tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Nifti {
        path: PathBuf,
        #[source]
        source: NiftiError,
    },
    #[error(transparent)]
    Volume(#[from] dynimg_core::VolumeError),
    #[error(transparent)]
    Pool(#[from] dynimg_core::PoolError),
    #[error(transparent)]
    RankSvm(#[from] dynimg_core::RankSvmError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image encoding: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
