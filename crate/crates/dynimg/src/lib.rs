//! IO, file formats, and the batch engines behind the `dynimg` CLI.
//!
//! The numerical work lives in `dynimg-core`; this crate adds NIfTI-1
//! ingestion, PNG / raw-f32 emission, the JSON-lines manifest, per-image
//! statistics, and the throughput benchmark.

pub mod bench;
pub mod config;
pub mod convert;
pub mod error;
pub mod exact;
pub mod formats;
pub mod nifti;
pub mod stats;

pub use error::Error;
