//! Pooled image types and their provenance metadata.

use alloc::vec::Vec;
use core::fmt;

use crate::volume::{Plane2D, VolumeError};

/// How a dynamic image was produced from its source volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMethod {
    /// Closed-form weighted sum of prefix averages.
    ApproxRankPool,
    /// Weight plane of the pairwise-ranking objective, found by descent.
    ExactRankPool,
    /// Elementwise mean over depth.
    AvgPool,
    /// Elementwise maximum over depth.
    MaxPool,
}

impl PoolMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoolMethod::ApproxRankPool => "approx-rank-pool",
            PoolMethod::ExactRankPool => "exact-rank-pool",
            PoolMethod::AvgPool => "avg-pool",
            PoolMethod::MaxPool => "max-pool",
        }
    }
}

impl fmt::Display for PoolMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalization applied to the stored plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    /// Affine map of the plane's [min, max] onto [0, 1].
    MinMax01,
}

/// Channel layout requested for emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelMode {
    #[default]
    Single,
    /// The pooled plane copied into all three channels.
    Replicate3,
    /// Depth split into three contiguous segments, each pooled on its own.
    Segment3,
}

/// A single pooled plane plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicImage {
    plane: Plane2D,
    method: PoolMethod,
    depth_used: usize,
    normalization: Normalization,
    channel_mode: ChannelMode,
}

impl DynamicImage {
    /// Wraps a pooled plane. `depth_used` is the number of slices consumed.
    pub fn from_plane(
        plane: Plane2D,
        method: PoolMethod,
        depth_used: usize,
    ) -> Result<Self, VolumeError> {
        if depth_used == 0 {
            return Err(VolumeError::ZeroDimension);
        }
        Ok(Self {
            plane,
            method,
            depth_used,
            normalization: Normalization::None,
            channel_mode: ChannelMode::Single,
        })
    }

    pub(crate) fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn plane(&self) -> &Plane2D {
        &self.plane
    }

    pub fn into_plane(self) -> Plane2D {
        self.plane
    }

    pub fn method(&self) -> PoolMethod {
        self.method
    }

    pub fn depth_used(&self) -> usize {
        self.depth_used
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn channel_mode(&self) -> ChannelMode {
        self.channel_mode
    }
}

/// A three-channel image with interleaved samples:
/// `values[(y * width + x) * 3 + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelImage {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl MultiChannelImage {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, VolumeError> {
        if width == 0 || height == 0 {
            return Err(VolumeError::ZeroDimension);
        }
        let expected = width * height * Self::CHANNELS;
        if values.len() != expected {
            return Err(VolumeError::CountMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Interleaves three equally sized planes into channels 0, 1, 2.
    pub fn from_planes(planes: &[Plane2D; 3]) -> Result<Self, VolumeError> {
        let (width, height) = (planes[0].width(), planes[0].height());
        for p in planes.iter() {
            if p.width() != width || p.height() != height {
                return Err(VolumeError::DimensionMismatch {
                    expected: (width, height),
                    got: (p.width(), p.height()),
                });
            }
        }
        let mut values = Vec::with_capacity(width * height * Self::CHANNELS);
        for i in 0..width * height {
            for p in planes.iter() {
                values.push(p.values()[i]);
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Channel `c` extracted as a plane.
    pub fn channel_plane(&self, c: usize) -> Result<Plane2D, VolumeError> {
        if c >= Self::CHANNELS {
            return Err(VolumeError::IndexOutOfRange {
                index: c,
                depth: Self::CHANNELS,
            });
        }
        let values: Vec<f32> = self
            .values
            .iter()
            .skip(c)
            .step_by(Self::CHANNELS)
            .copied()
            .collect();
        Plane2D::new(self.width, self.height, values)
    }
}
