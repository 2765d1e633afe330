//! Dense planes and slice-major volumes.
//!
//! A [`Volume3D`] stores its voxels slice-major (depth outermost, then rows,
//! then columns), so pooling along depth streams whole slices sequentially.
//! The depth axis is the "temporal" axis of the pooling machinery and slice
//! indices in the public API are 1-based; storage is 0-based internally.

use alloc::vec::Vec;
use core::fmt;

/// Errors raised by plane and volume constructors and accessors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VolumeError {
    /// An empty slice list was passed where at least one slice is required.
    EmptyInput,
    /// Two planes (or a plane and a volume) disagree on width × height.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A 1-based slice index fell outside `1..=depth`.
    IndexOutOfRange { index: usize, depth: usize },
    /// A value was NaN or infinite. All stored values must be finite.
    NonFinite { index: usize },
    /// A width, height, or depth of zero.
    ZeroDimension,
    /// The value buffer length does not match the stated dimensions.
    CountMismatch { expected: usize, got: usize },
}

impl fmt::Display for VolumeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolumeError::EmptyInput => write!(f, "slice list is empty"),
            VolumeError::DimensionMismatch { expected, got } => write!(
                f,
                "plane dimensions {}x{} do not match expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            VolumeError::IndexOutOfRange { index, depth } => {
                write!(f, "slice index {index} outside 1..={depth}")
            }
            VolumeError::NonFinite { index } => {
                write!(f, "non-finite value at flat index {index}")
            }
            VolumeError::ZeroDimension => write!(f, "dimensions must be positive"),
            VolumeError::CountMismatch { expected, got } => {
                write!(f, "expected {expected} values, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for VolumeError {}

fn check_finite(values: &[f32]) -> Result<(), VolumeError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(VolumeError::NonFinite { index }),
        None => Ok(()),
    }
}

/// A dense 2D plane of finite f32 values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane2D {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Plane2D {
    /// Builds a plane, rejecting zero dimensions, length mismatches, and
    /// non-finite values.
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, VolumeError> {
        if width == 0 || height == 0 {
            return Err(VolumeError::ZeroDimension);
        }
        let expected = width * height;
        if values.len() != expected {
            return Err(VolumeError::CountMismatch {
                expected,
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// A plane filled with a single value.
    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self, VolumeError> {
        Self::new(width, height, alloc::vec![value; width * height])
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

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Value at column `x`, row `y` (0-based).
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Minimum and maximum value. Values are finite by construction.
    pub fn min_max(&self) -> (f32, f32) {
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        for &v in &self.values {
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }
}

/// A dense stack of slices, the pooling input.
///
/// Voxels are stored slice-major: `voxels[((t-1) * height + y) * width + x]`
/// holds the voxel of slice `t` (1-based) at row `y`, column `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    width: usize,
    height: usize,
    depth: usize,
    voxels: Vec<f32>,
    spacing: Option<[f32; 3]>,
}

impl Volume3D {
    /// Builds a volume from a slice-major voxel buffer.
    pub fn new(
        width: usize,
        height: usize,
        depth: usize,
        voxels: Vec<f32>,
    ) -> Result<Self, VolumeError> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(VolumeError::ZeroDimension);
        }
        let expected = width * height * depth;
        if voxels.len() != expected {
            return Err(VolumeError::CountMismatch {
                expected,
                got: voxels.len(),
            });
        }
        check_finite(&voxels)?;
        Ok(Self {
            width,
            height,
            depth,
            voxels,
            spacing: None,
        })
    }

    /// Attaches per-axis physical spacing in millimeters.
    pub fn with_spacing(mut self, spacing: [f32; 3]) -> Self {
        self.spacing = Some(spacing);
        self
    }

    /// Stacks planes into a volume. All planes must share dimensions.
    pub fn from_slices(slices: &[Plane2D]) -> Result<Self, VolumeError> {
        let first = slices.first().ok_or(VolumeError::EmptyInput)?;
        let (width, height) = (first.width(), first.height());
        let mut voxels = Vec::with_capacity(width * height * slices.len());
        for plane in slices {
            if plane.width() != width || plane.height() != height {
                return Err(VolumeError::DimensionMismatch {
                    expected: (width, height),
                    got: (plane.width(), plane.height()),
                });
            }
            voxels.extend_from_slice(plane.values());
        }
        // Values were validated when each plane was constructed.
        Ok(Self {
            width,
            height,
            depth: slices.len(),
            voxels,
            spacing: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of slices; the "temporal" extent T.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Voxels per slice (width × height).
    pub fn slice_len(&self) -> usize {
        self.width * self.height
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn spacing(&self) -> Option<[f32; 3]> {
        self.spacing
    }

    /// Borrowed view of slice `t` (1-based).
    pub fn slice_values(&self, t: usize) -> Result<&[f32], VolumeError> {
        if t == 0 || t > self.depth {
            return Err(VolumeError::IndexOutOfRange {
                index: t,
                depth: self.depth,
            });
        }
        let len = self.slice_len();
        let start = (t - 1) * len;
        Ok(&self.voxels[start..start + len])
    }

    /// Slice `t` (1-based) as an owned plane.
    pub fn slice(&self, t: usize) -> Result<Plane2D, VolumeError> {
        let values = self.slice_values(t)?.to_vec();
        Plane2D::new(self.width, self.height, values)
    }

    /// Sub-volume of `len` slices starting at 1-based slice `start`.
    /// Spacing is carried over.
    pub fn depth_range(&self, start: usize, len: usize) -> Result<Volume3D, VolumeError> {
        if len == 0 {
            return Err(VolumeError::ZeroDimension);
        }
        if start == 0 || start + len - 1 > self.depth {
            return Err(VolumeError::IndexOutOfRange {
                index: start + len - 1,
                depth: self.depth,
            });
        }
        let slice_len = self.slice_len();
        let lo = (start - 1) * slice_len;
        let hi = lo + len * slice_len;
        Ok(Volume3D {
            width: self.width,
            height: self.height,
            depth: len,
            voxels: self.voxels[lo..hi].to_vec(),
            spacing: self.spacing,
        })
    }
}
