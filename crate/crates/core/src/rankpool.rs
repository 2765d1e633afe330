//! Approximate rank pooling along the depth axis, plus avg/max baselines.
//!
//! The pooled image is the weighted sum `Σ_t α_t · ψ_t` where `ψ_t` is the
//! elementwise mean of slices `1..=t` and `α_t = 2t − T − 1`. Exchanging the
//! order of summation turns this into a single sweep over raw slices with
//! per-slice weights `β_τ = Σ_{t=τ}^{T} α_t / t`, which is the default
//! strategy: one read of the volume and one plane-sized accumulator instead
//! of T intermediate average planes.
//!
//! All accumulation is in f64; results are rounded to f32 once at the end.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dynamic_image::{DynamicImage, MultiChannelImage, Normalization, PoolMethod};
use crate::volume::{Plane2D, Volume3D, VolumeError};

/// Errors raised by pooling operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolError {
    /// The operation needs at least `required` slices.
    InvalidDepth { depth: usize, required: usize },
    /// The image's pooling method cannot be re-applied per segment.
    UnsupportedMethod(PoolMethod),
    /// An underlying plane or volume constraint was violated.
    Volume(VolumeError),
}

impl From<VolumeError> for PoolError {
    fn from(err: VolumeError) -> Self {
        PoolError::Volume(err)
    }
}

impl fmt::Display for PoolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolError::InvalidDepth { depth, required } => {
                write!(f, "depth {depth} is invalid here (need at least {required})")
            }
            PoolError::UnsupportedMethod(m) => {
                write!(f, "method {m} cannot be pooled per segment")
            }
            PoolError::Volume(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PoolError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PoolError::Volume(e) => Some(e),
            _ => None,
        }
    }
}

/// Per-slice pooling weights for a stack of `depth` slices.
///
/// `alpha[t-1] = 2t − T − 1` weights the prefix average `ψ_t`; `beta[τ-1]`
/// weights the raw slice `I_τ` in the equivalent single-pass form. Both sum
/// to zero, which is what makes the pooling invariant to constant shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCoefficients {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl PoolCoefficients {
    pub fn new(depth: usize) -> Result<Self, PoolError> {
        if depth == 0 {
            return Err(PoolError::InvalidDepth { depth, required: 1 });
        }
        let t_total = depth as i64;
        let alpha: Vec<f64> = (1..=t_total).map(|t| (2 * t - t_total - 1) as f64).collect();
        // beta[τ-1] = Σ_{t=τ}^{T} alpha[t-1] / t, built as a suffix sum.
        let mut beta = vec![0.0f64; depth];
        let mut acc = 0.0f64;
        for t in (1..=depth).rev() {
            acc += alpha[t - 1] / t as f64;
            beta[t - 1] = acc;
        }
        Ok(Self { alpha, beta })
    }

    pub fn depth(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Which algebraic form of the pooled sum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// One sweep over raw slices with `beta` weights.
    #[default]
    SinglePass,
    /// Materialize the prefix-average planes, then weight them with `alpha`.
    TwoPass,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::SinglePass => "single-pass",
            Strategy::TwoPass => "two-pass",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prefix means of the slices: element `t-1` is the elementwise mean of
/// slices `1..=t`, accumulated with f64 running sums.
pub fn temporal_averages(v: &Volume3D) -> Vec<Plane2D> {
    let m = v.slice_len();
    let mut sums = vec![0.0f64; m];
    let mut out = Vec::with_capacity(v.depth());
    for t in 1..=v.depth() {
        let slice = v.slice_values(t).expect("t in 1..=depth");
        for (s, &x) in sums.iter_mut().zip(slice) {
            *s += x as f64;
        }
        let inv = 1.0 / t as f64;
        let values: Vec<f32> = sums.iter().map(|&s| (s * inv) as f32).collect();
        // The mean of finite f32 values cannot exceed their max, so this
        // cannot produce a non-finite value.
        out.push(Plane2D::new(v.width(), v.height(), values).expect("mean stays finite"));
    }
    out
}

fn pool_two_pass_f64(v: &Volume3D, coeffs: &PoolCoefficients) -> Vec<f64> {
    let m = v.slice_len();
    let depth = v.depth();
    // Pass 1: prefix-average planes.
    let mut sums = vec![0.0f64; m];
    let mut averages: Vec<f64> = Vec::with_capacity(depth * m);
    for t in 1..=depth {
        let slice = v.slice_values(t).expect("t in 1..=depth");
        for (s, &x) in sums.iter_mut().zip(slice) {
            *s += x as f64;
        }
        let inv = 1.0 / t as f64;
        averages.extend(sums.iter().map(|&s| s * inv));
    }
    // Pass 2: weight the average planes.
    let mut out = vec![0.0f64; m];
    for t in 0..depth {
        let a = coeffs.alpha[t];
        let plane = &averages[t * m..(t + 1) * m];
        for (o, &p) in out.iter_mut().zip(plane) {
            *o += a * p;
        }
    }
    out
}

fn pool_single_pass_f64(v: &Volume3D, coeffs: &PoolCoefficients) -> Vec<f64> {
    let m = v.slice_len();
    let mut out = vec![0.0f64; m];
    for t in 1..=v.depth() {
        let b = coeffs.beta[t - 1];
        let slice = v.slice_values(t).expect("t in 1..=depth");
        for (o, &x) in out.iter_mut().zip(slice) {
            *o += b * x as f64;
        }
    }
    out
}

/// The pooled values in f64, before the single rounding to the stored
/// f32 plane. The algebraic identities of the pooling (strategy
/// equivalence, linearity, shift invariance) are exact statements about
/// these values; the plane adds at most half an f32 ulp per element.
pub fn approx_rank_pool_f64(v: &Volume3D, strategy: Strategy) -> Result<Vec<f64>, PoolError> {
    let coeffs = PoolCoefficients::new(v.depth())?;
    Ok(match strategy {
        Strategy::SinglePass => pool_single_pass_f64(v, &coeffs),
        Strategy::TwoPass => pool_two_pass_f64(v, &coeffs),
    })
}

/// Collapses the volume into a dynamic image.
///
/// A depth-1 volume yields the all-zero plane (its only weight is zero);
/// this is logged as a warning rather than treated as an error so batch
/// jobs keep going.
pub fn approx_rank_pool(v: &Volume3D, strategy: Strategy) -> Result<DynamicImage, PoolError> {
    if v.depth() == 1 {
        log::warn!("rank pooling a depth-1 volume yields an all-zero dynamic image");
    }
    let raw = approx_rank_pool_f64(v, strategy)?;
    let values: Vec<f32> = raw.iter().map(|&x| x as f32).collect();
    let plane = Plane2D::new(v.width(), v.height(), values)?;
    Ok(DynamicImage::from_plane(plane, PoolMethod::ApproxRankPool, v.depth())?)
}

/// Elementwise mean over the depth axis.
pub fn avg_pool_depth(v: &Volume3D) -> DynamicImage {
    let m = v.slice_len();
    let mut sums = vec![0.0f64; m];
    for t in 1..=v.depth() {
        let slice = v.slice_values(t).expect("t in 1..=depth");
        for (s, &x) in sums.iter_mut().zip(slice) {
            *s += x as f64;
        }
    }
    let inv = 1.0 / v.depth() as f64;
    let values: Vec<f32> = sums.iter().map(|&s| (s * inv) as f32).collect();
    let plane = Plane2D::new(v.width(), v.height(), values).expect("mean stays finite");
    DynamicImage::from_plane(plane, PoolMethod::AvgPool, v.depth()).expect("depth >= 1")
}

/// Elementwise maximum over the depth axis.
pub fn max_pool_depth(v: &Volume3D) -> DynamicImage {
    let first = v.slice_values(1).expect("depth >= 1");
    let mut out: Vec<f32> = first.to_vec();
    for t in 2..=v.depth() {
        let slice = v.slice_values(t).expect("t in 1..=depth");
        for (o, &x) in out.iter_mut().zip(slice) {
            *o = o.max(x);
        }
    }
    let plane = Plane2D::new(v.width(), v.height(), out).expect("max of finite values");
    DynamicImage::from_plane(plane, PoolMethod::MaxPool, v.depth()).expect("depth >= 1")
}

/// Affine map of the plane's [min, max] onto [0, 1]. A constant plane maps
/// to all-zero. Normalization is never applied implicitly by any pooling
/// path; callers opt in at emission time.
pub fn normalize_min_max(img: &DynamicImage) -> DynamicImage {
    let plane = img.plane();
    let (min, max) = plane.min_max();
    let values: Vec<f32> = if max > min {
        let min = min as f64;
        let range = max as f64 - min;
        // Division (not multiplication by a reciprocal) makes the endpoints
        // land exactly on 0.0 and 1.0.
        plane
            .values()
            .iter()
            .map(|&v| ((v as f64 - min) / range) as f32)
            .collect()
    } else {
        vec![0.0; plane.values().len()]
    };
    let plane = Plane2D::new(plane.width(), plane.height(), values).expect("values in [0, 1]");
    DynamicImage::from_plane(plane, img.method(), img.depth_used())
        .expect("depth unchanged")
        .with_normalization(Normalization::MinMax01)
}

/// How to fill the three output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreeChannelMode {
    /// The pooled plane copied into every channel.
    Replicate3,
    /// Depth split into three contiguous segments, pooled independently.
    Segment3,
}

/// 1-based (start, len) bounds of the three depth segments. The remainder
/// of `depth / 3` goes to the earliest segments, so e.g. depth 8 splits as
/// 3, 3, 2.
pub fn depth_segments(depth: usize) -> Result<[(usize, usize); 3], PoolError> {
    if depth < 3 {
        return Err(PoolError::InvalidDepth { depth, required: 3 });
    }
    let base = depth / 3;
    let rem = depth % 3;
    let lens = [
        base + usize::from(rem > 0),
        base + usize::from(rem > 1),
        base,
    ];
    let starts = [1, 1 + lens[0], 1 + lens[0] + lens[1]];
    Ok([
        (starts[0], lens[0]),
        (starts[1], lens[1]),
        (starts[2], lens[2]),
    ])
}

/// Expands a pooled image to three channels.
///
/// `Replicate3` copies the plane. `Segment3` re-pools each depth segment of
/// the source volume with the image's own method (rank pooling uses the
/// single-pass form); exact-solver images cannot be re-pooled here because
/// the solver configuration is not part of the image.
pub fn to_three_channel(
    img: &DynamicImage,
    v: &Volume3D,
    mode: ThreeChannelMode,
) -> Result<MultiChannelImage, PoolError> {
    if img.plane().width() != v.width() || img.plane().height() != v.height() {
        return Err(PoolError::Volume(VolumeError::DimensionMismatch {
            expected: (v.width(), v.height()),
            got: (img.plane().width(), img.plane().height()),
        }));
    }
    match mode {
        ThreeChannelMode::Replicate3 => {
            let p = img.plane().clone();
            Ok(MultiChannelImage::from_planes(&[p.clone(), p.clone(), p])?)
        }
        ThreeChannelMode::Segment3 => {
            let segments = depth_segments(v.depth())?;
            let mut planes: Vec<Plane2D> = Vec::with_capacity(3);
            for (start, len) in segments {
                let sub = v.depth_range(start, len)?;
                let pooled = match img.method() {
                    PoolMethod::ApproxRankPool => {
                        approx_rank_pool(&sub, Strategy::SinglePass)?.into_plane()
                    }
                    PoolMethod::AvgPool => avg_pool_depth(&sub).into_plane(),
                    PoolMethod::MaxPool => max_pool_depth(&sub).into_plane(),
                    PoolMethod::ExactRankPool => {
                        return Err(PoolError::UnsupportedMethod(PoolMethod::ExactRankPool))
                    }
                };
                planes.push(pooled);
            }
            let planes: [Plane2D; 3] = [
                planes[0].clone(),
                planes[1].clone(),
                planes[2].clone(),
            ];
            Ok(MultiChannelImage::from_planes(&planes)?)
        }
    }
}
