//! Spatial attention block numerics: four pointwise (1×1) projection
//! layers, ReLU between them, and a softmax over spatial positions that
//! produces a positive mask summing to one. The masked output is the
//! input scaled per position by the mask.
//!
//! Everything is evaluated in f64 so the analytic backward pass can be
//! validated against central finite differences. Binary cross-entropy
//! lives here too, as the loss the block is normally trained under.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Clamp bound keeping probabilities away from 0 and 1 in the loss.
pub const BCE_EPSILON: f64 = 1e-7;

const LAYER_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum AttentionError {
    /// Input channel count does not match the first layer.
    ChannelMismatch { expected: usize, got: usize },
    /// Two feature maps disagree on height × width × channels.
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    /// Value buffer length does not match the stated shape.
    CountMismatch { expected: usize, got: usize },
    /// A height, width, or channel count of zero.
    ZeroDimension,
    /// A value was NaN or infinite.
    NonFinite { index: usize },
    /// Binary label outside {0, 1}.
    InvalidLabel(u8),
    /// Probability argument was NaN or infinite.
    InvalidProbability(f64),
}

impl fmt::Display for AttentionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionError::ChannelMismatch { expected, got } => {
                write!(f, "input has {got} channels, block expects {expected}")
            }
            AttentionError::ShapeMismatch { expected, got } => write!(
                f,
                "shape {}x{}x{} does not match {}x{}x{}",
                got.0, got.1, got.2, expected.0, expected.1, expected.2
            ),
            AttentionError::CountMismatch { expected, got } => {
                write!(f, "expected {expected} values, got {got}")
            }
            AttentionError::ZeroDimension => write!(f, "dimensions must be positive"),
            AttentionError::NonFinite { index } => {
                write!(f, "non-finite value at flat index {index}")
            }
            AttentionError::InvalidLabel(l) => write!(f, "label {l} is not 0 or 1"),
            AttentionError::InvalidProbability(p) => {
                write!(f, "probability {p} is not finite")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AttentionError {}

/// Dense H×W×C feature map, channels fastest:
/// `values[(h * width + w) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self, AttentionError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(AttentionError::CountMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(AttentionError::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self, AttentionError> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Number of spatial positions H·W.
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, h: usize, w: usize, c: usize) -> f64 {
        self.values[(h * self.width + w) * self.channels + c]
    }
}

/// One 1×1 projection: a per-position affine map from `in_channels` to
/// `out_channels`. Weights are stored input-major: `weights[i * out + o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseLayer {
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl PointwiseLayer {
    fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weights: vec![0.0; in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    fn seeded(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / libm::sqrt(in_channels as f64);
        let weights = (0..in_channels * out_channels)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..out_channels)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            in_channels,
            out_channels,
            weights,
            bias,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// y = Wᵀx + b for one position.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &self.weights[i * self.out_channels..(i + 1) * self.out_channels];
                for (yo, &w) in y.iter_mut().zip(row) {
                    *yo += xi * w;
                }
            }
        }
    }
}

/// Parameters of the four projection layers. Channel widths halve at each
/// layer (clamped to at least one) and the last layer always ends at one
/// channel: C → C/2 → C/4 → C/8 → 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    layers: [PointwiseLayer; LAYER_COUNT],
}

impl AttentionParams {
    /// The five channel widths traversed by the block.
    pub fn layer_widths(input_channels: usize) -> [usize; LAYER_COUNT + 1] {
        let c = input_channels;
        [
            c,
            (c / 2).max(1),
            (c / 4).max(1),
            (c / 8).max(1),
            1,
        ]
    }

    /// All-zero parameters (useful as a gradient accumulator).
    pub fn zeros(input_channels: usize) -> Result<Self, AttentionError> {
        if input_channels == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        let widths = Self::layer_widths(input_channels);
        let mut layers = Vec::with_capacity(LAYER_COUNT);
        for k in 0..LAYER_COUNT {
            layers.push(PointwiseLayer::zeros(widths[k], widths[k + 1]));
        }
        Ok(Self {
            layers: layers.try_into().expect("exactly four layers"),
        })
    }

    /// Reproducible initialization: every weight and bias is drawn
    /// uniformly from ±1/sqrt(fan_in) using a fixed-seed generator.
    pub fn seeded(input_channels: usize, seed: u64) -> Result<Self, AttentionError> {
        if input_channels == 0 {
            return Err(AttentionError::ZeroDimension);
        }
        let widths = Self::layer_widths(input_channels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(LAYER_COUNT);
        for k in 0..LAYER_COUNT {
            layers.push(PointwiseLayer::seeded(widths[k], widths[k + 1], &mut rng));
        }
        Ok(Self {
            layers: layers.try_into().expect("exactly four layers"),
        })
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn layers(&self) -> &[PointwiseLayer; LAYER_COUNT] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [PointwiseLayer; LAYER_COUNT] {
        &mut self.layers
    }
}

/// Forward result: the spatial mask (length H·W, positive, sums to one)
/// and the masked feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    mask: Vec<f64>,
    output: FeatureMap,
}

impl AttentionOutput {
    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    pub fn output(&self) -> &FeatureMap {
        &self.output
    }
}

/// Gradients from the backward pass: with respect to the input map and to
/// every layer's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGradients {
    pub input: FeatureMap,
    pub params: AttentionParams,
}

struct ForwardCache {
    /// Post-activation outputs of layers 1..=3 (inputs to the next layer).
    hidden: [Vec<f64>; LAYER_COUNT - 1],
    /// Pre-activation outputs of all four layers.
    pre: [Vec<f64>; LAYER_COUNT],
    mask: Vec<f64>,
}

fn forward_cached(
    input: &FeatureMap,
    params: &AttentionParams,
) -> Result<(AttentionOutput, ForwardCache), AttentionError> {
    if input.channels() != params.input_channels() {
        return Err(AttentionError::ChannelMismatch {
            expected: params.input_channels(),
            got: input.channels(),
        });
    }
    let positions = input.positions();
    let mut pre: [Vec<f64>; LAYER_COUNT] = core::array::from_fn(|k| {
        vec![0.0; positions * params.layers[k].out_channels]
    });
    let mut hidden: [Vec<f64>; LAYER_COUNT - 1] = core::array::from_fn(|k| {
        vec![0.0; positions * params.layers[k].out_channels]
    });

    let c_in = input.channels();
    for p in 0..positions {
        let mut x: Vec<f64> = input.values()[p * c_in..(p + 1) * c_in].to_vec();
        for (k, layer) in params.layers.iter().enumerate() {
            let out = layer.out_channels;
            let y = &mut pre[k][p * out..(p + 1) * out];
            layer.apply(&x, y);
            if k < LAYER_COUNT - 1 {
                let h = &mut hidden[k][p * out..(p + 1) * out];
                for (hi, &yi) in h.iter_mut().zip(y.iter()) {
                    *hi = if yi > 0.0 { yi } else { 0.0 };
                }
                x = h.to_vec();
            }
        }
    }

    // Softmax over all spatial positions of the single-channel logits.
    let logits = &pre[LAYER_COUNT - 1];
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut mask: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = mask.iter().sum();
    for m in mask.iter_mut() {
        *m /= sum;
    }

    let mut out_values = Vec::with_capacity(input.values().len());
    for p in 0..positions {
        let s = mask[p];
        for &a in &input.values()[p * c_in..(p + 1) * c_in] {
            out_values.push(a * s);
        }
    }
    let output = FeatureMap::new(input.height(), input.width(), c_in, out_values)?;
    Ok((
        AttentionOutput {
            mask: mask.clone(),
            output,
        },
        ForwardCache { hidden, pre, mask },
    ))
}

/// Runs the block: projections with ReLU after the first three layers, a
/// spatial softmax for the mask, and the per-position multiply.
pub fn forward(
    input: &FeatureMap,
    params: &AttentionParams,
) -> Result<AttentionOutput, AttentionError> {
    forward_cached(input, params).map(|(out, _)| out)
}

/// Exact reverse-mode gradients of the block under an upstream gradient
/// with respect to its output. ReLU uses subgradient 0 at 0.
pub fn backward(
    input: &FeatureMap,
    params: &AttentionParams,
    upstream: &FeatureMap,
) -> Result<AttentionGradients, AttentionError> {
    if upstream.shape() != input.shape() {
        return Err(AttentionError::ShapeMismatch {
            expected: input.shape(),
            got: upstream.shape(),
        });
    }
    let (_, cache) = forward_cached(input, params)?;
    let positions = input.positions();
    let c_in = input.channels();
    let mask = &cache.mask;

    // Split the upstream gradient across the two inputs of the multiply.
    let mut d_input = vec![0.0f64; input.values().len()];
    let mut d_mask = vec![0.0f64; positions];
    for p in 0..positions {
        let s = mask[p];
        let a = &input.values()[p * c_in..(p + 1) * c_in];
        let u = &upstream.values()[p * c_in..(p + 1) * c_in];
        let di = &mut d_input[p * c_in..(p + 1) * c_in];
        let mut acc = 0.0;
        for ((d, &ui), &ai) in di.iter_mut().zip(u).zip(a) {
            *d = ui * s;
            acc += ui * ai;
        }
        d_mask[p] = acc;
    }

    // Softmax backward: dz_p = s_p (dm_p − Σ_q dm_q s_q).
    let dot: f64 = d_mask.iter().zip(mask).map(|(&dm, &s)| dm * s).sum();
    let mut dy: Vec<f64> = d_mask
        .iter()
        .zip(mask)
        .map(|(&dm, &s)| s * (dm - dot))
        .collect();

    // Walk the projection layers backwards.
    let mut grads = AttentionParams::zeros(params.input_channels())?;
    for k in (0..LAYER_COUNT).rev() {
        let layer = &params.layers[k];
        let (n_in, n_out) = (layer.in_channels, layer.out_channels);
        let g = &mut grads.layers[k];
        let mut dx = vec![0.0f64; positions * n_in];
        for p in 0..positions {
            let x = if k == 0 {
                &input.values()[p * n_in..(p + 1) * n_in]
            } else {
                &cache.hidden[k - 1][p * n_in..(p + 1) * n_in]
            };
            let dyp = &dy[p * n_out..(p + 1) * n_out];
            for o in 0..n_out {
                g.bias[o] += dyp[o];
            }
            let dxp = &mut dx[p * n_in..(p + 1) * n_in];
            for i in 0..n_in {
                let row = &layer.weights[i * n_out..(i + 1) * n_out];
                let g_row = &mut g.weights[i * n_out..(i + 1) * n_out];
                let xi = x[i];
                let mut acc = 0.0;
                for o in 0..n_out {
                    g_row[o] += xi * dyp[o];
                    acc += row[o] * dyp[o];
                }
                dxp[i] = acc;
            }
        }
        if k > 0 {
            // Gate by the ReLU that produced this layer's input.
            let pre_prev = &cache.pre[k - 1];
            for (d, &z) in dx.iter_mut().zip(pre_prev) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            dy = dx;
        } else {
            for (di, &dz) in d_input.iter_mut().zip(&dx) {
                *di += dz;
            }
        }
    }

    let input_grad = FeatureMap::new(input.height(), input.width(), c_in, d_input)?;
    Ok(AttentionGradients {
        input: input_grad,
        params: grads,
    })
}

/// Binary cross-entropy of a probability against a {0, 1} label. The
/// probability is clamped to [ε, 1−ε] with ε = 1e-7 before the logs.
pub fn bce_loss(p: f64, label: u8) -> Result<f64, AttentionError> {
    if label > 1 {
        return Err(AttentionError::InvalidLabel(label));
    }
    if !p.is_finite() {
        return Err(AttentionError::InvalidProbability(p));
    }
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    let l = label as f64;
    Ok(-(l * libm::log(p) + (1.0 - l) * libm::log(1.0 - p)))
}
