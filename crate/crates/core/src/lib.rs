//! Collapse 3D volumes into 2D "dynamic images" by rank pooling along the
//! depth axis.
//!
//! The crate has four parts:
//!
//! * [`volume`] — dense volume and plane types with a 1-based depth index and
//!   a fixed accumulation convention (f32 storage, f64 reductions).
//! * [`rankpool`] — approximate rank pooling in two algebraically equivalent
//!   forms (a two-pass definition over prefix averages and a single-pass
//!   closed form), plus average/max depth-pooling baselines.
//! * [`ranksvm`] — the exact pairwise-ranking objective behind the
//!   approximation, its subgradient, and a deterministic subgradient-descent
//!   solver. Serves as the ground truth the fast path is checked against.
//! * [`attention`] — standalone numerics for a four-layer pointwise
//!   attention block (forward, analytic backward) and binary cross-entropy.
//!
//! Everything here is pure computation over immutable inputs: no IO, no
//! global state, no hidden randomness. The crate is `no_std` (with `alloc`);
//! the default `std` feature only adds `std::error::Error` impls.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod attention;
pub mod dynamic_image;
pub mod rankpool;
pub mod ranksvm;
pub mod volume;

pub use dynamic_image::{ChannelMode, DynamicImage, MultiChannelImage, Normalization, PoolMethod};
pub use rankpool::{PoolCoefficients, PoolError, Strategy, ThreeChannelMode};
pub use ranksvm::{RankSvmError, RankSvmProblem, RankSvmSolution, StepSchedule};
pub use volume::{Plane2D, Volume3D, VolumeError};
