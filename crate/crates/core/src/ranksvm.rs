//! Exact rank pooling: the convex pairwise-ranking objective, its
//! subgradient, and a deterministic subgradient-descent solver.
//!
//! The objective over a weight vector `d` is
//!
//! ```text
//! E(d) = λ/2 ‖d‖² + 2/(T(T−1)) · Σ_{q>t} max{0, 1 − s_q + s_t}
//! ```
//!
//! where `s_t = ⟨d, V_t⟩` and `V_t` is the prefix mean of the first `t`
//! slices, flattened. Minimizing E orders the prefix means by slice index;
//! the minimizer reshaped as a plane is the exact dynamic image. The
//! closed-form pooling in [`crate::rankpool`] is exactly `−(T(T−1)/2)`
//! times the subgradient of E at zero with λ = 0, which is what lets the
//! two modules check each other.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::volume::Volume3D;

/// Errors raised when building or solving a ranking problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankSvmError {
    /// The pair term divides by T(T−1), so at least two slices are needed.
    InvalidDepth { depth: usize },
    /// The regularizer weight must be finite and non-negative.
    NegativeLambda,
    /// A weight vector's dimension does not match the feature dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// A solver parameter was out of range.
    InvalidSolverConfig(&'static str),
}

impl fmt::Display for RankSvmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSvmError::InvalidDepth { depth } => {
                write!(f, "ranking problem needs depth >= 2, got {depth}")
            }
            RankSvmError::NegativeLambda => write!(f, "lambda must be finite and >= 0"),
            RankSvmError::DimensionMismatch { expected, got } => {
                write!(f, "weight dimension {got} does not match feature dimension {expected}")
            }
            RankSvmError::InvalidSolverConfig(msg) => write!(f, "{msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RankSvmError {}

/// The pairwise-ranking objective instance: T flattened prefix-mean
/// features of dimension m, and the regularizer weight.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSvmProblem {
    /// Row-major T × m feature matrix; row t-1 is V_t.
    features: Vec<f64>,
    dim: usize,
    depth: usize,
    lambda: f64,
}

impl RankSvmProblem {
    /// Builds a problem from explicit feature rows.
    pub fn new(rows: Vec<Vec<f64>>, lambda: f64) -> Result<Self, RankSvmError> {
        if rows.len() < 2 {
            return Err(RankSvmError::InvalidDepth { depth: rows.len() });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(RankSvmError::NegativeLambda);
        }
        let dim = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(RankSvmError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Ok(Self {
            features,
            dim,
            depth: rows.len(),
            lambda,
        })
    }

    /// Builds the problem whose features are the volume's flattened prefix
    /// means, accumulated in f64.
    pub fn from_volume(v: &Volume3D, lambda: f64) -> Result<Self, RankSvmError> {
        if v.depth() < 2 {
            return Err(RankSvmError::InvalidDepth { depth: v.depth() });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(RankSvmError::NegativeLambda);
        }
        let m = v.slice_len();
        let mut sums = vec![0.0f64; m];
        let mut features = Vec::with_capacity(v.depth() * m);
        for t in 1..=v.depth() {
            let slice = v.slice_values(t).expect("t in 1..=depth");
            for (s, &x) in sums.iter_mut().zip(slice) {
                *s += x as f64;
            }
            let inv = 1.0 / t as f64;
            features.extend(sums.iter().map(|&s| s * inv));
        }
        Ok(Self {
            features,
            dim: m,
            depth: v.depth(),
            lambda,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Feature dimension m.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Feature row V_t for 1-based t.
    pub fn feature(&self, t: usize) -> &[f64] {
        let row = t - 1;
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    fn check_dim(&self, d: &[f64]) -> Result<(), RankSvmError> {
        if d.len() != self.dim {
            return Err(RankSvmError::DimensionMismatch {
                expected: self.dim,
                got: d.len(),
            });
        }
        Ok(())
    }

    /// Ranking scores `s_t = ⟨d, V_t⟩` for t = 1..=T.
    pub fn scores(&self, d: &[f64]) -> Result<Vec<f64>, RankSvmError> {
        self.check_dim(d)?;
        Ok((1..=self.depth)
            .map(|t| {
                self.feature(t)
                    .iter()
                    .zip(d)
                    .map(|(&f, &w)| f * w)
                    .sum::<f64>()
            })
            .collect())
    }

    /// E(d): the regularizer plus the scaled pairwise hinge sum.
    pub fn objective(&self, d: &[f64]) -> Result<f64, RankSvmError> {
        let scores = self.scores(d)?;
        let mut hinge_sum = 0.0f64;
        for t in 0..self.depth {
            for q in t + 1..self.depth {
                let margin = 1.0 - scores[q] + scores[t];
                if margin > 0.0 {
                    hinge_sum += margin;
                }
            }
        }
        let tf = self.depth as f64;
        let reg = 0.5 * self.lambda * d.iter().map(|&x| x * x).sum::<f64>();
        // Multiply before dividing so that the all-pairs-at-1 case (d = 0)
        // lands exactly on 1.0.
        Ok(reg + (2.0 * hinge_sum) / (tf * (tf - 1.0)))
    }

    /// A subgradient of E at `d`. Each strictly active pair (positive
    /// hinge argument) contributes `−(V_q − V_t)`; ties contribute zero,
    /// a fixed valid choice that keeps the solver deterministic.
    pub fn subgradient(&self, d: &[f64]) -> Result<Vec<f64>, RankSvmError> {
        let scores = self.scores(d)?;
        // Aggregate per-row coefficients first: an active pair (t, q) adds
        // +1 to row t and −1 to row q. One pass over the features then
        // materializes the sum.
        let mut coeff = vec![0.0f64; self.depth];
        for t in 0..self.depth {
            for q in t + 1..self.depth {
                if 1.0 - scores[q] + scores[t] > 0.0 {
                    coeff[t] += 1.0;
                    coeff[q] -= 1.0;
                }
            }
        }
        let mut g = vec![0.0f64; self.dim];
        for t in 0..self.depth {
            let c = coeff[t];
            if c != 0.0 {
                let row = &self.features[t * self.dim..(t + 1) * self.dim];
                for (gi, &f) in g.iter_mut().zip(row) {
                    *gi += c * f;
                }
            }
        }
        let tf = self.depth as f64;
        let denom = tf * (tf - 1.0);
        for gi in g.iter_mut() {
            *gi = (2.0 * *gi) / denom;
        }
        if self.lambda > 0.0 {
            for (gi, &di) in g.iter_mut().zip(d) {
                *gi += self.lambda * di;
            }
        }
        Ok(g)
    }

    /// Deterministic subgradient descent from d = 0 with steps
    /// `step0 / sqrt(k)`. Returns the best-objective iterate among the
    /// iterates produced by steps (not the starting point, and not
    /// necessarily the last); ties keep the earliest.
    pub fn solve(&self, iterations: usize, step0: f64) -> Result<RankSvmSolution, RankSvmError> {
        if iterations == 0 {
            return Err(RankSvmError::InvalidSolverConfig("iterations must be >= 1"));
        }
        if !step0.is_finite() || step0 <= 0.0 {
            return Err(RankSvmError::InvalidSolverConfig(
                "step0 must be finite and positive",
            ));
        }
        let schedule = StepSchedule { step0 };
        let mut d = vec![0.0f64; self.dim];
        let mut trace = Vec::with_capacity(iterations + 1);
        trace.push(self.objective(&d)?);
        let mut best_objective = f64::INFINITY;
        let mut best_d: Vec<f64> = d.clone();
        for k in 1..=iterations {
            let g = self.subgradient(&d)?;
            let step = schedule.step(k);
            for (di, gi) in d.iter_mut().zip(&g) {
                *di -= step * gi;
            }
            let e = self.objective(&d)?;
            trace.push(e);
            if k == 1 || e < best_objective {
                best_objective = e;
                best_d.copy_from_slice(&d);
            }
        }
        Ok(RankSvmSolution {
            weights: best_d,
            best_objective,
            objective_trace: trace,
            iterations,
            step_schedule: schedule,
        })
    }
}

/// Diminishing step schedule `step0 / sqrt(k)`, k counted from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub step0: f64,
}

impl StepSchedule {
    pub fn step(&self, k: usize) -> f64 {
        self.step0 / libm::sqrt(k as f64)
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step0/sqrt(k), step0 = {}", self.step0)
    }
}

/// Solver output: the best iterate, and the raw objective value after each
/// iteration (entry 0 is the objective at the zero start).
#[derive(Debug, Clone, PartialEq)]
pub struct RankSvmSolution {
    weights: Vec<f64>,
    best_objective: f64,
    objective_trace: Vec<f64>,
    iterations: usize,
    step_schedule: StepSchedule,
}

impl RankSvmSolution {
    /// The learned weight vector d, reshapeable as a plane.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Objective of the returned weights.
    pub fn best_objective(&self) -> f64 {
        self.best_objective
    }

    /// Objective at the zero starting point.
    pub fn initial_objective(&self) -> f64 {
        self.objective_trace[0]
    }

    /// Raw per-iteration objective values, starting with the zero start.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Running minimum of the trace; non-increasing by construction.
    pub fn running_min_trace(&self) -> Vec<f64> {
        let mut min = f64::INFINITY;
        self.objective_trace
            .iter()
            .map(|&e| {
                min = min.min(e);
                min
            })
            .collect()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn step_schedule(&self) -> StepSchedule {
        self.step_schedule
    }
}
