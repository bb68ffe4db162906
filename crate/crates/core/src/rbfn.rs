//! Radial basis function network mapping the CPG rhythm to joint references.
//!
//! Hidden unit i responds with `exp(−Σ_j (ρ_j − μ_ij)² / σ²)`; the output
//! layer is linear, `a_ref = Wᵀ R + b`. Centers are the rhythm sampled at
//! H evenly spaced instants of one period, so only W and b are ever fitted.

use crate::cpg::{Cpg, RhythmSignal, NUM_LEGS};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};
use thiserror::Error;

pub const NUM_JOINTS: usize = 12;

/// Joint angles ordered [abd, hip, knee] × [LF, RF, LH, RH].
pub type JointVector = [f64; NUM_JOINTS];

const INITIAL_RIDGE: f64 = 1e-8;
const MAX_SOLVES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RbfnError {
    #[error("RBFN needs at least two neurons, got {0}")]
    TooFewNeurons(usize),
    #[error("RBFN variance must be positive, got {0}")]
    InvalidVariance(f64),
    #[error("fit needs at least one target")]
    NoTargets,
    #[error("fit threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("RBFN fit did not reach the threshold: residual {residual:.3e} rad")]
    NonConvergence { residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfnConfig {
    pub neurons: usize,
    pub sigma_sq: f64,
    /// Fit threshold on the per-joint absolute error (rad).
    pub delta: f64,
}

impl Default for RbfnConfig {
    fn default() -> Self {
        Self {
            neurons: 20,
            sigma_sq: 0.04,
            delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfnParams {
    pub means: Vec<RhythmSignal>,
    pub sigma_sq: f64,
    /// H rows of output weights, one column per joint.
    pub weights: Vec<JointVector>,
    pub bias: JointVector,
}

/// μ_i = ρ((i−1)·T/(H−1)) for i = 1..H.
pub fn compute_means(cpg: &Cpg, neurons: usize) -> Result<Vec<RhythmSignal>, RbfnError> {
    if neurons < 2 {
        return Err(RbfnError::TooFewNeurons(neurons));
    }
    let period = cpg.period();
    Ok((0..neurons)
        .map(|i| cpg.rhythm_at(i as f64 * period / (neurons - 1) as f64))
        .collect())
}

impl RbfnParams {
    /// Centers from the CPG, zero output layer.
    pub fn new(cpg: &Cpg, neurons: usize, sigma_sq: f64) -> Result<Self, RbfnError> {
        if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
            return Err(RbfnError::InvalidVariance(sigma_sq));
        }
        let means = compute_means(cpg, neurons)?;
        Ok(Self {
            weights: vec![[0.0; NUM_JOINTS]; means.len()],
            means,
            sigma_sq,
            bias: [0.0; NUM_JOINTS],
        })
    }

    pub fn neurons(&self) -> usize {
        self.means.len()
    }

    /// Hash of every parameter's bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.sigma_sq.to_bits().hash(&mut h);
        for m in &self.means {
            for v in m {
                v.to_bits().hash(&mut h);
            }
        }
        for row in &self.weights {
            for v in row {
                v.to_bits().hash(&mut h);
            }
        }
        for v in &self.bias {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

pub fn hidden_activations(rho: &RhythmSignal, params: &RbfnParams) -> Vec<f64> {
    params
        .means
        .iter()
        .map(|mu| {
            let d2: f64 = (0..NUM_LEGS).map(|j| (rho[j] - mu[j]).powi(2)).sum();
            (-d2 / params.sigma_sq).exp()
        })
        .collect()
}

pub fn forward(rho: &RhythmSignal, params: &RbfnParams) -> JointVector {
    let r = hidden_activations(rho, params);
    let mut out = params.bias;
    for (ri, row) in r.iter().zip(params.weights.iter()) {
        for (o, w) in out.iter_mut().zip(row.iter()) {
            *o += w * ri;
        }
    }
    out
}

fn max_abs_error(targets: &[(RhythmSignal, JointVector)], params: &RbfnParams) -> f64 {
    targets
        .iter()
        .map(|(rho, y)| {
            let out = forward(rho, params);
            out.iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Fits the output layer so every target is reproduced within `delta`.
///
/// Ridge-regularised least squares on the activation design matrix (bias
/// unpenalised), followed by iterative refinement with a shrinking ridge
/// until the worst per-joint error drops below `delta`.
pub fn fit(
    targets: &[(RhythmSignal, JointVector)],
    delta: f64,
    params: &RbfnParams,
) -> Result<RbfnParams, RbfnError> {
    if targets.is_empty() {
        return Err(RbfnError::NoTargets);
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(RbfnError::InvalidThreshold(delta));
    }
    let h = params.neurons();
    let n = targets.len();
    let cols = h + 1;
    let mut design = DMatrix::<f64>::zeros(n, cols);
    let mut y = DMatrix::<f64>::zeros(n, NUM_JOINTS);
    for (row, (rho, target)) in targets.iter().enumerate() {
        for (c, r) in hidden_activations(rho, params).into_iter().enumerate() {
            design[(row, c)] = r;
        }
        design[(row, h)] = 1.0;
        for (c, v) in target.iter().enumerate() {
            y[(row, c)] = *v;
        }
    }
    let gram = design.transpose() * &design;
    let mut ridge = INITIAL_RIDGE;
    let mut solution = DMatrix::<f64>::zeros(cols, NUM_JOINTS);
    let mut candidate = params.clone();
    let mut residual = f64::INFINITY;

    for _ in 0..MAX_SOLVES {
        let mut normal = gram.clone();
        for i in 0..h {
            normal[(i, i)] += ridge;
        }
        let Some(chol) = normal.cholesky() else {
            ridge *= 10.0;
            continue;
        };
        let rhs = design.transpose() * (&y - &design * &solution);
        solution += chol.solve(&rhs);
        write_solution(&solution, &mut candidate);
        residual = max_abs_error(targets, &candidate);
        if residual <= delta {
            return Ok(candidate);
        }
        ridge = (ridge * 0.1).max(1e-15);
    }
    Err(RbfnError::NonConvergence { residual })
}

fn write_solution(solution: &DMatrix<f64>, params: &mut RbfnParams) {
    let h = params.neurons();
    for i in 0..h {
        for c in 0..NUM_JOINTS {
            params.weights[i][c] = solution[(i, c)];
        }
    }
    for c in 0..NUM_JOINTS {
        params.bias[c] = solution[(h, c)];
    }
}

/// Flat [W row-major, b] view used by checkpoints.
pub fn output_layer_vector(params: &RbfnParams) -> DVector<f64> {
    let mut v = Vec::with_capacity(params.neurons() * NUM_JOINTS + NUM_JOINTS);
    for row in &params.weights {
        v.extend_from_slice(row);
    }
    v.extend_from_slice(&params.bias);
    DVector::from_vec(v)
}
