//! Step-size Richardson extrapolation for observables of second-order
//! product formulas, whose bias is even in the step size.

use rand::{distr::weighted::WeightedIndex, prelude::Distribution, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::model::LindbladModel;
use crate::propagate::{expectation, ChannelBackend, DensityMatrix, TrotterOrder, TrotterStepper};

/// Shots drawn from one RNG stream.
pub const SHOT_BATCH: u64 = 4096;

/// `r_j = ⌈√8·p / (π·sin(π(2j−1)/(8p)))⌉` for `j = 1..=p`.
pub fn nodes(p: usize) -> Result<Vec<u64>> {
    if p == 0 {
        return Err(Error::OutOfRange {
            name: "p",
            value: 0.0,
            reason: "extrapolation order must be at least 1",
        });
    }
    let pf = p as f64;
    let pi = std::f64::consts::PI;
    Ok((1..=p)
        .map(|j| {
            let angle = pi * (2.0 * j as f64 - 1.0) / (8.0 * pf);
            (8f64.sqrt() * pf / (pi * angle.sin())).ceil() as u64
        })
        .collect())
}

/// `b_j = ∏_{ℓ≠j} 1/(1 − r_ℓ²/r_j²)`.
pub fn coefficients(r_nodes: &[u64]) -> Result<Vec<f64>> {
    if r_nodes.is_empty() {
        return Err(Error::InvalidState("no extrapolation nodes".into()));
    }
    if r_nodes.contains(&0) {
        return Err(Error::OutOfRange {
            name: "r_j",
            value: 0.0,
            reason: "nodes must be positive",
        });
    }
    for (i, a) in r_nodes.iter().enumerate() {
        if r_nodes[i + 1..].contains(a) {
            return Err(Error::Singular { modulus: 0.0 });
        }
    }
    Ok(r_nodes
        .iter()
        .map(|&rj| {
            let rj2 = (rj as f64).powi(2);
            r_nodes
                .iter()
                .filter(|&&rl| rl != rj)
                .map(|&rl| 1.0 / (1.0 - (rl as f64).powi(2) / rj2))
                .product()
        })
        .collect())
}

pub fn l1_norm(b: &[f64]) -> f64 {
    b.iter().map(|x| x.abs()).sum()
}

/// `Σ_j b_j·f_j`.
pub fn extrapolate(values: &[f64], b_coeffs: &[f64]) -> Result<f64> {
    if values.len() != b_coeffs.len() {
        return Err(Error::DimensionMismatch {
            op: "extrapolate",
            left: (values.len(), 1),
            right: (b_coeffs.len(), 1),
        });
    }
    Ok(values.iter().zip(b_coeffs).map(|(v, b)| v * b).sum())
}

/// Node `j` uses step size `s_j·t` with `s_j = 1/(n·r_j)`, applied `n·r_j` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationPlan {
    pub p: usize,
    pub t: f64,
    /// `n = 1/s₀`.
    pub n: u64,
    pub r_nodes: Vec<u64>,
    pub s_steps: Vec<f64>,
    pub b_coeffs: Vec<f64>,
    pub b_l1: f64,
    /// Zero selects the deterministic mode.
    pub shots: u64,
    pub seed: u64,
}

impl ExtrapolationPlan {
    pub fn new(t: f64, n: u64, r_nodes: Vec<u64>, shots: u64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange {
                name: "n",
                value: 0.0,
                reason: "base step count must be at least 1",
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::OutOfRange {
                name: "t",
                value: t,
                reason: "must be non-negative and finite",
            });
        }
        let b_coeffs = coefficients(&r_nodes)?;
        let s_steps = r_nodes.iter().map(|&r| 1.0 / (n as f64 * r as f64)).collect();
        Ok(Self {
            p: r_nodes.len(),
            t,
            n,
            b_l1: l1_norm(&b_coeffs),
            r_nodes,
            s_steps,
            b_coeffs,
            shots,
            seed,
        })
    }

    /// Plan from the node formula of order `p`.
    pub fn with_order(t: f64, n: u64, p: usize, shots: u64, seed: u64) -> Result<Self> {
        Self::new(t, n, nodes(p)?, shots, seed)
    }

    /// Number of product-formula steps at each node.
    pub fn steps(&self) -> Vec<u64> {
        self.r_nodes.iter().map(|&r| self.n * r).collect()
    }

    /// `Σ_j b_j r_j^{−2κ}`, zero for `κ = 1..p−1` and one for `κ = 0`.
    pub fn moment(&self, kappa: u32) -> f64 {
        self.r_nodes
            .iter()
            .zip(&self.b_coeffs)
            .map(|(&r, b)| b * (r as f64).powi(-2 * kappa as i32))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    pub estimate: f64,
    pub per_node_means: Vec<f64>,
    pub per_node_steps: Vec<u64>,
}

fn evolve_node(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t: f64,
    steps: u64,
    backend: ChannelBackend,
) -> Result<DensityMatrix> {
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let stepper = TrotterStepper::new(model, t / steps as f64, TrotterOrder::Second, backend)?;
    stepper.evolve(rho0, steps as usize)
}

fn check_diagonal(obs: &ComplexMatrix) -> Result<()> {
    let (r, c) = obs.shape();
    for i in 0..r {
        for j in 0..c {
            if i != j && obs[(i, j)].norm() > 0.0 {
                return Err(Error::InvalidState(
                    "sampled mode needs an observable diagonal in the computational basis".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Mean of `shots` computational-basis outcomes `O[b,b]`, `b ~ diag(ρ)`.
///
/// Batch `k` of node `node` draws from ChaCha20 stream `node·2³² + k` under
/// the master seed, so results do not depend on the thread count.
pub fn sample_diagonal_mean(
    obs: &ComplexMatrix,
    rho: &DensityMatrix,
    shots: u64,
    seed: u64,
    node: u64,
) -> Result<f64> {
    check_diagonal(obs)?;
    if shots == 0 {
        return Err(Error::OutOfRange {
            name: "shots",
            value: 0.0,
            reason: "sampling needs at least one shot",
        });
    }
    let diag = rho.matrix().diagonal();
    // roundoff can leave populations a hair below zero
    let weights: Vec<f64> = diag.iter().map(|z| z.re.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidState(format!("bad population vector: {e}")))?;
    let values: Vec<f64> = obs.diagonal().iter().map(|z| z.re).collect();
    let batches = shots.div_ceil(SHOT_BATCH);
    let sums: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream((node << 32) | k);
            let count = SHOT_BATCH.min(shots - k * SHOT_BATCH);
            (0..count).map(|_| values[dist.sample(&mut rng)]).sum()
        })
        .collect();
    Ok(sums.iter().sum::<f64>() / shots as f64)
}

/// States `S(s_j t)^{1/s_j} ρ₀` for every node, in node order.
pub fn node_states(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    plan: &ExtrapolationPlan,
    backend: ChannelBackend,
) -> Result<Vec<DensityMatrix>> {
    plan.steps()
        .par_iter()
        .map(|&s| evolve_node(model, rho0, plan.t, s, backend))
        .collect()
}

/// Combines already evolved node states into an estimate.
pub fn estimate_from_states(
    obs: &ComplexMatrix,
    states: &[DensityMatrix],
    plan: &ExtrapolationPlan,
) -> Result<ExtrapolationResult> {
    if plan.b_coeffs.len() != plan.r_nodes.len() || states.len() != plan.r_nodes.len() {
        return Err(Error::InvalidState(
            "plan nodes, coefficients and states differ in length".into(),
        ));
    }
    if plan.shots > 0 {
        check_diagonal(obs)?;
    }
    let means: Vec<f64> = states
        .iter()
        .enumerate()
        .map(|(j, rho)| {
            if plan.shots == 0 {
                expectation(obs, rho)
            } else {
                sample_diagonal_mean(obs, rho, plan.shots, plan.seed, j as u64)
            }
        })
        .collect::<Result<_>>()?;
    Ok(ExtrapolationResult {
        estimate: extrapolate(&means, &plan.b_coeffs)?,
        per_node_means: means,
        per_node_steps: plan.steps(),
    })
}

/// Runs every node of `plan` and combines the node values with `b_j`.
///
/// With `plan.shots == 0` each node value is `tr[O·S(s_j t)^{1/s_j} ρ₀]`;
/// otherwise it is the mean of `plan.shots` basis-measurement outcomes.
pub fn run_extrapolation(
    model: &LindbladModel,
    obs: &ComplexMatrix,
    rho0: &DensityMatrix,
    plan: &ExtrapolationPlan,
    backend: ChannelBackend,
) -> Result<ExtrapolationResult> {
    if plan.shots > 0 {
        check_diagonal(obs)?;
    }
    let states = node_states(model, rho0, plan, backend)?;
    estimate_from_states(obs, &states, plan)
}
