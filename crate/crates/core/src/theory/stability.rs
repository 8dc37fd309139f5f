use crate::activation::MomentSet;
use crate::engine::SignalModel;

use super::mean::MeanArtifacts;
use super::mean_square::MsArtifacts;

const UNIFORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanStabilityReport {
    pub rho_b: f64,
    /// `ρ(B̄) < 1`, necessary and sufficient.
    pub stable: bool,
    /// `2 / (max_k ρ(R_{x,k}) + 2η)`.
    pub sufficient_bound: f64,
    /// Largest mean step-size `max_k μ̄_k`.
    pub mean_step: f64,
    /// All mean step-sizes equal; the bound applies only then.
    pub uniform_steps: bool,
}

impl MeanStabilityReport {
    pub fn bound_satisfied(&self) -> bool {
        self.uniform_steps && self.mean_step > 0.0 && self.mean_step < self.sufficient_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsStabilityReport {
    pub rho_f: f64,
    pub stable: bool,
    /// `1 / (2η + max_k ρ(R_{x,k}))`.
    pub sufficient_bound: f64,
    pub mean_step: f64,
    pub uniform_steps: bool,
}

impl MsStabilityReport {
    pub fn bound_satisfied(&self) -> bool {
        self.uniform_steps && self.mean_step > 0.0 && self.mean_step < self.sufficient_bound
    }
}

fn step_summary(ms: &MomentSet) -> (f64, bool) {
    let steps: Vec<f64> = (0..ms.nodes()).map(|k| ms.mean_m[(k, k)]).collect();
    let max = steps.iter().copied().fold(0.0, f64::max);
    let min = steps.iter().copied().fold(f64::INFINITY, f64::min);
    (max, max - min <= UNIFORM_TOL * max.max(1.0))
}

pub fn mean_stability(ma: &MeanArtifacts, ms: &MomentSet, model: &SignalModel) -> MeanStabilityReport {
    let (mean_step, uniform_steps) = step_summary(ms);
    MeanStabilityReport {
        rho_b: ma.rho,
        stable: ma.rho < 1.0,
        sufficient_bound: 2.0 / (model.max_regressor_eigenvalue() + 2.0 * ma.eta),
        mean_step,
        uniform_steps,
    }
}

pub fn ms_stability(msa: &MsArtifacts, ms: &MomentSet, model: &SignalModel) -> MsStabilityReport {
    let (mean_step, uniform_steps) = step_summary(ms);
    let rho_f = msa.rho_f();
    MsStabilityReport {
        rho_f,
        stable: rho_f < 1.0,
        sufficient_bound: 1.0 / (2.0 * msa.eta + model.max_regressor_eigenvalue()),
        mean_step,
        uniform_steps,
    }
}

/// Eigenvalues `1 − ημ̄_k − μ̄_k λ_j(R_{x,k}) − ημ̄_ℓ − μ̄_ℓ λ_i(R_{x,ℓ})` of the
/// block-diagonal part of `I − I ⊗_b M̄(R̄_x + ηI) − M̄(R̄_x + ηI) ⊗_b I`,
/// listed for `ℓ, k, i, j` in that nesting order.
pub fn kronecker_sum_eigenvalues(ms: &MomentSet, model: &SignalModel, eta: f64) -> Vec<f64> {
    let n = ms.nodes();
    let eig: Vec<Vec<f64>> = model
        .covariances()
        .iter()
        .map(|r| r.clone().symmetric_eigenvalues().iter().copied().collect())
        .collect();
    let mu: Vec<f64> = (0..n).map(|k| ms.mean_m[(k, k)]).collect();
    let mut out = Vec::new();
    for l in 0..n {
        for k in 0..n {
            for &li in &eig[l] {
                for &lj in &eig[k] {
                    out.push(1.0 - eta * mu[k] - mu[k] * lj - eta * mu[l] - mu[l] * li);
                }
            }
        }
    }
    out
}
