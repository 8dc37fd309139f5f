//! Random activation of agents and links.
//!
//! Each iteration the network draws a step-size matrix `M(i)`, a left-stochastic
//! combination matrix `A(i)` and a right-stochastic regularization matrix
//! `P(i)`. The Bernoulli model switches every step-size, intra-cluster weight
//! and inter-cluster factor on or off independently; the receiving node
//! re-normalizes by adjusting its own diagonal entry.
//!
//! Kronecker convention used throughout the crate: `X ⊗ Y` places
//! `X[i,j]·Y[k,l]` at row `i·N + k`, column `j·N + l` (0-based). The
//! Kronecker covariance `C_X = E[(X − X̄) ⊗ (X − X̄)]` therefore holds
//! `cov(X[r1,c1], X[r2,c2])` at row `r1·N + r2`, column `c1·N + c2`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::network::ClusteredNetwork;
use crate::sparse::SparseMatrix;

const SUM_TOL: f64 = 1e-12;

/// A nominal weight that is present with probability `prob` and zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWeight {
    pub neighbor: usize,
    pub weight: f64,
    pub prob: f64,
}

/// One realization `(M(i), A(i), P(i))` in sparse form.
///
/// `combine[k]` lists `(ℓ, a_ℓk)` for column `k` of `A` and `regularize[k]`
/// lists `(ℓ, ρ_kℓ)` for row `k` of `P`. The first entry of each list is the
/// node itself; inactive links are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDraw {
    pub steps: Vec<f64>,
    pub combine: Vec<Vec<(usize, f64)>>,
    pub regularize: Vec<Vec<(usize, f64)>>,
}

impl ActivationDraw {
    pub fn nodes(&self) -> usize {
        self.steps.len()
    }

    pub fn m_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.steps))
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        let n = self.nodes();
        let mut a = DMatrix::zeros(n, n);
        for (k, col) in self.combine.iter().enumerate() {
            for &(l, w) in col {
                a[(l, k)] += w;
            }
        }
        a
    }

    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.nodes();
        let mut p = DMatrix::zeros(n, n);
        for (k, row) in self.regularize.iter().enumerate() {
            for &(l, w) in row {
                p[(k, l)] += w;
            }
        }
        p
    }
}

/// First- and second-order moments of an activation model.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mean_m: DMatrix<f64>,
    pub mean_a: DMatrix<f64>,
    pub mean_p: DMatrix<f64>,
    pub cov_m: SparseMatrix,
    pub cov_a: SparseMatrix,
    pub cov_p: SparseMatrix,
}

impl MomentSet {
    pub fn nodes(&self) -> usize {
        self.mean_m.nrows()
    }

    /// Moments of a deterministic draw: the given means with zero covariances.
    pub fn deterministic(draw: &ActivationDraw) -> Self {
        let n2 = draw.nodes() * draw.nodes();
        Self {
            mean_m: draw.m_matrix(),
            mean_a: draw.a_matrix(),
            mean_p: draw.p_matrix(),
            cov_m: SparseMatrix::zeros(n2, n2),
            cov_a: SparseMatrix::zeros(n2, n2),
            cov_p: SparseMatrix::zeros(n2, n2),
        }
    }

    /// Same means, covariances dropped.
    pub fn without_covariances(&self) -> Self {
        let n2 = self.nodes() * self.nodes();
        Self {
            cov_m: SparseMatrix::zeros(n2, n2),
            cov_a: SparseMatrix::zeros(n2, n2),
            cov_p: SparseMatrix::zeros(n2, n2),
            ..self.clone()
        }
    }

    /// `E[M ⊗ M] = M̄ ⊗ M̄ + C_M`.
    pub fn second_moment_m(&self) -> SparseMatrix {
        kron_mean(&self.mean_m).add(&self.cov_m)
    }

    /// `E[A ⊗ A] = Ā ⊗ Ā + C_A`.
    pub fn second_moment_a(&self) -> SparseMatrix {
        kron_mean(&self.mean_a).add(&self.cov_a)
    }

    /// `E[P ⊗ P] = P̄ ⊗ P̄ + C_P`.
    pub fn second_moment_p(&self) -> SparseMatrix {
        kron_mean(&self.mean_p).add(&self.cov_p)
    }

    /// `E[Q ⊗ Q]` with `Q = I − P`.
    pub fn second_moment_q(&self) -> SparseMatrix {
        let n = self.nodes();
        let p = SparseMatrix::from_dense(&self.mean_p);
        let eye = SparseMatrix::identity(n);
        SparseMatrix::identity(n * n)
            .add(&SparseMatrix::kron(&eye, &p).scale(-1.0))
            .add(&SparseMatrix::kron(&p, &eye).scale(-1.0))
            .add(&self.second_moment_p())
    }
}

fn kron_mean(m: &DMatrix<f64>) -> SparseMatrix {
    let s = SparseMatrix::from_dense(m);
    SparseMatrix::kron(&s, &s)
}

/// An asynchronous network model: a sampler together with its exact moments.
pub trait ActivationModel: Sync {
    fn nodes(&self) -> usize;

    /// Overwrites `draw` with a fresh realization.
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, draw: &mut ActivationDraw);

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActivationDraw {
        let mut draw = self.mean_draw();
        self.sample_into(rng, &mut draw);
        draw
    }

    /// The deterministic draw whose entries are the model means.
    fn mean_draw(&self) -> ActivationDraw;

    fn moments(&self) -> MomentSet;
}

/// A model that always returns the same draw; used for synchronous runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedActivation(pub ActivationDraw);

impl ActivationModel for FixedActivation {
    fn nodes(&self) -> usize {
        self.0.nodes()
    }

    fn sample_into<R: Rng + ?Sized>(&self, _rng: &mut R, draw: &mut ActivationDraw) {
        draw.clone_from(&self.0);
    }

    fn mean_draw(&self) -> ActivationDraw {
        self.0.clone()
    }

    fn moments(&self) -> MomentSet {
        MomentSet::deterministic(&self.0)
    }
}

/// Nominal values and success probabilities of the Bernoulli network.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliParams {
    steps: Vec<f64>,
    step_probs: Vec<f64>,
    combine: Vec<Vec<RandomWeight>>,
    regularize: Vec<Vec<RandomWeight>>,
}

impl BernoulliParams {
    /// `combine[k]` holds the weights `a_ℓk` for `ℓ ∈ N_k^- ∩ C(k)`;
    /// `regularize[k]` holds the factors `ρ_kℓ` for `ℓ ∈ N_k \ C(k)`.
    pub fn new(
        net: &ClusteredNetwork,
        steps: Vec<f64>,
        step_probs: Vec<f64>,
        mut combine: Vec<Vec<RandomWeight>>,
        mut regularize: Vec<Vec<RandomWeight>>,
    ) -> Result<Self> {
        let n = net.nodes();
        if steps.len() != n || step_probs.len() != n || combine.len() != n || regularize.len() != n {
            return Err(Error::InvalidParams(format!(
                "per-node parameter lists must have {n} entries"
            )));
        }
        for k in 0..n {
            if !(steps[k] > 0.0 && steps[k].is_finite()) {
                return Err(Error::InvalidParams(format!("step-size of node {k} must be positive")));
            }
            check_prob(step_probs[k], || format!("step probability of node {k}"))?;
            let view = net.neighborhood(k)?;
            for (list, allowed, what) in [
                (&mut combine[k], &view.intra_strict, "combination"),
                (&mut regularize[k], &view.inter, "regularization"),
            ] {
                list.sort_by_key(|w| w.neighbor);
                let mut total = 0.0;
                for (idx, w) in list.iter().enumerate() {
                    if idx > 0 && list[idx - 1].neighbor == w.neighbor {
                        return Err(Error::InvalidParams(format!(
                            "duplicate {what} weight {} -> {k}",
                            w.neighbor
                        )));
                    }
                    if allowed.binary_search(&w.neighbor).is_err() {
                        return Err(Error::InvalidParams(format!(
                            "{what} weight between {k} and {} is outside the allowed neighborhood",
                            w.neighbor
                        )));
                    }
                    if !(w.weight > 0.0 && w.weight <= 1.0) {
                        return Err(Error::InvalidParams(format!(
                            "{what} weight between {k} and {} must lie in (0, 1]",
                            w.neighbor
                        )));
                    }
                    check_prob(w.prob, || format!("{what} probability between {k} and {}", w.neighbor))?;
                    total += w.weight;
                }
                if total > 1.0 + SUM_TOL {
                    return Err(Error::InvalidParams(format!(
                        "{what} weights of node {k} sum to {total} > 1"
                    )));
                }
            }
        }
        Ok(Self {
            steps,
            step_probs,
            combine,
            regularize,
        })
    }

    /// Uniform rules: `a_ℓk = 1/|N_k ∩ C(k)|` and `ρ_kℓ = 1/|N_k \ C(k)|`,
    /// with the probabilities supplied per node (`q`), per directed intra link
    /// `ℓ → k` (`p`) and per directed inter link `k ← ℓ` (`r`).
    pub fn uniform_rules(
        net: &ClusteredNetwork,
        steps: Vec<f64>,
        step_probs: Vec<f64>,
        link_prob: impl Fn(usize, usize) -> f64,
        reg_prob: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = net.nodes();
        let mut combine = Vec::with_capacity(n);
        let mut regularize = Vec::with_capacity(n);
        for k in 0..n {
            let view = net.neighborhood(k)?;
            let a = 1.0 / view.intra.len() as f64;
            combine.push(
                view.intra_strict
                    .iter()
                    .map(|&l| RandomWeight {
                        neighbor: l,
                        weight: a,
                        prob: link_prob(l, k),
                    })
                    .collect(),
            );
            let rho = if view.inter.is_empty() { 0.0 } else { 1.0 / view.inter.len() as f64 };
            regularize.push(
                view.inter
                    .iter()
                    .map(|&l| RandomWeight {
                        neighbor: l,
                        weight: rho,
                        prob: reg_prob(k, l),
                    })
                    .collect(),
            );
        }
        Self::new(net, steps, step_probs, combine, regularize)
    }

    /// Uniform rules with the same probability everywhere.
    pub fn uniform(net: &ClusteredNetwork, step: f64, q: f64, p: f64, r: f64) -> Result<Self> {
        let n = net.nodes();
        Self::uniform_rules(net, vec![step; n], vec![q; n], |_, _| p, |_, _| r)
    }

    pub fn nodes(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn step_probs(&self) -> &[f64] {
        &self.step_probs
    }

    pub fn combine(&self, k: usize) -> &[RandomWeight] {
        &self.combine[k]
    }

    pub fn regularize(&self, k: usize) -> &[RandomWeight] {
        &self.regularize[k]
    }

    /// Mean step-sizes `μ̄_k = μ_k q_k`.
    pub fn mean_steps(&self) -> Vec<f64> {
        self.steps.iter().zip(&self.step_probs).map(|(m, q)| m * q).collect()
    }

    /// Number of independent Bernoulli variables in one draw.
    pub fn random_variable_count(&self) -> usize {
        self.nodes()
            + self.combine.iter().map(Vec::len).sum::<usize>()
            + self.regularize.iter().map(Vec::len).sum::<usize>()
    }

    /// The same nominal values with every probability set to one.
    pub fn always_on(&self) -> Self {
        let on = |list: &Vec<RandomWeight>| list.iter().map(|w| RandomWeight { prob: 1.0, ..*w }).collect();
        Self {
            steps: self.steps.clone(),
            step_probs: vec![1.0; self.nodes()],
            combine: self.combine.iter().map(on).collect(),
            regularize: self.regularize.iter().map(on).collect(),
        }
    }
}

fn check_prob(p: f64, what: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{} = {p} is not in [0, 1]", what())))
    }
}

fn fill_weights<R: Rng + ?Sized>(
    k: usize,
    weights: &[RandomWeight],
    rng: &mut R,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    out.push((k, 0.0));
    let mut total = 0.0;
    for w in weights {
        if rng.random::<f64>() < w.prob {
            out.push((w.neighbor, w.weight));
            total += w.weight;
        }
    }
    out[0].1 = 1.0 - total;
}

fn mean_weights(k: usize, weights: &[RandomWeight]) -> Vec<(usize, f64)> {
    let mut out = vec![(k, 0.0)];
    let mut total = 0.0;
    for w in weights {
        let m = w.weight * w.prob;
        out.push((w.neighbor, m));
        total += m;
    }
    out[0].1 = 1.0 - total;
    out
}

impl ActivationModel for BernoulliParams {
    fn nodes(&self) -> usize {
        self.steps.len()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, draw: &mut ActivationDraw) {
        let n = self.nodes();
        draw.steps.resize(n, 0.0);
        draw.combine.resize_with(n, Vec::new);
        draw.regularize.resize_with(n, Vec::new);
        for k in 0..n {
            draw.steps[k] = if rng.random::<f64>() < self.step_probs[k] { self.steps[k] } else { 0.0 };
            fill_weights(k, &self.combine[k], rng, &mut draw.combine[k]);
            fill_weights(k, &self.regularize[k], rng, &mut draw.regularize[k]);
        }
    }

    fn mean_draw(&self) -> ActivationDraw {
        ActivationDraw {
            steps: self.mean_steps(),
            combine: (0..self.nodes()).map(|k| mean_weights(k, &self.combine[k])).collect(),
            regularize: (0..self.nodes()).map(|k| mean_weights(k, &self.regularize[k])).collect(),
        }
    }

    fn moments(&self) -> MomentSet {
        let n = self.nodes();
        let mean = self.mean_draw();
        let n2 = n * n;

        let cov_m = SparseMatrix::from_triplets(
            n2,
            n2,
            (0..n)
                .map(|k| {
                    let q = self.step_probs[k];
                    (k * n + k, k * n + k, self.steps[k].powi(2) * q * (1.0 - q))
                })
                .collect(),
        );

        // Column k of A: cov(a_ℓk, a_nk) sits at (ℓN + n, kN + k).
        let mut cov_a = Vec::new();
        for k in 0..n {
            let col = k * n + k;
            let mut diag = 0.0;
            for w in &self.combine[k] {
                let c = w.weight.powi(2) * w.prob * (1.0 - w.prob);
                let l = w.neighbor;
                cov_a.push((l * n + l, col, c));
                cov_a.push((l * n + k, col, -c));
                cov_a.push((k * n + l, col, -c));
                diag += c;
            }
            cov_a.push((k * n + k, col, diag));
        }

        // Row k of P: cov(ρ_kℓ, ρ_kn) sits at (kN + k, ℓN + n).
        let mut cov_p = Vec::new();
        for k in 0..n {
            let row = k * n + k;
            let mut diag = 0.0;
            for w in &self.regularize[k] {
                let c = w.weight.powi(2) * w.prob * (1.0 - w.prob);
                let l = w.neighbor;
                cov_p.push((row, l * n + l, c));
                cov_p.push((row, l * n + k, -c));
                cov_p.push((row, k * n + l, -c));
                diag += c;
            }
            cov_p.push((row, k * n + k, diag));
        }

        MomentSet {
            mean_m: mean.m_matrix(),
            mean_a: mean.a_matrix(),
            mean_p: mean.p_matrix(),
            cov_m,
            cov_a: SparseMatrix::from_triplets(n2, n2, cov_a),
            cov_p: SparseMatrix::from_triplets(n2, n2, cov_p),
        }
    }
}

/// Result of the stochasticity checks on a [`MomentSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticityReport {
    /// max |column sum − 1| over `Ā`.
    pub mean_a_dev: f64,
    /// max |row sum − 1| over `P̄`.
    pub mean_p_dev: f64,
    /// max |column sum − 1| over `Ā⊗Ā + C_A`.
    pub second_a_dev: f64,
    /// max |row sum − 1| over `P̄⊗P̄ + C_P`.
    pub second_p_dev: f64,
    /// Smallest entry of `Ā⊗Ā + C_A`.
    pub second_a_min: f64,
    /// Smallest entry of `P̄⊗P̄ + C_P`.
    pub second_p_min: f64,
    /// Smallest diagonal entry of `C_M`.
    pub cov_m_min_diag: f64,
    /// Largest off-diagonal magnitude of `C_M`.
    pub cov_m_offdiag: f64,
}

impl StochasticityReport {
    pub fn max_deviation(&self) -> f64 {
        self.mean_a_dev
            .max(self.mean_p_dev)
            .max(self.second_a_dev)
            .max(self.second_p_dev)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
            && self.second_a_min >= -tol
            && self.second_p_min >= -tol
            && self.cov_m_min_diag >= -tol
            && self.cov_m_offdiag <= tol
    }
}

pub fn verify_stochastic_moments(ms: &MomentSet) -> StochasticityReport {
    let max_dev = |sums: &[f64]| sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let a2 = ms.second_moment_a();
    let p2 = ms.second_moment_p();
    let mean_a_cols: Vec<f64> = ms.mean_a.column_iter().map(|c| c.sum()).collect();
    let mean_p_rows: Vec<f64> = ms.mean_p.row_iter().map(|r| r.sum()).collect();
    let mut cov_m_min_diag = 0.0f64;
    let mut cov_m_offdiag = 0.0f64;
    for (r, c, v) in ms.cov_m.iter() {
        if r == c {
            cov_m_min_diag = cov_m_min_diag.min(v);
        } else {
            cov_m_offdiag = cov_m_offdiag.max(v.abs());
        }
    }
    StochasticityReport {
        mean_a_dev: max_dev(&mean_a_cols),
        mean_p_dev: max_dev(&mean_p_rows),
        second_a_dev: max_dev(&a2.col_sums()),
        second_p_dev: max_dev(&p2.row_sums()),
        second_a_min: a2.min_value().min(ms.mean_a.min()),
        second_p_min: p2.min_value().min(ms.mean_p.min()),
        cov_m_min_diag,
        cov_m_offdiag,
    }
}
