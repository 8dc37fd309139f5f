use nalgebra::{DMatrix, DVector};

use crate::activation::MomentSet;
use crate::engine::SignalModel;
use crate::error::{Error, Result};
use crate::linalg::{solve_dense, spectral_radius};

/// `m ⊗ I_L`.
pub fn lift(m: &DMatrix<f64>, l: usize) -> DMatrix<f64> {
    m.kronecker(&DMatrix::<f64>::identity(l, l))
}

/// `diag{B_1, …, B_N}`.
pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let l = blocks.first().map_or(0, |b| b.nrows());
    let n = blocks.len();
    let mut out = DMatrix::zeros(n * l, n * l);
    for (k, b) in blocks.iter().enumerate() {
        out.view_mut((k * l, k * l), (l, l)).copy_from(b);
    }
    out
}

/// Mean-error recursion `E w̃(i+1) = B̄ E w̃(i) + η r`.
#[derive(Debug, Clone)]
pub struct MeanArtifacts {
    pub eta: f64,
    pub b_bar: DMatrix<f64>,
    pub r: DVector<f64>,
    /// `Q̄ = I − P̄ ⊗ I_L`.
    pub q_bar: DMatrix<f64>,
    /// `M̄ (R̄_x + η Q̄)` with block-lifted `M̄`.
    pub drift: DMatrix<f64>,
    pub rho: f64,
    /// Asymptotic mean error `η (I − B̄)⁻¹ r`; absent when `ρ(B̄) ≥ 1`.
    pub bias: Option<DVector<f64>>,
}

impl MeanArtifacts {
    pub fn bias(&self) -> Result<&DVector<f64>> {
        self.bias.as_ref().ok_or(Error::UnstableMean(self.rho))
    }

    /// `E w̃(i+1)` from `E w̃(i)`.
    pub fn step(&self, mean_err: &DVector<f64>) -> DVector<f64> {
        &self.b_bar * mean_err + &self.r * self.eta
    }
}

pub(crate) fn check_dims(ms: &MomentSet, model: &SignalModel) -> Result<(usize, usize)> {
    use crate::engine::StreamingData;
    let (n, l) = (model.nodes(), model.dim());
    if ms.nodes() != n {
        return Err(Error::DimensionMismatch(format!(
            "moment set covers {} nodes, signal model {n}",
            ms.nodes()
        )));
    }
    Ok((n, l))
}

pub fn mean_artifacts(ms: &MomentSet, model: &SignalModel, eta: f64) -> Result<MeanArtifacts> {
    use crate::engine::StreamingData;
    let (n, l) = check_dims(ms, model)?;
    let nl = n * l;
    let a = lift(&ms.mean_a, l);
    let m = lift(&ms.mean_m, l);
    let q_bar = DMatrix::identity(nl, nl) - lift(&ms.mean_p, l);
    let r_x = block_diagonal(model.covariances());
    let drift = &m * (&r_x + &q_bar * eta);
    let b_bar = a.transpose() * (DMatrix::identity(nl, nl) - &drift);
    let r = a.transpose() * &m * &q_bar * model.optimum();
    let rho = spectral_radius(&b_bar);
    let bias = if rho < 1.0 {
        if eta == 0.0 {
            Some(DVector::zeros(nl))
        } else {
            Some(solve_dense(&(DMatrix::identity(nl, nl) - &b_bar), &(&r * eta))?)
        }
    } else {
        None
    };
    Ok(MeanArtifacts {
        eta,
        b_bar,
        r,
        q_bar,
        drift,
        rho,
        bias,
    })
}
