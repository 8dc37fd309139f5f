use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::activation::MomentSet;
use crate::blockops::{bvec, unbvec};
use crate::engine::{SignalModel, StreamingData};
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, LinearOperator};
use crate::sparse::SparseMatrix;

use super::mean::{block_diagonal, check_dims, lift};

/// Largest `N·L` accepted by [`ms_artifacts`].
pub const DEFAULT_GUARD: usize = 512;

/// Second-order moment objects of the error recursion.
///
/// `A_I`, `M_I`, `P_I`, `Q_I` are stored through their `N² × N²` factors; the
/// `⊗ I_{L²}` part is applied implicitly. `F` and `K` are exposed as
/// matrix-free operators on block-vectorized `(NL)²` vectors:
///
/// * `F bvec(X) = A_Iᵀ bvec(X − Y X − X Yᵀ)` with `Y = M̄(R̄_x + η Q̄)`
/// * `K e = A_Iᵀ [bvec(v₁ eᵀ) − M_I (bvec(v₂ (R̄_x e)ᵀ) + η Q_I bvec(w* eᵀ))]`
///   with `v₁ = M̄ Q̄ w*` and `v₂ = Q̄ w*`.
#[derive(Debug, Clone)]
pub struct MsArtifacts {
    nodes: usize,
    dim: usize,
    pub eta: f64,
    pub a_i: SparseMatrix,
    pub m_i: SparseMatrix,
    pub p_i: SparseMatrix,
    pub q_i: SparseMatrix,
    pub drift: DMatrix<f64>,
    pub r_x: DMatrix<f64>,
    /// `S = diag{σ²_{z,k} R_{x,k}}`.
    pub s: DMatrix<f64>,
    pub w_star: DVector<f64>,
    pub g_b: DVector<f64>,
    pub r_b: DVector<f64>,
    v1: DVector<f64>,
    v2: DVector<f64>,
    rho_f: OnceLock<f64>,
}

pub fn ms_artifacts(ms: &MomentSet, model: &SignalModel, eta: f64) -> Result<MsArtifacts> {
    ms_artifacts_with_guard(ms, model, eta, DEFAULT_GUARD)
}

pub fn ms_artifacts_with_guard(ms: &MomentSet, model: &SignalModel, eta: f64, guard: usize) -> Result<MsArtifacts> {
    let (n, l) = check_dims(ms, model)?;
    let nl = n * l;
    if nl > guard {
        return Err(Error::ProblemTooLarge { nl, guard });
    }
    let m_bar = lift(&ms.mean_m, l);
    let q_bar = DMatrix::identity(nl, nl) - lift(&ms.mean_p, l);
    let r_x = block_diagonal(model.covariances());
    let drift = &m_bar * (&r_x + &q_bar * eta);
    let noise_blocks: Vec<DMatrix<f64>> = (0..n)
        .map(|k| model.covariance(k) * model.noise_var(k))
        .collect();
    let s = block_diagonal(&noise_blocks);
    let w_star = model.optimum().clone();
    let v2 = &q_bar * &w_star;
    let v1 = &m_bar * &v2;
    let mut out = MsArtifacts {
        nodes: n,
        dim: l,
        eta,
        a_i: ms.second_moment_a(),
        m_i: ms.second_moment_m(),
        p_i: ms.second_moment_p(),
        q_i: ms.second_moment_q(),
        drift,
        r_x,
        s,
        w_star,
        g_b: DVector::zeros(0),
        r_b: DVector::zeros(0),
        v1,
        v2,
        rho_f: OnceLock::new(),
    };
    let sb = out.bvec(&out.s);
    out.g_b = out.apply_a_t(&out.apply_m(&sb));
    let ww = out.bvec(&(&out.w_star * out.w_star.transpose()));
    out.r_b = out.apply_a_t(&out.apply_m(&out.apply_q(&ww)));
    Ok(out)
}

impl MsArtifacts {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(NL)²`.
    pub fn size(&self) -> usize {
        let nl = self.nodes * self.dim;
        nl * nl
    }

    pub fn bvec(&self, m: &DMatrix<f64>) -> DVector<f64> {
        bvec(m, self.dim, self.dim)
    }

    pub fn unbvec(&self, v: &[f64]) -> DMatrix<f64> {
        unbvec(v, self.nodes, self.nodes, self.dim, self.dim)
    }

    fn blocks(&self, s: &SparseMatrix, x: &DVector<f64>, transposed: bool) -> DVector<f64> {
        let b = self.dim * self.dim;
        let mut y = DVector::zeros(self.size());
        if transposed {
            s.apply_blocks_transposed(x.as_slice(), b, y.as_mut_slice());
        } else {
            s.apply_blocks(x.as_slice(), b, y.as_mut_slice());
        }
        y
    }

    pub fn apply_a(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.a_i, x, false)
    }

    pub fn apply_a_t(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.a_i, x, true)
    }

    pub fn apply_m(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.m_i, x, false)
    }

    pub fn apply_m_t(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.m_i, x, true)
    }

    pub fn apply_q(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.q_i, x, false)
    }

    pub fn apply_q_t(&self, x: &DVector<f64>) -> DVector<f64> {
        self.blocks(&self.q_i, x, true)
    }

    /// `F x`.
    pub fn apply_f(&self, x: &DVector<f64>) -> DVector<f64> {
        let xm = self.unbvec(x.as_slice());
        let z = &xm - &self.drift * &xm - &xm * self.drift.transpose();
        self.apply_a_t(&self.bvec(&z))
    }

    /// `Fᵀ σ`.
    pub fn apply_f_t(&self, sigma: &DVector<f64>) -> DVector<f64> {
        let u = self.unbvec(self.apply_a(sigma).as_slice());
        let z = &u - self.drift.transpose() * &u - &u * &self.drift;
        self.bvec(&z)
    }

    /// `K e` for an `NL` vector `e`.
    pub fn apply_k(&self, e: &DVector<f64>) -> DVector<f64> {
        let t1 = self.bvec(&(&self.v1 * e.transpose()));
        let t2 = self.bvec(&(&self.v2 * (&self.r_x * e).transpose()));
        let t3 = self.bvec(&(&self.w_star * e.transpose()));
        let inner = t2 + self.apply_q(&t3) * self.eta;
        self.apply_a_t(&(t1 - self.apply_m(&inner)))
    }

    /// `Kᵀ σ`, an `NL` vector.
    pub fn apply_k_t(&self, sigma: &DVector<f64>) -> DVector<f64> {
        let u = self.apply_a(sigma);
        let mu = self.apply_m_t(&u);
        let qu = self.apply_q_t(&mu);
        let s1 = self.unbvec(u.as_slice());
        let s2 = self.unbvec(mu.as_slice());
        let s3 = self.unbvec(qu.as_slice());
        s1.transpose() * &self.v1
            - self.r_x.transpose() * (s2.transpose() * &self.v2)
            - s3.transpose() * &self.w_star * self.eta
    }

    pub fn f_operator(&self) -> FOperator<'_> {
        FOperator(self)
    }

    pub fn f_transpose_operator(&self) -> FTransposeOperator<'_> {
        FTransposeOperator(self)
    }

    pub fn f_dense(&self) -> DMatrix<f64> {
        self.f_operator().to_dense()
    }

    pub fn k_dense(&self) -> DMatrix<f64> {
        let nl = self.nodes * self.dim;
        let mut k = DMatrix::zeros(self.size(), nl);
        for j in 0..nl {
            let mut e = DVector::zeros(nl);
            e[j] = 1.0;
            k.column_mut(j).copy_from(&self.apply_k(&e));
        }
        k
    }

    /// `ρ(F)`; dense spectrum for small problems, power iteration otherwise.
    /// Computed once.
    pub fn rho_f(&self) -> f64 {
        *self.rho_f.get_or_init(|| spectral_radius(&self.f_operator()))
    }
}

pub struct FOperator<'a>(&'a MsArtifacts);

impl LinearOperator for FOperator<'_> {
    fn dim(&self) -> usize {
        self.0.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(self.0.apply_f(&DVector::from_column_slice(x)).as_slice());
    }
}

pub struct FTransposeOperator<'a>(&'a MsArtifacts);

impl LinearOperator for FTransposeOperator<'_> {
    fn dim(&self) -> usize {
        self.0.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(self.0.apply_f_t(&DVector::from_column_slice(x)).as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{ActivationModel, BernoulliParams};
    use crate::network::ClusteredNetwork;

    fn setup(eta: f64) -> MsArtifacts {
        let net = ClusteredNetwork::new(3, 2, &[(0, 1), (1, 2)], &[vec![0, 1], vec![2]]).unwrap();
        let model = SignalModel::isotropic(
            &net,
            &[1.0, 0.8, 1.2],
            &[0.01, 0.02, 0.015],
            &[DVector::from_column_slice(&[0.5, -0.2]), DVector::from_column_slice(&[0.3, 0.1])],
        )
        .unwrap();
        let params = BernoulliParams::uniform(&net, 0.05, 0.6, 0.7, 0.8).unwrap();
        ms_artifacts(&params.moments(), &model, eta).unwrap()
    }

    #[test]
    fn transpose_operators_are_adjoint() {
        let msa = setup(0.7);
        let x = DVector::from_fn(msa.size(), |i, _| ((i * 37) % 11) as f64 - 5.0);
        let s = DVector::from_fn(msa.size(), |i, _| ((i * 13) % 7) as f64 * 0.3 - 1.0);
        let lhs = msa.apply_f(&x).dot(&s);
        let rhs = x.dot(&msa.apply_f_t(&s));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));

        let e = DVector::from_fn(6, |i, _| i as f64 * 0.25 - 0.6);
        let lhs = msa.apply_k(&e).dot(&s);
        let rhs = e.dot(&msa.apply_k_t(&s));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn self_regularization_gives_zero_r_b() {
        let net = ClusteredNetwork::new(2, 1, &[(0, 1)], &[vec![0, 1]]).unwrap();
        let model = SignalModel::isotropic(&net, &[1.0, 1.0], &[0.01, 0.01], &[DVector::from_element(1, 1.0)]).unwrap();
        let params = BernoulliParams::uniform(&net, 0.05, 0.5, 0.5, 0.5).unwrap();
        let msa = ms_artifacts(&params.moments(), &model, 1.0).unwrap();
        assert_eq!(msa.q_i.to_dense().amax(), 0.0);
        assert_eq!(msa.r_b.amax(), 0.0);
    }

    #[test]
    fn guard_rejects_large_problems() {
        let net = ClusteredNetwork::new(2, 3, &[(0, 1)], &[vec![0, 1]]).unwrap();
        let model = SignalModel::isotropic(&net, &[1.0, 1.0], &[0.01, 0.01], &[DVector::zeros(3)]).unwrap();
        let params = BernoulliParams::uniform(&net, 0.05, 0.5, 0.5, 0.5).unwrap();
        assert!(matches!(
            ms_artifacts_with_guard(&params.moments(), &model, 1.0, 4),
            Err(Error::ProblemTooLarge { nl: 6, guard: 4 })
        ));
    }
}
