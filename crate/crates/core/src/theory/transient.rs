use nalgebra::DVector;

use crate::blockops::weighted_sq_norm;
use crate::error::{Error, Result};
use crate::linalg::{solve, IdentityMinus, DENSE_LIMIT};

use super::mean::MeanArtifacts;
use super::mean_square::MsArtifacts;

fn check_inputs(msa: &MsArtifacts, ma: &MeanArtifacts, sigma: &DVector<f64>, w0_err: &DVector<f64>) -> Result<f64> {
    let nl = msa.nodes() * msa.dim();
    if w0_err.len() != nl || ma.b_bar.nrows() != nl {
        return Err(Error::DimensionMismatch(format!("initial error must have length {nl}")));
    }
    if ma.eta != msa.eta {
        return Err(Error::InvalidModel("mean and mean-square artifacts use different η".into()));
    }
    if msa.size() <= DENSE_LIMIT {
        let rho = msa.rho_f();
        if rho >= 1.0 {
            log::warn!("ρ(F) = {rho:.6} ≥ 1; the variance recursion diverges");
        }
    }
    weighted_sq_norm(w0_err, sigma, msa.dim())
}

/// Weighted variance curve `ζ(i) = E‖w̃(i)‖²_σ` for `i = 0..=horizon`.
///
/// Keeps `v(i) = (Fᵀ)ⁱσ`, the row functional `Γ(i)` (stored as its
/// transpose) and the mean error, one `Fᵀ` product per step:
///
/// `ζ(i+1) = ζ(i) + (g_b + η² r_b)ᵀ v(i) − ‖w̃(0)‖²_{(I − Fᵀ) v(i)}
///           + 2η E w̃(i)ᵀ Kᵀ σ + 2η Γ(i) σ`,
/// `Γᵀ(i+1) = F Γᵀ(i) + (F − I) K E w̃(i)`.
pub fn transient_msd(
    msa: &MsArtifacts,
    ma: &MeanArtifacts,
    sigma: &DVector<f64>,
    w0_err: &DVector<f64>,
    horizon: usize,
) -> Result<Vec<f64>> {
    let zeta0 = check_inputs(msa, ma, sigma, w0_err)?;
    let eta = msa.eta;
    let drive = &msa.g_b + &msa.r_b * (eta * eta);
    let m0 = msa.bvec(&(w0_err * w0_err.transpose()));
    let k_sigma = msa.apply_k_t(sigma);

    let mut zeta = Vec::with_capacity(horizon + 1);
    zeta.push(zeta0);
    let mut v = sigma.clone();
    let mut gamma = DVector::zeros(msa.size());
    let mut mean_err = w0_err.clone();
    let mut current = zeta0;
    for _ in 0..horizon {
        let fv = msa.apply_f_t(&v);
        current += drive.dot(&v) - m0.dot(&(&v - &fv))
            + 2.0 * eta * mean_err.dot(&k_sigma)
            + 2.0 * eta * gamma.dot(sigma);
        zeta.push(current);
        if eta != 0.0 {
            let ke = msa.apply_k(&mean_err);
            gamma = msa.apply_f(&(&gamma + &ke)) - ke;
        }
        v = fv;
        mean_err = ma.step(&mean_err);
    }
    Ok(zeta)
}

/// Same curve by propagating `m(i) = bvec(E[w̃ w̃ᵀ])` directly:
/// `m(i+1) = F m(i) + g_b + η² r_b + 2η K E w̃(i)`, `ζ(i) = m(i)ᵀ σ`.
pub fn moment_propagation_oracle(
    msa: &MsArtifacts,
    ma: &MeanArtifacts,
    sigma: &DVector<f64>,
    w0_err: &DVector<f64>,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_inputs(msa, ma, sigma, w0_err)?;
    let eta = msa.eta;
    let drive = &msa.g_b + &msa.r_b * (eta * eta);
    let mut m = msa.bvec(&(w0_err * w0_err.transpose()));
    let mut mean_err = w0_err.clone();
    let mut zeta = Vec::with_capacity(horizon + 1);
    zeta.push(m.dot(sigma));
    for _ in 0..horizon {
        let mut next = msa.apply_f(&m) + &drive;
        if eta != 0.0 {
            next += msa.apply_k(&mean_err) * (2.0 * eta);
        }
        m = next;
        mean_err = ma.step(&mean_err);
        zeta.push(m.dot(sigma));
    }
    Ok(zeta)
}

/// `ζ* = (g_b + η² r_b)ᵀ x + 2η E w̃(∞)ᵀ Kᵀ x` with `(I − Fᵀ) x = σ`.
pub fn steady_state_msd(msa: &MsArtifacts, ma: &MeanArtifacts, sigma: &DVector<f64>) -> Result<f64> {
    if sigma.len() != msa.size() {
        return Err(Error::DimensionMismatch(format!("weight must have length {}", msa.size())));
    }
    let rho = msa.rho_f();
    if rho >= 1.0 {
        return Err(Error::UnstableMeanSquare(rho));
    }
    let bias = ma.bias()?;
    let ft = msa.f_transpose_operator();
    let x = solve(&IdentityMinus(&ft), sigma)?;
    let eta = msa.eta;
    let mut zeta = msa.g_b.dot(&x) + eta * eta * msa.r_b.dot(&x);
    if eta != 0.0 {
        zeta += 2.0 * eta * bias.dot(&msa.apply_k_t(&x));
    }
    Ok(zeta)
}
