//! Cooperative spectrum sensing: each secondary user is a cluster of
//! antennas that estimate the basis weights of every primary user's power
//! spectrum from path-loss-scaled measurements.

use mtdiff_core::{BernoulliParams, ClusteredNetwork, StreamingData};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::{check_len, check_positive, check_prob, index, ConfigError, RawSpectrum, ValidationError};

#[derive(Debug, Error)]
pub enum SpectrumError {
    /// A primary transmitter sits on a receiver, so the path loss is infinite.
    #[error("DegenerateGeometry: primary user {primary} coincides with secondary user {user}")]
    DegenerateGeometry { primary: usize, user: usize },
    #[error(transparent)]
    Core(#[from] mtdiff_core::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScenario {
    pub primary_positions: Vec<[f64; 2]>,
    pub secondary_positions: Vec<[f64; 2]>,
    /// Neighboring secondary users, 0-based.
    pub user_edges: Vec<(usize, usize)>,
    /// Antennas per secondary user `N_R`.
    pub antennas: usize,
    /// Basis functions per primary user `N_B`.
    pub basis: usize,
    /// Frequency samples `N_F`.
    pub frequencies: usize,
    /// Basis width `σ²_m`.
    pub basis_var: f64,
    /// One weight vector of length `N_B` per primary user.
    pub alpha: Vec<DVector<f64>>,
    /// Path-loss detection threshold `p₀`.
    pub threshold: f64,
    /// Standard deviation of the path-loss fluctuation relative to its mean.
    pub pathloss_rel_std: f64,
    pub noise_std: f64,
    /// Inter-user link success probability is `exp(−decay · distance)`.
    pub link_decay: f64,
    pub step: f64,
    pub step_prob: f64,
    pub link_prob: f64,
    /// Secondary users whose reconstructed spectrum is reported, 0-based.
    pub psd_users: Vec<usize>,
}

impl RawSpectrum {
    pub(crate) fn validate(self) -> Result<SpectrumScenario, ConfigError> {
        let n_p = self.primary_positions.len();
        let n_s = self.secondary_positions.len();
        check_positive("spectrum.primary_positions", n_p as f64)?;
        check_positive("spectrum.secondary_positions", n_s as f64)?;
        check_positive("spectrum.antennas", self.antennas as f64)?;
        check_positive("spectrum.basis", self.basis as f64)?;
        check_positive("spectrum.frequencies", self.frequencies as f64)?;
        check_positive("spectrum.basis_var", self.basis_var)?;
        check_positive("spectrum.step", self.step)?;
        check_prob("spectrum.step_prob", self.step_prob)?;
        check_prob("spectrum.link_prob", self.link_prob)?;
        for (field, v) in [
            ("spectrum.threshold", self.threshold),
            ("spectrum.pathloss_rel_std", self.pathloss_rel_std),
            ("spectrum.noise_std", self.noise_std),
            ("spectrum.link_decay", self.link_decay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ValidationError::NonPositive { field: field.into(), value: v }.into());
            }
        }
        for p in self.primary_positions.iter().chain(&self.secondary_positions) {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(ValidationError::Infeasible("positions must be finite".into()).into());
            }
        }
        check_len("spectrum.alpha", n_p, self.alpha.len())?;
        let mut alpha = Vec::with_capacity(n_p);
        for (q, a) in self.alpha.into_iter().enumerate() {
            check_len(&format!("spectrum.alpha[{}]", q + 1), self.basis, a.len())?;
            alpha.push(DVector::from_vec(a));
        }
        let mut user_edges = Vec::with_capacity(self.user_edges.len());
        for [a, b] in self.user_edges {
            let (i, j) = (index("spectrum.user_edges", a, n_s)?, index("spectrum.user_edges", b, n_s)?);
            if i == j {
                return Err(ValidationError::SelfLoop(a).into());
            }
            user_edges.push((i, j));
        }
        let psd_users = self
            .psd_users
            .iter()
            .map(|&u| index("spectrum.psd_users", u, n_s))
            .collect::<Result<_, _>>()?;
        Ok(SpectrumScenario {
            primary_positions: self.primary_positions,
            secondary_positions: self.secondary_positions,
            user_edges,
            antennas: self.antennas,
            basis: self.basis,
            frequencies: self.frequencies,
            basis_var: self.basis_var,
            alpha,
            threshold: self.threshold,
            pathloss_rel_std: self.pathloss_rel_std,
            noise_std: self.noise_std,
            link_decay: self.link_decay,
            step: self.step,
            step_prob: self.step_prob,
            link_prob: self.link_prob,
            psd_users,
        })
    }
}

impl SpectrumScenario {
    pub fn primaries(&self) -> usize {
        self.primary_positions.len()
    }

    pub fn users(&self) -> usize {
        self.secondary_positions.len()
    }

    pub fn user_distance(&self, a: usize, b: usize) -> f64 {
        distance(self.secondary_positions[a], self.secondary_positions[b])
    }

    /// `α* = col{α*_1, …, α*_{N_P}}`.
    pub fn stacked_alpha(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.basis * self.primaries());
        for (q, a) in self.alpha.iter().enumerate() {
            out.rows_mut(q * self.basis, self.basis).copy_from(a);
        }
        out
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Evenly spaced points on the normalized axis `[0, 1]`.
pub fn unit_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..count).map(|j| j as f64 / (count - 1) as f64).collect(),
    }
}

/// `Φ[j, m] = exp(−(f_j − f_m)² / (2σ²_m))` on the sample and center grids.
pub fn basis_matrix(basis: usize, frequencies: usize, basis_var: f64) -> DMatrix<f64> {
    let centers = unit_grid(basis);
    let samples = unit_grid(frequencies);
    DMatrix::from_fn(frequencies, basis, |j, m| {
        let d = samples[j] - centers[m];
        (-d * d / (2.0 * basis_var)).exp()
    })
}

/// Vector-measurement data source: node `(k, ℓ)` observes
/// `r = Σ_q p_q(i) Φ α*_q + z` and regresses on `p̂_q(i) Φ`, where `p̂_q` is
/// the mean path loss when the fluctuating one exceeds the threshold and zero
/// otherwise.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    antennas: usize,
    primaries: usize,
    basis: usize,
    phi: DMatrix<f64>,
    /// `Φ α*_q` per primary user.
    phi_alpha: Vec<DVector<f64>>,
    /// `p̄_{q,k}`, indexed `[user][primary]`.
    mean_pathloss: Vec<Vec<f64>>,
    threshold: f64,
    rel_std: f64,
    noise_std: f64,
    optimum: DVector<f64>,
    nodes: usize,
}

/// Per-iteration path-loss estimates `p̂` (`N × N_P`) and measurements
/// (`N × N_F`), row-major by node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    pub estimated: Vec<f64>,
    pub measurements: Vec<f64>,
}

impl SpectrumModel {
    pub fn basis_matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn mean_pathloss(&self, user: usize, primary: usize) -> f64 {
        self.mean_pathloss[user][primary]
    }

    pub fn user_of(&self, node: usize) -> usize {
        node / self.antennas
    }

    /// Aggregated spectrum `Σ_q Φ α_q` on the sample grid.
    pub fn reconstruct_psd(&self, alpha: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.phi.nrows());
        for q in 0..self.primaries {
            out += &self.phi * DVector::from_column_slice(&alpha[q * self.basis..(q + 1) * self.basis]);
        }
        out
    }

    /// Estimate of one secondary user, averaged over its antennas.
    pub fn user_estimate(&self, w: &DVector<f64>, user: usize) -> DVector<f64> {
        let l = self.dim();
        let mut out = DVector::zeros(l);
        for a in 0..self.antennas {
            out += w.rows((user * self.antennas + a) * l, l);
        }
        out / self.antennas as f64
    }
}

impl StreamingData for SpectrumModel {
    type Frame = SpectrumFrame;

    fn nodes(&self) -> usize {
        self.nodes
    }

    fn dim(&self) -> usize {
        self.basis * self.primaries
    }

    fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    fn new_frame(&self) -> SpectrumFrame {
        SpectrumFrame {
            estimated: vec![0.0; self.nodes * self.primaries],
            measurements: vec![0.0; self.nodes * self.phi.nrows()],
        }
    }

    fn fill_frame<R: Rng + ?Sized>(&self, rng: &mut R, frame: &mut SpectrumFrame) {
        let nf = self.phi.nrows();
        for k in 0..self.nodes {
            let means = &self.mean_pathloss[self.user_of(k)];
            let r = &mut frame.measurements[k * nf..(k + 1) * nf];
            r.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..self.primaries {
                let n: f64 = rng.sample(StandardNormal);
                let p = means[q] * (1.0 + self.rel_std * n);
                frame.estimated[k * self.primaries + q] = if p > self.threshold { means[q] } else { 0.0 };
                for (v, &s) in r.iter_mut().zip(self.phi_alpha[q].iter()) {
                    *v += p * s;
                }
            }
            for v in r.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *v += self.noise_std * n;
            }
        }
    }

    fn innovation(&self, frame: &SpectrumFrame, k: usize, w_k: &[f64], out: &mut [f64]) {
        let (nf, nb) = (self.phi.nrows(), self.basis);
        let p_hat = &frame.estimated[k * self.primaries..(k + 1) * self.primaries];
        let mut e = frame.measurements[k * nf..(k + 1) * nf].to_vec();
        let phi = self.phi.as_slice();
        for (q, &p) in p_hat.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for m in 0..nb {
                let c = p * w_k[q * nb + m];
                if c != 0.0 {
                    for (v, &f) in e.iter_mut().zip(&phi[m * nf..(m + 1) * nf]) {
                        *v -= c * f;
                    }
                }
            }
        }
        for (q, &p) in p_hat.iter().enumerate() {
            for m in 0..nb {
                out[q * nb + m] = if p == 0.0 {
                    0.0
                } else {
                    p * phi[m * nf..(m + 1) * nf].iter().zip(&e).map(|(f, v)| f * v).sum::<f64>()
                };
            }
        }
    }
}

/// Builds the antenna-level network, the data source and the Bernoulli
/// activation model. Antenna `a` of user `u` is node `u·N_R + a`; every user
/// is a fully connected cluster and neighboring users are linked antenna to
/// antenna.
pub fn build_spectrum_model(
    s: &SpectrumScenario,
) -> Result<(ClusteredNetwork, SpectrumModel, BernoulliParams), SpectrumError> {
    let (n_s, n_r, n_p) = (s.users(), s.antennas, s.primaries());
    let mut mean_pathloss = vec![vec![0.0; n_p]; n_s];
    for (u, &rx) in s.secondary_positions.iter().enumerate() {
        for (q, &tx) in s.primary_positions.iter().enumerate() {
            let d = distance(rx, tx);
            if d == 0.0 {
                return Err(SpectrumError::DegenerateGeometry { primary: q + 1, user: u + 1 });
            }
            mean_pathloss[u][q] = 1.0 / (d * d);
        }
    }
    let n = n_s * n_r;
    let mut edges = Vec::new();
    for u in 0..n_s {
        for a in 0..n_r {
            for b in a + 1..n_r {
                edges.push((u * n_r + a, u * n_r + b));
            }
        }
    }
    for &(u, v) in &s.user_edges {
        for a in 0..n_r {
            for b in 0..n_r {
                edges.push((u * n_r + a, v * n_r + b));
            }
        }
    }
    let clusters: Vec<Vec<usize>> = (0..n_s).map(|u| (u * n_r..(u + 1) * n_r).collect()).collect();
    let dim = s.basis * n_p;
    let net = ClusteredNetwork::new(n, dim, &edges, &clusters)?;
    let params = BernoulliParams::uniform_rules(
        &net,
        vec![s.step; n],
        vec![s.step_prob; n],
        |_, _| s.link_prob,
        |k, l| (-s.link_decay * s.user_distance(k / n_r, l / n_r)).exp(),
    )?;

    let phi = basis_matrix(s.basis, s.frequencies, s.basis_var);
    let phi_alpha = s.alpha.iter().map(|a| &phi * a).collect();
    let stacked = s.stacked_alpha();
    let mut optimum = DVector::zeros(n * dim);
    for k in 0..n {
        optimum.rows_mut(k * dim, dim).copy_from(&stacked);
    }
    let model = SpectrumModel {
        antennas: n_r,
        primaries: n_p,
        basis: s.basis,
        phi,
        phi_alpha,
        mean_pathloss,
        threshold: s.threshold,
        rel_std: s.pathloss_rel_std,
        noise_std: s.noise_std,
        optimum,
        nodes: n,
    };
    Ok((net, model, params))
}

/// Support and amplitude recovery of an estimate against the true weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportRecovery {
    /// `max |α̂_j − α*_j| / |α*_j|` over the true support.
    pub max_rel_error: f64,
    /// Entries above half the smallest nonzero true weight are exactly the
    /// true support.
    pub support_matches: bool,
}

impl SupportRecovery {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.support_matches && self.max_rel_error < rel_tol
    }
}

pub fn support_recovery(truth: &DVector<f64>, estimate: &DVector<f64>) -> SupportRecovery {
    let smallest = truth.iter().filter(|v| **v != 0.0).map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let level = 0.5 * smallest;
    let mut max_rel_error: f64 = 0.0;
    let mut support_matches = true;
    for (&t, &e) in truth.iter().zip(estimate.iter()) {
        if t != 0.0 {
            max_rel_error = max_rel_error.max((e - t).abs() / t.abs());
        }
        if (t != 0.0) != (e.abs() > level) {
            support_matches = false;
        }
    }
    SupportRecovery { max_rel_error, support_matches }
}
