//! Streaming data and the adapt-then-combine multitask diffusion recursion.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::activation::{ActivationDraw, ActivationModel};
use crate::error::{Error, Result};
use crate::network::ClusteredNetwork;
use crate::rng::{stream, StreamKind, StreamRng};

/// Source of per-iteration measurements for every node.
///
/// The adaptation step only needs the innovation `H_kᵀ (d_k − H_k w_k)`, so a
/// data source may use scalar (`H_k = x_kᵀ`) or vector measurements.
pub trait StreamingData: Sync {
    type Frame: Send;

    fn nodes(&self) -> usize;

    fn dim(&self) -> usize;

    /// Stacked optimum `w* = col{w*_1, …, w*_N}`.
    fn optimum(&self) -> &DVector<f64>;

    fn new_frame(&self) -> Self::Frame;

    fn fill_frame<R: Rng + ?Sized>(&self, rng: &mut R, frame: &mut Self::Frame);

    /// Writes `H_kᵀ (d_k − H_k w_k)` into `out`.
    fn innovation(&self, frame: &Self::Frame, k: usize, w_k: &[f64], out: &mut [f64]);
}

/// Linear regression data `d_k(i) = x_kᵀ(i) w*_k + z_k(i)` with Gaussian
/// regressors and noise, independent over nodes and time.
#[derive(Debug, Clone)]
pub struct SignalModel {
    dim: usize,
    covariances: Vec<DMatrix<f64>>,
    factors: Vec<DMatrix<f64>>,
    noise_vars: Vec<f64>,
    noise_std: Vec<f64>,
    optimum: DVector<f64>,
}

/// One iteration of regression data: `x_k` stacked into `regressors` and the
/// scalar responses `d_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFrame {
    pub regressors: Vec<f64>,
    pub responses: Vec<f64>,
}

impl SignalModel {
    /// `cluster_params[q]` is the parameter vector shared by cluster `q`.
    pub fn new(
        net: &ClusteredNetwork,
        covariances: Vec<DMatrix<f64>>,
        noise_vars: Vec<f64>,
        cluster_params: &[DVector<f64>],
    ) -> Result<Self> {
        let (n, l) = (net.nodes(), net.dim());
        if covariances.len() != n || noise_vars.len() != n {
            return Err(Error::InvalidModel(format!("expected {n} covariances and noise variances")));
        }
        if cluster_params.len() != net.cluster_count() {
            return Err(Error::InvalidModel(format!(
                "expected {} cluster parameter vectors",
                net.cluster_count()
            )));
        }
        if let Some(q) = cluster_params.iter().position(|w| w.len() != l) {
            return Err(Error::InvalidModel(format!("parameter vector of cluster {q} must have length {l}")));
        }
        let mut factors = Vec::with_capacity(n);
        for (k, r) in covariances.iter().enumerate() {
            if r.shape() != (l, l) {
                return Err(Error::InvalidModel(format!("covariance of node {k} must be {l}x{l}")));
            }
            if (r - r.transpose()).amax() > 1e-12 * r.amax() {
                return Err(Error::InvalidModel(format!("covariance of node {k} is not symmetric")));
            }
            let chol = r
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidModel(format!("covariance of node {k} is not positive-definite")))?;
            factors.push(chol.l());
        }
        if let Some(k) = noise_vars.iter().position(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidModel(format!("noise variance of node {k} must be non-negative")));
        }
        let mut optimum = DVector::zeros(n * l);
        for k in 0..n {
            optimum
                .rows_mut(k * l, l)
                .copy_from(&cluster_params[net.cluster_of(k)]);
        }
        Ok(Self {
            dim: l,
            noise_std: noise_vars.iter().map(|s| s.sqrt()).collect(),
            covariances,
            factors,
            noise_vars,
            optimum,
        })
    }

    /// `R_{x,k} = σ²_{x,k} I_L`.
    pub fn isotropic(
        net: &ClusteredNetwork,
        regressor_vars: &[f64],
        noise_vars: &[f64],
        cluster_params: &[DVector<f64>],
    ) -> Result<Self> {
        let l = net.dim();
        let covs = regressor_vars
            .iter()
            .map(|&s| DMatrix::from_diagonal_element(l, l, s))
            .collect();
        Self::new(net, covs, noise_vars.to_vec(), cluster_params)
    }

    pub fn covariance(&self, k: usize) -> &DMatrix<f64> {
        &self.covariances[k]
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn noise_var(&self, k: usize) -> f64 {
        self.noise_vars[k]
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    /// Largest eigenvalue of `R_{x,k}` over all nodes.
    pub fn max_regressor_eigenvalue(&self) -> f64 {
        self.covariances
            .iter()
            .map(|r| r.clone().symmetric_eigenvalues().max())
            .fold(0.0, f64::max)
    }

    /// Draws one frame `{x_k(i), d_k(i)}` for all nodes.
    pub fn draw_data<R: Rng + ?Sized>(&self, rng: &mut R) -> RegressionFrame {
        let mut frame = self.new_frame();
        self.fill_frame(rng, &mut frame);
        frame
    }
}

impl StreamingData for SignalModel {
    type Frame = RegressionFrame;

    fn nodes(&self) -> usize {
        self.noise_vars.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    fn new_frame(&self) -> RegressionFrame {
        RegressionFrame {
            regressors: vec![0.0; self.nodes() * self.dim],
            responses: vec![0.0; self.nodes()],
        }
    }

    fn fill_frame<R: Rng + ?Sized>(&self, rng: &mut R, frame: &mut RegressionFrame) {
        let l = self.dim;
        let mut white = vec![0.0; l];
        for k in 0..self.nodes() {
            for z in white.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            let factor = &self.factors[k];
            let x = &mut frame.regressors[k * l..(k + 1) * l];
            for (r, xr) in x.iter_mut().enumerate() {
                *xr = (0..=r).map(|c| factor[(r, c)] * white[c]).sum();
            }
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * self.noise_std[k];
            let w = self.optimum.as_slice();
            frame.responses[k] = dot(x, &w[k * l..(k + 1) * l]) + noise;
        }
    }

    fn innovation(&self, frame: &RegressionFrame, k: usize, w_k: &[f64], out: &mut [f64]) {
        let l = self.dim;
        let x = &frame.regressors[k * l..(k + 1) * l];
        let e = frame.responses[k] - dot(x, w_k);
        for (o, &xv) in out.iter_mut().zip(x) {
            *o = xv * e;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacked estimates `w(i)` and intermediate estimates `ψ(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub w: Vec<f64>,
    pub psi: Vec<f64>,
    pub iteration: usize,
}

impl NetworkState {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        Self::from_estimate(vec![0.0; nodes * dim])
    }

    pub fn from_estimate(w: Vec<f64>) -> Self {
        let psi = w.clone();
        Self { w, psi, iteration: 0 }
    }

    /// `(1/N) ‖w* − w‖²`.
    pub fn network_msd(&self, optimum: &DVector<f64>, nodes: usize) -> f64 {
        sq_dist(&self.w, optimum.as_slice()) / nodes as f64
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One step of the asynchronous multitask ATC recursion driven by `draw`.
///
/// Adaptation:
/// `ψ_k = w_k + μ_k(i) H_kᵀ(d_k − H_k w_k) + η μ_k(i) Σ_ℓ ρ_kℓ(i) (w_ℓ − w_k)`;
/// combination: `w_k = Σ_ℓ a_ℓk(i) ψ_ℓ`.
pub fn atc_step_async<D: StreamingData>(
    state: &mut NetworkState,
    data: &D,
    frame: &D::Frame,
    draw: &ActivationDraw,
    eta: f64,
) -> Result<()> {
    let (n, l) = (data.nodes(), data.dim());
    if state.w.len() != n * l || state.psi.len() != n * l {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, expected {}",
            state.w.len(),
            n * l
        )));
    }
    if draw.nodes() != n || draw.combine.len() != n || draw.regularize.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "activation draw covers {} nodes, expected {n}",
            draw.nodes()
        )));
    }
    let mut innov = vec![0.0; l];
    for k in 0..n {
        let wk = &state.w[k * l..(k + 1) * l];
        let mu = draw.steps[k];
        let psi = &mut state.psi[k * l..(k + 1) * l];
        psi.copy_from_slice(wk);
        if mu == 0.0 {
            continue;
        }
        data.innovation(frame, k, wk, &mut innov);
        for (p, &g) in psi.iter_mut().zip(&innov) {
            *p += mu * g;
        }
        if eta != 0.0 {
            for &(nb, rho) in &draw.regularize[k] {
                if nb == k || rho == 0.0 {
                    continue;
                }
                let c = eta * mu * rho;
                let wl = &state.w[nb * l..(nb + 1) * l];
                for ((p, &a), &b) in psi.iter_mut().zip(wl).zip(wk) {
                    *p += c * (a - b);
                }
            }
        }
    }
    for k in 0..n {
        let out = &mut state.w[k * l..(k + 1) * l];
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(nb, a) in &draw.combine[k] {
            let src = &state.psi[nb * l..(nb + 1) * l];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += a * s;
            }
        }
    }
    state.iteration += 1;
    Ok(())
}

/// Synchronous step with deterministic coefficients given as a draw of means.
pub fn atc_step_sync<D: StreamingData>(
    state: &mut NetworkState,
    data: &D,
    frame: &D::Frame,
    means: &ActivationDraw,
    eta: f64,
) -> Result<()> {
    atc_step_async(state, data, frame, means, eta)
}

/// A single simulated trajectory with its own random streams.
pub struct Simulation<'a, D: StreamingData, A: ActivationModel> {
    data: &'a D,
    model: &'a A,
    eta: f64,
    state: NetworkState,
    frame: D::Frame,
    draw: ActivationDraw,
    data_rng: StreamRng,
    activation_rng: StreamRng,
}

impl<'a, D: StreamingData, A: ActivationModel> Simulation<'a, D, A> {
    pub fn new(data: &'a D, model: &'a A, eta: f64, initial: NetworkState, seed: u64, run: u64) -> Result<Self> {
        if model.nodes() != data.nodes() {
            return Err(Error::DimensionMismatch(format!(
                "activation model has {} nodes, data model {}",
                model.nodes(),
                data.nodes()
            )));
        }
        if initial.w.len() != data.nodes() * data.dim() {
            return Err(Error::DimensionMismatch("initial estimate has the wrong length".into()));
        }
        Ok(Self {
            data,
            model,
            eta,
            state: initial,
            frame: data.new_frame(),
            draw: model.mean_draw(),
            data_rng: stream(seed, run, StreamKind::Data),
            activation_rng: stream(seed, run, StreamKind::Activation),
        })
    }

    pub fn step(&mut self) -> Result<()> {
        self.data.fill_frame(&mut self.data_rng, &mut self.frame);
        self.model.sample_into(&mut self.activation_rng, &mut self.draw);
        atc_step_async(&mut self.state, self.data, &self.frame, &self.draw, self.eta)
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// Current error `w̃(i) = w* − w(i)`.
    pub fn error(&self) -> DVector<f64> {
        self.data.optimum() - DVector::from_column_slice(&self.state.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub eta: f64,
    /// Initial estimate `w(0)`; zero when absent.
    pub initial: Option<DVector<f64>>,
}

/// Ensemble-averaged learning curves.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    /// Network MSD for iterations `0..=horizon`.
    pub network: Vec<f64>,
    /// Per-cluster MSD, indexed `[cluster][iteration]`.
    pub clusters: Vec<Vec<f64>>,
    /// `w(horizon)` averaged over runs.
    pub final_estimate: DVector<f64>,
    pub runs: usize,
    pub seed: u64,
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl MsdCurve {
    pub fn network_db(&self) -> Vec<f64> {
        self.network.iter().map(|&x| to_db(x)).collect()
    }

    pub fn cluster_db(&self, q: usize) -> Vec<f64> {
        self.clusters[q].iter().map(|&x| to_db(x)).collect()
    }

    /// Mean of the network MSD over the last `window` iterations.
    pub fn steady_state(&self, window: usize) -> f64 {
        tail_mean(&self.network, window)
    }

    pub fn cluster_steady_state(&self, q: usize, window: usize) -> f64 {
        tail_mean(&self.clusters[q], window)
    }
}

pub fn tail_mean(values: &[f64], window: usize) -> f64 {
    let w = window.clamp(1, values.len());
    values[values.len() - w..].iter().sum::<f64>() / w as f64
}

struct RunTrace {
    network: Vec<f64>,
    clusters: Vec<Vec<f64>>,
    last: Vec<f64>,
}

fn record(trace: &mut RunTrace, net: &ClusteredNetwork, w: &[f64], optimum: &[f64], l: usize) {
    let n = net.nodes();
    let mut per_node = vec![0.0; n];
    for k in 0..n {
        per_node[k] = sq_dist(&w[k * l..(k + 1) * l], &optimum[k * l..(k + 1) * l]);
    }
    trace.network.push(per_node.iter().sum::<f64>() / n as f64);
    for (q, members) in net.clusters().iter().enumerate() {
        let s: f64 = members.iter().map(|&k| per_node[k]).sum();
        trace.clusters[q].push(s / members.len() as f64);
    }
}

/// Runs `cfg.runs` independent trajectories in parallel and averages their
/// squared deviations. The result depends only on `(cfg, inputs)`, not on
/// the number of worker threads.
pub fn run_monte_carlo<D: StreamingData, A: ActivationModel>(
    net: &ClusteredNetwork,
    data: &D,
    model: &A,
    cfg: &MonteCarloConfig,
) -> Result<MsdCurve> {
    if cfg.runs == 0 {
        return Err(Error::InvalidRun("at least one run is required".into()));
    }
    let (n, l) = (data.nodes(), data.dim());
    if net.nodes() != n || net.dim() != l {
        return Err(Error::DimensionMismatch("network and data model disagree on N or L".into()));
    }
    let initial = match &cfg.initial {
        Some(w0) if w0.len() != n * l => {
            return Err(Error::DimensionMismatch("initial estimate has the wrong length".into()))
        }
        Some(w0) => w0.as_slice().to_vec(),
        None => vec![0.0; n * l],
    };
    let optimum = data.optimum().as_slice();
    let traces: Vec<RunTrace> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|run| -> Result<RunTrace> {
            let mut sim = Simulation::new(
                data,
                model,
                cfg.eta,
                NetworkState::from_estimate(initial.clone()),
                cfg.seed,
                run,
            )?;
            let mut trace = RunTrace {
                network: Vec::with_capacity(cfg.horizon + 1),
                clusters: vec![Vec::with_capacity(cfg.horizon + 1); net.cluster_count()],
                last: Vec::new(),
            };
            record(&mut trace, net, &sim.state().w, optimum, l);
            for _ in 0..cfg.horizon {
                sim.step()?;
                record(&mut trace, net, &sim.state().w, optimum, l);
            }
            trace.last = sim.state().w.clone();
            Ok(trace)
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / cfg.runs as f64;
    let mut network = vec![0.0; cfg.horizon + 1];
    let mut clusters = vec![vec![0.0; cfg.horizon + 1]; net.cluster_count()];
    let mut final_estimate = DVector::zeros(n * l);
    for t in &traces {
        for (acc, v) in network.iter_mut().zip(&t.network) {
            *acc += v;
        }
        for (accs, vs) in clusters.iter_mut().zip(&t.clusters) {
            for (acc, v) in accs.iter_mut().zip(vs) {
                *acc += v;
            }
        }
        for (acc, v) in final_estimate.iter_mut().zip(&t.last) {
            *acc += v;
        }
    }
    network.iter_mut().for_each(|v| *v *= scale);
    clusters.iter_mut().flatten().for_each(|v| *v *= scale);
    final_estimate *= scale;
    Ok(MsdCurve {
        network,
        clusters,
        final_estimate,
        runs: cfg.runs,
        seed: cfg.seed,
    })
}
