//! Executes a scenario: Monte-Carlo learning curves, theoretical curves and
//! stability diagnostics for every requested case.

use log::{info, warn};
use mtdiff_core::activation::{ActivationModel, FixedActivation};
use mtdiff_core::theory::{
    mean_artifacts, mean_stability, ms_artifacts, ms_stability, network_weight, steady_state_msd, transient_msd,
    DEFAULT_GUARD,
};
use mtdiff_core::{run_monte_carlo, BernoulliParams, ClusteredNetwork, MonteCarloConfig, MsdCurve, SignalModel, StreamingData};
use nalgebra::DVector;
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig, Scenario, ScenarioConfig, Weighting};
use crate::spectrum::{build_spectrum_model, unit_grid, SpectrumError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown preset `{0}` (available: {1})")]
    UnknownPreset(String, String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Core(#[from] mtdiff_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// 1 for input errors, 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_)
            | ScenarioError::UnknownPreset(..)
            | ScenarioError::Spectrum(SpectrumError::DegenerateGeometry { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Async,
    /// Deterministic coefficients equal to the asynchronous means.
    Sync,
}

/// Spectral radii and sufficient step-size bounds; `NaN` when not computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySummary {
    pub rho_b: f64,
    pub rho_f: f64,
    pub bound_mean: f64,
    pub bound_ms: f64,
}

impl Default for StabilitySummary {
    fn default() -> Self {
        Self {
            rho_b: f64::NAN,
            rho_f: f64::NAN,
            bound_mean: f64::NAN,
            bound_ms: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub label: String,
    pub eta: f64,
    pub activation: Activation,
    pub simulated: Option<MsdCurve>,
    /// Theoretical network MSD for iterations `0..=horizon`.
    pub theory: Option<Vec<f64>>,
    /// Theoretical steady-state network MSD.
    pub steady_state: Option<f64>,
    pub stability: StabilitySummary,
    /// Asymptotic mean error `E w̃(∞)`.
    pub bias: Option<DVector<f64>>,
    /// Reconstructed spectrum per reported secondary user (0-based).
    pub psd: Vec<(usize, DVector<f64>)>,
}

impl CaseResult {
    fn new(eta: f64, activation: Activation) -> Self {
        let kind = match activation {
            Activation::Async => "async",
            Activation::Sync => "sync",
        };
        Self {
            label: format!("{kind}-eta{eta}"),
            eta,
            activation,
            simulated: None,
            theory: None,
            steady_state: None,
            stability: StabilitySummary::default(),
            bias: None,
            psd: Vec::new(),
        }
    }

    /// Simulated network MSD averaged over the last `window` iterations.
    pub fn simulated_steady_state(&self, window: usize) -> Option<f64> {
        self.simulated.as_ref().map(|c| c.steady_state(window))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub name: String,
    pub run: RunConfig,
    pub clusters: usize,
    pub cases: Vec<CaseResult>,
    /// Frequency grid and true spectrum for spectrum scenarios.
    pub spectrum_truth: Option<(Vec<f64>, DVector<f64>)>,
}

impl ResultBundle {
    pub fn case(&self, activation: Activation, eta: f64) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.activation == activation && c.eta == eta)
    }
}

fn case_list(run: &RunConfig) -> Vec<(f64, Activation)> {
    let mut out = Vec::new();
    for &eta in &run.etas {
        out.push((eta, Activation::Async));
        if run.sync_baseline {
            out.push((eta, Activation::Sync));
        }
    }
    out
}

fn monte_carlo<D: StreamingData, A: ActivationModel>(
    net: &ClusteredNetwork,
    data: &D,
    model: &A,
    run: &RunConfig,
    eta: f64,
) -> mtdiff_core::Result<MsdCurve> {
    let cfg = MonteCarloConfig {
        horizon: run.horizon,
        runs: run.runs,
        seed: run.seed,
        eta,
        initial: None,
    };
    run_monte_carlo(net, data, model, &cfg)
}

/// Theory for one case; instability only produces warnings.
fn analyze(case: &mut CaseResult, net: &ClusteredNetwork, signal: &SignalModel, ms: &mtdiff_core::MomentSet, horizon: usize) -> mtdiff_core::Result<()> {
    let ma = mean_artifacts(ms, signal, case.eta)?;
    let mean = mean_stability(&ma, ms, signal);
    case.stability.rho_b = mean.rho_b;
    case.stability.bound_mean = mean.sufficient_bound;
    if !mean.stable {
        warn!("{}: mean recursion unstable, rho(B) = {:.6}", case.label, mean.rho_b);
        return Ok(());
    }
    case.bias = ma.bias.clone();
    let nl = net.nodes() * net.dim();
    if nl > DEFAULT_GUARD {
        warn!("{}: NL = {nl} exceeds {DEFAULT_GUARD}, skipping mean-square theory", case.label);
        return Ok(());
    }
    let msa = ms_artifacts(ms, signal, case.eta)?;
    let msr = ms_stability(&msa, ms, signal);
    case.stability.rho_f = msr.rho_f;
    case.stability.bound_ms = msr.sufficient_bound;
    if !msr.stable {
        warn!("{}: mean-square recursion unstable, rho(F) = {:.6}", case.label, msr.rho_f);
    }
    let sigma = network_weight(net.nodes(), net.dim());
    case.theory = Some(transient_msd(&msa, &ma, &sigma, signal.optimum(), horizon)?);
    if msr.stable {
        case.steady_state = Some(steady_state_msd(&msa, &ma, &sigma)?);
    }
    Ok(())
}

fn run_regression(
    cfg: &ScenarioConfig,
    net: &ClusteredNetwork,
    signal: &SignalModel,
    params: &BernoulliParams,
) -> Result<Vec<CaseResult>, ScenarioError> {
    let run = &cfg.run;
    let sync = FixedActivation(params.mean_draw());
    let mut cases = Vec::new();
    for (eta, activation) in case_list(run) {
        let mut case = CaseResult::new(eta, activation);
        info!("{}: {}", cfg.name, case.label);
        if run.mode.theory() {
            let ms = match activation {
                Activation::Async => params.moments(),
                Activation::Sync => sync.moments(),
            };
            analyze(&mut case, net, signal, &ms, run.horizon)?;
        }
        if run.mode.simulate() {
            case.simulated = Some(match activation {
                Activation::Async => monte_carlo(net, signal, params, run, eta)?,
                Activation::Sync => monte_carlo(net, signal, &sync, run, eta)?,
            });
        }
        cases.push(case);
    }
    Ok(cases)
}

/// Runs every case of a validated configuration.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ResultBundle, ScenarioError> {
    match &cfg.scenario {
        Scenario::Regression(s) => {
            let (net, signal, params) = s.build()?;
            let cases = run_regression(cfg, &net, &signal, &params)?;
            Ok(ResultBundle {
                name: cfg.name.clone(),
                run: cfg.run.clone(),
                clusters: net.cluster_count(),
                cases,
                spectrum_truth: None,
            })
        }
        Scenario::Spectrum(s) => {
            let (net, data, params) = build_spectrum_model(s)?;
            if cfg.run.mode == Mode::Theory {
                warn!("{}: no closed-form theory for vector measurements", cfg.name);
            }
            let sync = FixedActivation(params.mean_draw());
            let mut cases = Vec::new();
            for (eta, activation) in case_list(&cfg.run) {
                let mut case = CaseResult::new(eta, activation);
                info!("{}: {}", cfg.name, case.label);
                if cfg.run.mode.simulate() {
                    let curve = match activation {
                        Activation::Async => monte_carlo(&net, &data, &params, &cfg.run, eta)?,
                        Activation::Sync => monte_carlo(&net, &data, &sync, &cfg.run, eta)?,
                    };
                    case.psd = s
                        .psd_users
                        .iter()
                        .map(|&u| (u, data.reconstruct_psd(data.user_estimate(&curve.final_estimate, u).as_slice())))
                        .collect();
                    case.simulated = Some(curve);
                }
                cases.push(case);
            }
            let truth = data.reconstruct_psd(s.stacked_alpha().as_slice());
            Ok(ResultBundle {
                name: cfg.name.clone(),
                run: cfg.run.clone(),
                clusters: net.cluster_count(),
                cases,
                spectrum_truth: Some((unit_grid(s.frequencies), truth)),
            })
        }
    }
}

impl ResultBundle {
    pub fn per_cluster(&self) -> bool {
        self.run.weighting == Weighting::Cluster
    }
}
