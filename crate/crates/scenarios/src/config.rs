//! Scenario configuration files.
//!
//! A configuration is a TOML document with a `[run]` table plus either the
//! regression tables `[network]`, `[model]`, `[async]` or a `[spectrum]`
//! table. Node and cluster labels in the file are 1-based. See
//! `presets/*.toml` for complete examples and README.md for the schema.

use std::fmt;
use std::path::Path;

use mtdiff_core::{BernoulliParams, ClusteredNetwork, SignalModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::spectrum::SpectrumScenario;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_REGRESSION_HORIZON: usize = 2000;
pub const DEFAULT_SPECTRUM_HORIZON: usize = 12000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(#[from] ValidationError),
}

/// Violated configuration invariant. Node and cluster numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("section [{0}] is not allowed in a {1} scenario")]
    UnexpectedSection(&'static str, &'static str),
    #[error("UncoveredNode: node {0} is not assigned to any cluster")]
    UncoveredNode(usize),
    #[error("DuplicateNode: node {0} appears in more than one cluster")]
    DuplicateNode(usize),
    #[error("UnknownNode: `{field}` references node {node}, network has {nodes}")]
    UnknownNode { field: String, node: usize, nodes: usize },
    #[error("ProbabilityRange: `{field}` = {value} is outside [0, 1]")]
    ProbabilityRange { field: String, value: f64 },
    #[error("LengthMismatch: `{field}` has {found} entries, expected {expected}")]
    LengthMismatch { field: String, expected: usize, found: usize },
    #[error("NonPositive: `{field}` = {value} must be positive")]
    NonPositive { field: String, value: f64 },
    #[error("InvalidRange: `{field}` = [{lo}, {hi}] is not an increasing range of nonnegative values")]
    InvalidRange { field: String, lo: f64, hi: f64 },
    #[error("Conflict: {0}")]
    Conflict(String),
    #[error("UnknownRule: `{field}` = \"{value}\" (supported: {supported})")]
    UnknownRule { field: String, value: String, supported: &'static str },
    #[error("SelfLoop: edge ({0}, {0})")]
    SelfLoop(usize),
    #[error("Infeasible: {0}")]
    Infeasible(String),
}

fn invalid<T>(e: ValidationError) -> Result<T, ConfigError> {
    Err(ConfigError::Validation(e))
}

/// What to compute for each case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Theory,
    Both,
}

impl Mode {
    pub fn simulate(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Both)
    }

    pub fn theory(self) -> bool {
        matches!(self, Mode::Theory | Mode::Both)
    }
}

/// Weighting of the reported MSD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Network,
    Cluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Regularization strengths; one case per entry.
    pub etas: Vec<f64>,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub mode: Mode,
    pub weighting: Weighting,
    /// Also run the mean-matched synchronous network.
    pub sync_baseline: bool,
    /// Iterations averaged for steady-state values.
    pub steady_window: usize,
}

/// Edge list and partition, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub dim: usize,
    pub edges: Vec<(usize, usize)>,
    pub clusters: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn build(&self) -> mtdiff_core::Result<ClusteredNetwork> {
        ClusteredNetwork::new(self.nodes, self.dim, &self.edges, &self.clusters)
    }
}

/// Resolved data model: every random stand-in has been drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub covariances: Vec<DMatrix<f64>>,
    pub noise_vars: Vec<f64>,
    pub cluster_params: Vec<DVector<f64>>,
}

/// Per-node Bernoulli parameters under the uniform combination and
/// regularization rules.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncSpec {
    pub steps: Vec<f64>,
    pub step_probs: Vec<f64>,
    /// Success probability of intra-cluster links, per cluster.
    pub link_probs: Vec<f64>,
    /// Success probability of inter-cluster links.
    pub reg_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionScenario {
    pub network: NetworkSpec,
    pub model: ModelSpec,
    pub activation: AsyncSpec,
}

impl RegressionScenario {
    pub fn build(&self) -> mtdiff_core::Result<(ClusteredNetwork, SignalModel, BernoulliParams)> {
        let net = self.network.build()?;
        let model = SignalModel::new(
            &net,
            self.model.covariances.clone(),
            self.model.noise_vars.clone(),
            &self.model.cluster_params,
        )?;
        let link = &self.activation.link_probs;
        let reg = self.activation.reg_prob;
        let params = BernoulliParams::uniform_rules(
            &net,
            self.activation.steps.clone(),
            self.activation.step_probs.clone(),
            |_, k| link[net.cluster_of(k)],
            |_, _| reg,
        )?;
        Ok((net, model, params))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Regression(RegressionScenario),
    Spectrum(SpectrumScenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: Scenario,
    pub run: RunConfig,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_config(&text, fallback)
}

/// Parses and validates a configuration; `fallback_name` is used when the
/// document has no `name` key.
pub fn parse_config(text: &str, fallback_name: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    raw.validate(fallback_name)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

// ---------------------------------------------------------------------------
// Raw document

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    network: Option<RawNetwork>,
    model: Option<RawModel>,
    #[serde(rename = "async")]
    activation: Option<RawAsync>,
    spectrum: Option<RawSpectrum>,
    run: Option<RawRun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    nodes: usize,
    dim: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
    clusters: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    regressor_vars: Option<Vec<f64>>,
    regressor_var_range: Option<[f64; 2]>,
    regressor_covariances: Option<Vec<Vec<Vec<f64>>>>,
    noise_vars: Option<Vec<f64>>,
    noise_var_range: Option<[f64; 2]>,
    #[serde(default)]
    variance_seed: u64,
    cluster_params: Vec<Vec<f64>>,
}

/// A value given once for every cluster or as one entry per cluster.
#[derive(Deserialize, Clone)]
#[serde(untagged)]
enum PerCluster {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsync {
    step: PerCluster,
    #[serde(default = "one")]
    step_prob: PerCluster,
    #[serde(default = "one")]
    link_prob: PerCluster,
    #[serde(default = "one_f")]
    reg_prob: f64,
    #[serde(default = "uniform_intra")]
    combine: String,
    #[serde(default = "uniform_inter")]
    regularize: String,
}

fn one() -> PerCluster {
    PerCluster::Scalar(1.0)
}

fn one_f() -> f64 {
    1.0
}

fn uniform_intra() -> String {
    "uniform-intra".into()
}

fn uniform_inter() -> String {
    "uniform-inter".into()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    eta: Option<OneOrMany>,
    horizon: Option<usize>,
    runs: Option<usize>,
    seed: Option<u64>,
    mode: Option<Mode>,
    weighting: Option<Weighting>,
    sync_baseline: Option<bool>,
    steady_window: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawSpectrum {
    pub primary_positions: Vec<[f64; 2]>,
    pub secondary_positions: Vec<[f64; 2]>,
    pub user_edges: Vec<[usize; 2]>,
    pub antennas: usize,
    pub basis: usize,
    pub frequencies: usize,
    pub basis_var: f64,
    pub alpha: Vec<Vec<f64>>,
    pub threshold: f64,
    #[serde(default = "pathloss_rel_std")]
    pub pathloss_rel_std: f64,
    pub noise_std: f64,
    pub link_decay: f64,
    pub step: f64,
    #[serde(default = "one_f")]
    pub step_prob: f64,
    #[serde(default = "one_f")]
    pub link_prob: f64,
    #[serde(default)]
    pub psd_users: Vec<usize>,
}

fn pathloss_rel_std() -> f64 {
    0.1
}

// ---------------------------------------------------------------------------
// Validation

pub(crate) fn check_prob(field: &str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        invalid(ValidationError::ProbabilityRange { field: field.into(), value })
    }
}

pub(crate) fn check_positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        invalid(ValidationError::NonPositive { field: field.into(), value })
    }
}

pub(crate) fn check_len(field: &str, expected: usize, found: usize) -> Result<(), ConfigError> {
    if expected == found {
        Ok(())
    } else {
        invalid(ValidationError::LengthMismatch { field: field.into(), expected, found })
    }
}

/// Converts a 1-based label to an index.
pub(crate) fn index(field: &str, label: usize, count: usize) -> Result<usize, ConfigError> {
    if label == 0 || label > count {
        invalid(ValidationError::UnknownNode { field: field.into(), node: label, nodes: count })
    } else {
        Ok(label - 1)
    }
}

impl RawConfig {
    fn validate(self, fallback_name: &str) -> Result<ScenarioConfig, ConfigError> {
        let name = self.name.unwrap_or_else(|| fallback_name.to_string());
        let raw_run = self.run.unwrap_or_default();
        if let Some(spectrum) = self.spectrum {
            for (present, section) in [
                (self.network.is_some(), "network"),
                (self.model.is_some(), "model"),
                (self.activation.is_some(), "async"),
            ] {
                if present {
                    return invalid(ValidationError::UnexpectedSection(section, "spectrum"));
                }
            }
            let scenario = spectrum.validate()?;
            let run = raw_run.validate(DEFAULT_SPECTRUM_HORIZON)?;
            return Ok(ScenarioConfig { name, scenario: Scenario::Spectrum(scenario), run });
        }
        let network = self.network.ok_or(ValidationError::MissingSection("network"))?.validate()?;
        let model = self.model.ok_or(ValidationError::MissingSection("model"))?.validate(&network)?;
        let activation = self.activation.ok_or(ValidationError::MissingSection("async"))?.validate(&network)?;
        let run = raw_run.validate(DEFAULT_REGRESSION_HORIZON)?;
        let scenario = RegressionScenario { network, model, activation };
        scenario.build().map_err(|e| ValidationError::Infeasible(e.to_string()))?;
        Ok(ScenarioConfig { name, scenario: Scenario::Regression(scenario), run })
    }
}

impl RawNetwork {
    fn validate(self) -> Result<NetworkSpec, ConfigError> {
        check_positive("network.nodes", self.nodes as f64)?;
        check_positive("network.dim", self.dim as f64)?;
        let n = self.nodes;
        let mut edges = Vec::with_capacity(self.edges.len());
        for [a, b] in self.edges {
            let (i, j) = (index("network.edges", a, n)?, index("network.edges", b, n)?);
            if i == j {
                return invalid(ValidationError::SelfLoop(a));
            }
            edges.push((i, j));
        }
        let mut owner = vec![false; n];
        let mut clusters = Vec::with_capacity(self.clusters.len());
        for members in self.clusters {
            if members.is_empty() {
                return invalid(ValidationError::Infeasible("empty cluster".into()));
            }
            let mut idx = Vec::with_capacity(members.len());
            for label in members {
                let k = index("network.clusters", label, n)?;
                if owner[k] {
                    return invalid(ValidationError::DuplicateNode(label));
                }
                owner[k] = true;
                idx.push(k);
            }
            clusters.push(idx);
        }
        if let Some(k) = owner.iter().position(|&o| !o) {
            return invalid(ValidationError::UncoveredNode(k + 1));
        }
        Ok(NetworkSpec { nodes: n, dim: self.dim, edges, clusters })
    }
}

/// Resolves an explicit list or a seeded uniform range into per-node values.
fn variances(
    field: &str,
    explicit: Option<Vec<f64>>,
    range: Option<[f64; 2]>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>, ConfigError> {
    match (explicit, range) {
        (Some(_), Some(_)) => invalid(ValidationError::Conflict(format!(
            "give either `{field}s` or `{field}_range`, not both"
        ))),
        (Some(v), None) => {
            check_len(&format!("model.{field}s"), n, v.len())?;
            Ok(Some(v))
        }
        (None, Some([lo, hi])) => {
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return invalid(ValidationError::InvalidRange { field: format!("model.{field}_range"), lo, hi });
            }
            Ok(Some((0..n).map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect()))
        }
        (None, None) => Ok(None),
    }
}

impl RawModel {
    fn validate(self, net: &NetworkSpec) -> Result<ModelSpec, ConfigError> {
        let (n, l) = (net.nodes, net.dim);
        // regressor variances are drawn before noise variances
        let mut rng = ChaCha8Rng::seed_from_u64(self.variance_seed);
        let vars = variances("regressor_var", self.regressor_vars, self.regressor_var_range, n, &mut rng)?;
        let covariances = match (vars, self.regressor_covariances) {
            (Some(_), Some(_)) => {
                return invalid(ValidationError::Conflict(
                    "give either regressor variances or `regressor_covariances`, not both".into(),
                ))
            }
            (Some(v), None) => {
                for (k, &s) in v.iter().enumerate() {
                    check_positive(&format!("model.regressor_vars[{}]", k + 1), s)?;
                }
                v.iter().map(|&s| DMatrix::identity(l, l) * s).collect()
            }
            (None, Some(mats)) => {
                check_len("model.regressor_covariances", n, mats.len())?;
                let mut out = Vec::with_capacity(n);
                for (k, rows) in mats.into_iter().enumerate() {
                    let field = format!("model.regressor_covariances[{}]", k + 1);
                    check_len(&field, l, rows.len())?;
                    for row in &rows {
                        check_len(&field, l, row.len())?;
                    }
                    out.push(DMatrix::from_fn(l, l, |i, j| rows[i][j]));
                }
                out
            }
            (None, None) => {
                return invalid(ValidationError::Conflict(
                    "the model needs `regressor_vars`, `regressor_var_range` or `regressor_covariances`".into(),
                ))
            }
        };
        let noise_vars = variances("noise_var", self.noise_vars, self.noise_var_range, n, &mut rng)?.ok_or_else(|| {
            ValidationError::Conflict("the model needs `noise_vars` or `noise_var_range`".into())
        })?;
        for (k, &s) in noise_vars.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return invalid(ValidationError::NonPositive { field: format!("model.noise_vars[{}]", k + 1), value: s });
            }
        }
        check_len("model.cluster_params", net.clusters.len(), self.cluster_params.len())?;
        let mut cluster_params = Vec::with_capacity(net.clusters.len());
        for (q, w) in self.cluster_params.into_iter().enumerate() {
            check_len(&format!("model.cluster_params[{}]", q + 1), l, w.len())?;
            cluster_params.push(DVector::from_vec(w));
        }
        Ok(ModelSpec { covariances, noise_vars, cluster_params })
    }
}

impl PerCluster {
    fn per_cluster(&self, field: &str, clusters: usize) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerCluster::Scalar(v) => Ok(vec![*v; clusters]),
            PerCluster::List(v) => {
                check_len(field, clusters, v.len())?;
                Ok(v.clone())
            }
        }
    }
}

impl RawAsync {
    fn validate(self, net: &NetworkSpec) -> Result<AsyncSpec, ConfigError> {
        if self.combine != "uniform-intra" {
            return invalid(ValidationError::UnknownRule {
                field: "async.combine".into(),
                value: self.combine,
                supported: "uniform-intra",
            });
        }
        if self.regularize != "uniform-inter" {
            return invalid(ValidationError::UnknownRule {
                field: "async.regularize".into(),
                value: self.regularize,
                supported: "uniform-inter",
            });
        }
        let q = net.clusters.len();
        let steps = self.step.per_cluster("async.step", q)?;
        let step_probs = self.step_prob.per_cluster("async.step_prob", q)?;
        let link_probs = self.link_prob.per_cluster("async.link_prob", q)?;
        for c in 0..q {
            check_positive(&format!("async.step[{}]", c + 1), steps[c])?;
            check_prob(&format!("async.step_prob[{}]", c + 1), step_probs[c])?;
            check_prob(&format!("async.link_prob[{}]", c + 1), link_probs[c])?;
        }
        check_prob("async.reg_prob", self.reg_prob)?;
        let mut node_steps = vec![0.0; net.nodes];
        let mut node_probs = vec![0.0; net.nodes];
        for (c, members) in net.clusters.iter().enumerate() {
            for &k in members {
                node_steps[k] = steps[c];
                node_probs[k] = step_probs[c];
            }
        }
        Ok(AsyncSpec {
            steps: node_steps,
            step_probs: node_probs,
            link_probs,
            reg_prob: self.reg_prob,
        })
    }
}

impl RawRun {
    fn validate(self, default_horizon: usize) -> Result<RunConfig, ConfigError> {
        let etas = match self.eta {
            None => vec![0.0],
            Some(OneOrMany::One(v)) => vec![v],
            Some(OneOrMany::Many(v)) => v,
        };
        if etas.is_empty() {
            return invalid(ValidationError::LengthMismatch { field: "run.eta".into(), expected: 1, found: 0 });
        }
        for &eta in &etas {
            if !(eta >= 0.0 && eta.is_finite()) {
                return invalid(ValidationError::NonPositive { field: "run.eta".into(), value: eta });
            }
        }
        let horizon = self.horizon.unwrap_or(default_horizon);
        let runs = self.runs.unwrap_or(DEFAULT_RUNS);
        check_positive("run.runs", runs as f64)?;
        let steady_window = self.steady_window.unwrap_or((horizon / 10).max(1));
        check_positive("run.steady_window", steady_window as f64)?;
        Ok(RunConfig {
            etas,
            horizon,
            runs,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            mode: self.mode.unwrap_or(Mode::Both),
            weighting: self.weighting.unwrap_or(Weighting::Network),
            sync_baseline: self.sync_baseline.unwrap_or(false),
            steady_window,
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Theory => "theory",
            Mode::Both => "both",
        })
    }
}
