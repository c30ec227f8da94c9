use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    default_cv_grid, lasso_cv_support, majority_vote, ols_aggregate_select, ols_message_bits, ols_node_summary,
    ols_selection_rows, vote_counts, vote_message_bits, vote_selection_rows,
};
use crate::coordinator::{
    aggregate_summaries, knockoff_select, selection_csv, selection_rows, ConfidenceSpec, SummarySpec,
};
use crate::error::{Error, Result};
use crate::node::{construct_knockoffs, node_statistics_with, LambdaGrid, LassoPath, NodeData};
use crate::numerics::Matrix;
use crate::rng::{stream_seed, Stream};
use crate::wire::{decode_summary, message_bits, try_encode_summary, NodeSummary, WireMode};

use super::generate::{gen_design, gen_response, gen_signal, SigmaSpec};
use super::metrics::{compute_metrics, mean_sd, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Knockagg,
    OlsBhq,
    LassoVote,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Knockagg => "knockagg",
            Method::OlsBhq => "ols_bhq",
            Method::LassoVote => "lasso_vote",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Signal amplitude: a literal value or `factor · √(2 ln p / divisor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Value(f64),
    Universal {
        factor: f64,
        #[serde(default = "one")]
        divisor: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Amplitude {
    pub fn value(&self, p: usize) -> f64 {
        match self {
            Amplitude::Value(a) => *a,
            Amplitude::Universal { factor, divisor } => factor * (2.0 * (p as f64).ln() / divisor).sqrt(),
        }
    }
}

/// How node messages reach the coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Encode to bytes and decode, as a real deployment would.
    #[default]
    Wire,
    /// Hand the unquantized statistics straight to the coordinator.
    InMemory,
}

/// Lists of values to take the cartesian product over.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Vec<Method>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    /// Replaces `factor` in a universal-threshold amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_factor: Option<Vec<f64>>,
}

fn default_q() -> f64 {
    0.2
}

fn default_folds() -> usize {
    crate::baselines::DEFAULT_CV_FOLDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub p: usize,
    /// Rows per node.
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub amplitude: Amplitude,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub sigma: SigmaSpec,
    #[serde(default)]
    pub gamma: SummarySpec,
    #[serde(default)]
    pub omega: ConfidenceSpec,
    #[serde(default = "default_wire_mode")]
    pub wire_mode: WireMode,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    /// Per-node noise standard deviations; all 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_sigmas: Option<Vec<f64>>,
    /// Draw fresh designs (and knockoffs) for every replicate.
    #[serde(default)]
    pub redraw_design: bool,
    #[serde(default)]
    pub lambda_grid: LambdaGrid,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub transport: Transport,
    /// Keep each replicate's selection CSV in the output.
    #[serde(default)]
    pub keep_selections: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_wire_mode() -> WireMode {
    WireMode::Raw32
}

impl ExperimentConfig {
    /// A single-point configuration with defaults for everything optional.
    pub fn new(p: usize, n: usize, m: usize, k: usize, amplitude: Amplitude, replicates: usize) -> Self {
        ExperimentConfig {
            name: String::new(),
            p,
            n,
            m,
            k,
            amplitude,
            q: default_q(),
            sigma: SigmaSpec::default(),
            gamma: SummarySpec::default(),
            omega: ConfidenceSpec::default(),
            wire_mode: default_wire_mode(),
            replicates,
            seed: 0,
            method: Method::default(),
            node_sigmas: None,
            redraw_design: false,
            lambda_grid: LambdaGrid::default(),
            cv_folds: default_folds(),
            transport: Transport::default(),
            keep_selections: false,
            sweep: None,
        }
    }

    /// Expands the sweep into single-point configurations, ordered by
    /// method, then m, then k, then amplitude factor.
    pub fn points(&self) -> Result<Vec<ExperimentConfig>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![self.clone()]);
        };
        let methods = sweep.method.clone().unwrap_or_else(|| vec![self.method]);
        let ms = sweep.m.clone().unwrap_or_else(|| vec![self.m]);
        let ks = sweep.k.clone().unwrap_or_else(|| vec![self.k]);
        let amps: Vec<Amplitude> = match (&sweep.amplitude_factor, self.amplitude) {
            (None, a) => vec![a],
            (Some(fs), Amplitude::Universal { divisor, .. }) => fs
                .iter()
                .map(|&factor| Amplitude::Universal { factor, divisor })
                .collect(),
            (Some(_), Amplitude::Value(_)) => {
                return Err(Error::Config(
                    "amplitude_factor sweep needs a universal-threshold amplitude".into(),
                ))
            }
        };
        let mut out = Vec::new();
        for &method in &methods {
            for &m in &ms {
                for &k in &ks {
                    for &amplitude in &amps {
                        out.push(ExperimentConfig {
                            method,
                            m,
                            k,
                            amplitude,
                            sweep: None,
                            ..self.clone()
                        });
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("sweep has an empty list".into()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for point in self.points()? {
            point.validate_point()?;
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p == 0 || self.m == 0 || self.replicates == 0 {
            return bad("p, m and replicates must be at least 1".into());
        }
        if self.k > self.p {
            return bad(format!("k = {} exceeds p = {}", self.k, self.p));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q must lie in (0, 1), got {}", self.q));
        }
        if self.n < 2 * self.p {
            return bad(format!(
                "each node needs n >= 2p rows (n = {}, p = {})",
                self.n, self.p
            ));
        }
        let a = self.amplitude.value(self.p);
        if !a.is_finite() {
            return bad(format!("amplitude evaluates to {a}"));
        }
        if let Some(s) = &self.node_sigmas {
            if s.len() != self.m {
                return bad(format!("node_sigmas has {} entries for m = {}", s.len(), self.m));
            }
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("node_sigmas must be finite and nonnegative".into());
            }
        }
        if let SigmaSpec::Equicorr { rho } = self.sigma {
            if !(rho > -1.0 / (self.p as f64 - 1.0).max(1.0) && rho < 1.0) {
                return bad(format!("equicorrelation {rho} is not positive definite at p = {}", self.p));
            }
        }
        LambdaGrid::new(self.lambda_grid.points, self.lambda_grid.min_ratio)?;
        match self.method {
            Method::Knockagg => {
                self.gamma.with_node_sizes(&vec![self.n as f64; self.m]).validate(self.m)?;
                self.omega.expected_value().map_err(|e| Error::Config(e.to_string()))?;
            }
            Method::LassoVote => {
                if self.cv_folds < 2 || self.cv_folds > self.n {
                    return bad(format!("cv_folds must lie in [2, n], got {}", self.cv_folds));
                }
            }
            Method::OlsBhq => {}
        }
        Ok(())
    }

    fn noise_sd(&self, node: usize) -> f64 {
        self.node_sigmas.as_ref().map_or(1.0, |s| s[node])
    }

    fn design_parts(&self, node: usize, rep: usize) -> Vec<u64> {
        if self.redraw_design {
            vec![node as u64, rep as u64]
        } else {
            vec![node as u64]
        }
    }

    pub fn design_seed(&self, node: usize, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::Design, &self.design_parts(node, rep))
    }

    pub fn knockoff_seed(&self, node: usize, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::Knockoff, &self.design_parts(node, rep))
    }

    pub fn signal_seed(&self, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::Signal, &[rep as u64])
    }

    pub fn response_seed(&self, node: usize, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::Response, &[rep as u64, node as u64])
    }

    pub fn stats_seed(&self, node: usize, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::NodeStats, &[rep as u64, node as u64])
    }

    pub fn cv_seed(&self, node: usize, rep: usize) -> u64 {
        stream_seed(self.seed, Stream::CrossValidation, &[rep as u64, node as u64])
    }
}

/// One node's inputs for one replicate.
#[derive(Debug, Clone)]
pub struct NodeInput {
    pub data: NodeData<f64>,
    pub knockoff_seed: u64,
    pub stats_seed: u64,
    pub cv_seed: u64,
}

#[derive(Debug, Clone)]
pub struct ReplicateInputs {
    pub beta: Vec<f64>,
    pub nodes: Vec<NodeInput>,
}

/// Designs for replicate `rep` of a single-point configuration.
pub fn experiment_designs(cfg: &ExperimentConfig, rep: usize) -> Result<Vec<Matrix<f64>>> {
    (0..cfg.m)
        .map(|i| gen_design(cfg.n, cfg.p, &cfg.sigma, cfg.design_seed(i, rep)))
        .collect()
}

fn inputs_with(cfg: &ExperimentConfig, rep: usize, designs: &[Matrix<f64>]) -> Result<ReplicateInputs> {
    let beta = gen_signal(cfg.p, cfg.k, cfg.amplitude.value(cfg.p), cfg.signal_seed(rep))?;
    let nodes = designs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let y = gen_response(x, &beta, cfg.noise_sd(i), cfg.response_seed(i, rep))?;
            Ok(NodeInput {
                data: NodeData::new(x.clone(), y, i as u32, Some(beta.clone()))?,
                knockoff_seed: cfg.knockoff_seed(i, rep),
                stats_seed: cfg.stats_seed(i, rep),
                cv_seed: cfg.cv_seed(i, rep),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReplicateInputs { beta, nodes })
}

/// Everything the nodes of replicate `rep` see, for a single-point configuration.
pub fn replicate_inputs(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicateInputs> {
    inputs_with(cfg, rep, &experiment_designs(cfg, rep)?)
}

/// Results of one configuration point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub config: ExperimentConfig,
    pub amplitude: f64,
    pub replicates: Vec<Metrics>,
    /// Selection CSV per replicate when `keep_selections` is set.
    pub selections: Vec<String>,
}

/// Mean and standard deviation of each metric over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub fdp: (f64, f64),
    pub power: (f64, f64),
    pub wfdp: (f64, f64),
    pub hamming: (f64, f64),
    pub comm_bits: f64,
}

impl MetricsSummary {
    /// Standard error of the mean FDP.
    pub fn fdp_se(&self, replicates: usize) -> f64 {
        self.fdp.1 / (replicates as f64).sqrt()
    }

    pub fn wfdp_se(&self, replicates: usize) -> f64 {
        self.wfdp.1 / (replicates as f64).sqrt()
    }
}

impl PointResult {
    pub fn summary(&self) -> MetricsSummary {
        let col = |f: fn(&Metrics) -> f64| mean_sd(&self.replicates.iter().map(f).collect::<Vec<_>>());
        MetricsSummary {
            fdp: col(|m| m.fdp),
            power: col(|m| m.power),
            wfdp: col(|m| m.wfdp),
            hamming: col(|m| m.hamming as f64),
            comm_bits: col(|m| m.comm_bits as f64).0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub points: Vec<PointResult>,
}

pub const METRICS_CSV_HEADER: &str =
    "replicate,method,p,n,m,k,A,q,fdp,power,wfdp,hamming,comm_bits,fdp_sd,power_sd,wfdp_sd,hamming_sd";

impl ExperimentOutput {
    /// One row per replicate followed by a `mean` row per configuration point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(METRICS_CSV_HEADER);
        out.push('\n');
        for pt in &self.points {
            let c = &pt.config;
            let prefix = format!("{},{},{},{},{},{},{}", c.method, c.p, c.n, c.m, c.k, pt.amplitude, c.q);
            for (r, m) in pt.replicates.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{r},{prefix},{},{},{},{},{},,,,",
                    m.fdp, m.power, m.wfdp, m.hamming, m.comm_bits
                );
            }
            let s = pt.summary();
            let _ = writeln!(
                out,
                "mean,{prefix},{},{},{},{},{},{},{},{},{}",
                s.fdp.0, s.power.0, s.wfdp.0, s.hamming.0, s.comm_bits, s.fdp.1, s.power.1, s.wfdp.1, s.hamming.1
            );
        }
        out
    }

    /// Gnuplot-style `x mean sd` series for FDP and power, one file per
    /// (metric, method, m). The x axis is the amplitude when it varies, else k.
    pub fn plot_data(&self) -> Vec<(String, String)> {
        let amp_varies = self
            .points
            .windows(2)
            .any(|w| w[0].amplitude != w[1].amplitude && w[0].config.k == w[1].config.k);
        type Series = BTreeMap<(String, Method, usize), Vec<(f64, f64, f64)>>;
        let mut series: Series = BTreeMap::new();
        for pt in &self.points {
            let x = if amp_varies { pt.amplitude } else { pt.config.k as f64 };
            let s = pt.summary();
            for (name, (mean, sd)) in [("fdp", s.fdp), ("power", s.power)] {
                series
                    .entry((name.to_string(), pt.config.method, pt.config.m))
                    .or_default()
                    .push((x, mean, sd));
            }
        }
        series
            .into_iter()
            .map(|((metric, method, m), rows)| {
                let mut body = format!("# {} x mean sd\n", if amp_varies { "A" } else { "k" });
                for (x, mean, sd) in rows {
                    let _ = writeln!(body, "{x} {mean} {sd}");
                }
                (format!("{metric}_{method}_m{m}.dat"), body)
            })
            .collect()
    }

    /// Human-readable mean FDP and power per configuration point.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for pt in &self.points {
            let c = &pt.config;
            let s = pt.summary();
            let _ = writeln!(
                out,
                "{:<10} m={:<3} k={:<4} A={:<8.4} fdp={:.4} (sd {:.4})  power={:.4} (sd {:.4})  wfdp={:.4}",
                c.method.as_str(),
                c.m,
                c.k,
                pt.amplitude,
                s.fdp.0,
                s.fdp.1,
                s.power.0,
                s.power.1,
                s.wfdp.0
            );
        }
        out
    }
}

/// Per-node state that survives across replicates while the design is fixed.
struct NodeDesign {
    augmented: Option<LassoPath<f64>>,
}

fn prepare_designs(cfg: &ExperimentConfig, rep: usize, designs: &[Matrix<f64>]) -> Result<Vec<NodeDesign>> {
    designs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let augmented = match cfg.method {
                Method::Knockagg => {
                    let ko = construct_knockoffs(x, cfg.knockoff_seed(i, rep))?;
                    Some(LassoPath::new(x.hstack(&ko.x_tilde)))
                }
                _ => None,
            };
            Ok(NodeDesign { augmented })
        })
        .collect()
}

struct ReplicateOutcome {
    metrics: Metrics,
    selection: Option<String>,
}

fn run_replicate(cfg: &ExperimentConfig, inputs: &ReplicateInputs, prepared: &[NodeDesign]) -> Result<ReplicateOutcome> {
    let truth: Vec<bool> = inputs.beta.iter().map(|&b| b != 0.0).collect();
    let p = cfg.p;
    let (rejected, omega, bits, csv) = match cfg.method {
        Method::Knockagg => {
            let mut bits = 0u64;
            let mut summaries = Vec::with_capacity(inputs.nodes.len());
            for (node, design) in inputs.nodes.iter().zip(prepared) {
                let path = design.augmented.as_ref().expect("knockoff path");
                let stats = node_statistics_with(path, node.data.y(), &cfg.lambda_grid, node.stats_seed)?;
                let id = node.data.node_id();
                let summary = match cfg.transport {
                    Transport::Wire => {
                        let bytes = try_encode_summary(&stats, cfg.wire_mode, id)?;
                        bits += 8 * bytes.len() as u64;
                        decode_summary(&bytes)?
                    }
                    Transport::InMemory => {
                        bits += message_bits(p, cfg.wire_mode);
                        NodeSummary {
                            node_id: id,
                            n: stats.n as u32,
                            mode: cfg.wire_mode,
                            chi: stats.chi.clone(),
                            w: stats.w.clone(),
                        }
                    }
                };
                summaries.push(summary);
            }
            let agg = aggregate_summaries(&summaries, &cfg.gamma)?;
            let sel = knockoff_select(&agg, cfg.q, &cfg.omega)?;
            let csv = cfg.keep_selections.then(|| selection_csv(&selection_rows(&agg, &sel)));
            (sel.rejected(), sel.omega, bits, csv)
        }
        Method::OlsBhq => {
            let summaries = inputs
                .nodes
                .iter()
                .map(|n| ols_node_summary(&n.data))
                .collect::<Result<Vec<_>>>()?;
            let sel = ols_aggregate_select(&summaries, cfg.q)?;
            let csv = cfg.keep_selections.then(|| selection_csv(&ols_selection_rows(&sel)));
            let (rejected, omega) = indicators(p, &sel.bhq.rejected);
            (rejected, omega, cfg.m as u64 * ols_message_bits(p), csv)
        }
        Method::LassoVote => {
            let grid = default_cv_grid();
            let supports = inputs
                .nodes
                .iter()
                .map(|n| lasso_cv_support(&n.data, cfg.cv_folds, &grid, n.cv_seed))
                .collect::<Result<Vec<_>>>()?;
            let chosen = majority_vote(&supports, p)?;
            let csv = cfg
                .keep_selections
                .then(|| Ok::<_, Error>(selection_csv(&vote_selection_rows(&vote_counts(&supports, p)?, &chosen))))
                .transpose()?;
            let (rejected, omega) = indicators(p, &chosen);
            (rejected, omega, cfg.m as u64 * vote_message_bits(p), csv)
        }
    };
    Ok(ReplicateOutcome {
        metrics: compute_metrics(&rejected, &omega, &truth, bits)?,
        selection: csv,
    })
}

fn indicators(p: usize, selected: &[usize]) -> (Vec<bool>, Vec<f64>) {
    let mut rejected = vec![false; p];
    for &j in selected {
        rejected[j] = true;
    }
    let omega = rejected.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
    (rejected, omega)
}

/// Runs one configuration point: designs fixed across replicates unless
/// `redraw_design`, responses redrawn per replicate.
pub fn run_point(cfg: &ExperimentConfig) -> Result<PointResult> {
    cfg.validate_point()?;
    let mut replicates = Vec::with_capacity(cfg.replicates);
    let mut selections = Vec::new();
    let mut cached: Option<(Vec<Matrix<f64>>, Vec<NodeDesign>)> = None;
    for rep in 0..cfg.replicates {
        if cfg.redraw_design || cached.is_none() {
            let designs = experiment_designs(cfg, rep)?;
            let prepared = prepare_designs(cfg, rep, &designs)?;
            cached = Some((designs, prepared));
        }
        let (designs, prepared) = cached.as_ref().expect("designs prepared");
        let inputs = inputs_with(cfg, rep, designs)?;
        let outcome = run_replicate(cfg, &inputs, prepared)?;
        replicates.push(outcome.metrics);
        selections.extend(outcome.selection);
    }
    Ok(PointResult {
        amplitude: cfg.amplitude.value(cfg.p),
        config: cfg.clone(),
        replicates,
        selections,
    })
}

/// Runs every point of the (possibly swept) configuration in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let points = cfg.points()?.iter().map(run_point).collect::<Result<_>>()?;
    Ok(ExperimentOutput { points })
}
