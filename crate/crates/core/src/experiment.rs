//! Experiment descriptions as read from JSON, and the runs they describe.
//!
//! ```json
//! {
//!   "name": "congestion",
//!   "network": { "ba": { "n": 7200, "m": 5, "seed": 1 } },
//!   "sim": { "months": 64, "seed": 1 },
//!   "experiment": { "kind": "congestion", "pair_counts": [10, 50, 100, 1000], "pair_seed": 3 }
//! }
//! ```
//!
//! Relative dataset paths are resolved against the directory of the experiment
//! file. Every output is a pure function of the experiment file.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim_engine::report::{write_entropy_csv, write_metrics_csv, write_traces_jsonl, MetricsRow};
use crate::sim_engine::{
    congestion_sweep, draw_pairs, ground_truth_moments, path_entropy_analysis, removal_sweep, run, EntropyReport,
    MessageRecord, RemovalStrategy, SimConfig, SimMetrics,
};
use crate::social_graph::{
    generate_ba, load_dataset, map_uploads, LoadOptions, NodeId, SocialGraph, SyntheticUploads, UploadBehaviour,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub network: NetworkSource,
    #[serde(default)]
    pub sim: SimConfig,
    pub experiment: ExperimentKind,
    /// Output directory. Callers may supply a default when absent.
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    Ba {
        n: usize,
        m: usize,
        seed: u64,
        #[serde(default)]
        uploads: UploadSource,
    },
    Dataset {
        edges: PathBuf,
        uploads: PathBuf,
        #[serde(default)]
        strict_nodes: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UploadSource {
    /// Log-normal monthly counts; `months` follows the simulation length.
    Synthetic {
        #[serde(default = "default_upload_seed")]
        seed: u64,
        #[serde(default = "default_median")]
        median_monthly: f64,
        #[serde(default = "default_node_sigma")]
        node_sigma: f64,
        #[serde(default = "default_month_sigma")]
        month_sigma: f64,
        #[serde(default)]
        silent_month_prob: f64,
    },
    /// Rows of an upload CSV assigned to generated nodes.
    Mapped {
        path: PathBuf,
        #[serde(default)]
        permutation_seed: Option<u64>,
    },
}

fn default_upload_seed() -> u64 {
    2
}
fn default_median() -> f64 {
    SyntheticUploads::default().median_monthly
}
fn default_node_sigma() -> f64 {
    SyntheticUploads::default().node_sigma
}
fn default_month_sigma() -> f64 {
    SyntheticUploads::default().month_sigma
}

impl Default for UploadSource {
    fn default() -> Self {
        let s = SyntheticUploads::default();
        UploadSource::Synthetic {
            seed: default_upload_seed(),
            median_monthly: s.median_monthly,
            node_sigma: s.node_sigma,
            month_sigma: s.month_sigma,
            silent_month_prob: s.silent_month_prob,
        }
    }
}

fn default_pair_seed() -> u64 {
    3
}
fn default_bins() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    /// One run. Pairs come from `sim.pairs` unless `pairs` asks for a draw.
    Single {
        #[serde(default)]
        pairs: Option<usize>,
        #[serde(default = "default_pair_seed")]
        pair_seed: u64,
    },
    Congestion {
        pair_counts: Vec<usize>,
        #[serde(default = "default_pair_seed")]
        pair_seed: u64,
    },
    Removal {
        pairs: usize,
        #[serde(default = "default_pair_seed")]
        pair_seed: u64,
        strategies: Vec<RemovalStrategy>,
        fractions: Vec<f64>,
        at_day: u32,
    },
    Entropy {
        pairs: usize,
        #[serde(default = "default_pair_seed")]
        pair_seed: u64,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

/// A loaded network.
#[derive(Clone, Debug)]
pub struct Network {
    pub graph: SocialGraph,
    pub behaviours: Vec<UploadBehaviour>,
}

/// Everything an experiment produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub name: String,
    pub rows: Vec<MetricsRow>,
    pub entropy: Option<EntropyReport>,
    /// The traced run, for single and entropy experiments.
    pub traced: Option<SimMetrics>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentSpec {
    /// Parses an experiment file; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let mut spec = Self::from_json(&std::fs::read_to_string(path)?)?;
        spec.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.network {
            NetworkSource::Dataset { edges, uploads, .. } => {
                fix(edges);
                fix(uploads);
            }
            NetworkSource::Ba {
                uploads: UploadSource::Mapped { path, .. },
                ..
            } => fix(path),
            NetworkSource::Ba { .. } => {}
        }
        if let Some(out) = &mut self.outputs {
            fix(out);
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(config_err("name", "must not be empty"));
        }
        self.sim
            .validate()
            .map_err(|e| match e {
                Error::Config { path, message } => config_err(&format!("sim.{path}"), message),
                other => other,
            })?;
        if let NetworkSource::Ba { n, m, .. } = &self.network {
            if *m == 0 || *n <= *m {
                return Err(config_err("network.ba", "need n > m >= 1"));
            }
        }
        match &self.experiment {
            ExperimentKind::Congestion { pair_counts, .. } if pair_counts.is_empty() => {
                Err(config_err("experiment.pair_counts", "must not be empty"))
            }
            ExperimentKind::Removal {
                strategies, fractions, ..
            } => {
                if strategies.is_empty() || fractions.is_empty() {
                    return Err(config_err("experiment", "need at least one strategy and one fraction"));
                }
                match fractions.iter().position(|f| !(0.0..1.0).contains(f)) {
                    Some(i) => Err(config_err(&format!("experiment.fractions[{i}]"), "must lie in [0, 1)")),
                    None => Ok(()),
                }
            }
            ExperimentKind::Entropy { bins: 0, .. } => Err(config_err("experiment.bins", "must be positive")),
            _ => Ok(()),
        }
    }

    pub fn load_network(&self) -> Result<Network> {
        match &self.network {
            NetworkSource::Ba { n, m, seed, uploads } => {
                let graph = generate_ba(*n, *m, *seed)?;
                let behaviours = match uploads {
                    UploadSource::Synthetic {
                        seed,
                        median_monthly,
                        node_sigma,
                        month_sigma,
                        silent_month_prob,
                    } => SyntheticUploads {
                        months: self.sim.months as usize,
                        median_monthly: *median_monthly,
                        node_sigma: *node_sigma,
                        month_sigma: *month_sigma,
                        silent_month_prob: *silent_month_prob,
                    }
                    .generate(*n, *seed)?,
                    UploadSource::Mapped { path, permutation_seed } => {
                        let (records, _) = load_dataset(std::io::empty(), File::open(path)?, &LoadOptions::default())?;
                        map_uploads(&graph, &records.behaviours, *permutation_seed)?
                    }
                };
                Ok(Network { graph, behaviours })
            }
            NetworkSource::Dataset {
                edges,
                uploads,
                strict_nodes,
            } => {
                let options = LoadOptions {
                    strict_nodes: *strict_nodes,
                };
                let (data, _) = load_dataset(File::open(edges)?, File::open(uploads)?, &options)?;
                Ok(Network {
                    graph: data.graph,
                    behaviours: data.behaviours,
                })
            }
        }
    }

    pub fn run(&self) -> Result<ExperimentOutcome> {
        let net = self.load_network()?;
        self.run_on(&net)
    }

    pub fn run_on(&self, net: &Network) -> Result<ExperimentOutcome> {
        let (graph, behaviours) = (&net.graph, net.behaviours.as_slice());
        let mut outcome = ExperimentOutcome {
            name: self.name.clone(),
            rows: Vec::new(),
            entropy: None,
            traced: None,
        };
        let with_pairs = |count: usize, seed: u64| -> Result<SimConfig> {
            Ok(SimConfig {
                pairs: draw_pairs(graph, count, seed)?,
                ..self.sim.clone()
            })
        };
        match &self.experiment {
            ExperimentKind::Single { pairs, pair_seed } => {
                let cfg = match pairs {
                    Some(k) => with_pairs(*k, *pair_seed)?,
                    None => self.sim.clone(),
                };
                let m = run(&cfg, graph, behaviours)?;
                outcome.rows.push(MetricsRow::new(&self.name, cfg.pairs.len(), &m));
                outcome.traced = cfg.trace.then_some(m);
            }
            ExperimentKind::Congestion { pair_counts, pair_seed } => {
                for (k, m) in congestion_sweep(&self.sim, graph, behaviours, pair_counts, *pair_seed)? {
                    outcome.rows.push(MetricsRow::new(&self.name, k, &m));
                }
            }
            ExperimentKind::Removal {
                pairs,
                pair_seed,
                strategies,
                fractions,
                at_day,
            } => {
                let cfg = with_pairs(*pairs, *pair_seed)?;
                for (s, f, m) in removal_sweep(&cfg, graph, behaviours, strategies, fractions, *at_day)? {
                    outcome
                        .rows
                        .push(MetricsRow::new(&self.name, *pairs, &m).with_removal(s.as_str(), f));
                }
            }
            ExperimentKind::Entropy { pairs, pair_seed, bins } => {
                let cfg = SimConfig {
                    trace: true,
                    ..with_pairs(*pairs, *pair_seed)?
                };
                let m = run(&cfg, graph, behaviours)?;
                let truth = ground_truth_moments(behaviours, cfg.days_per_month);
                outcome.entropy = Some(path_entropy_analysis(&m, &cfg.pairs, &truth, *bins)?);
                outcome.rows.push(MetricsRow::new(&self.name, *pairs, &m));
                outcome.traced = Some(m);
            }
        }
        Ok(outcome)
    }
}

/// Entropy analysis of saved trace records. Pairs are recovered from the
/// records themselves.
pub fn analyze_traces(
    records: Vec<MessageRecord>,
    behaviours: &[UploadBehaviour],
    days_per_month: u32,
    bins: usize,
) -> Result<EntropyReport> {
    let n_pairs = records.iter().map(|r| r.pair + 1).max().unwrap_or(0);
    let mut pairs: Vec<Option<(NodeId, NodeId)>> = vec![None; n_pairs];
    for r in &records {
        pairs[r.pair] = Some((r.sender, r.receiver));
    }
    let pairs: Vec<(NodeId, NodeId)> = pairs
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::NoData(format!("no records for pair {i}"))))
        .collect::<Result<_>>()?;
    let metrics = SimMetrics {
        messages: records,
        ..SimMetrics::default()
    };
    let truth = ground_truth_moments(behaviours, days_per_month);
    path_entropy_analysis(&metrics, &pairs, &truth, bins)
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    rows: &'a [MetricsRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy_distribution: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy_excluded_pairs: Option<usize>,
}

/// Writes `metrics.csv`, `summary.json` and, where available, `entropy.csv`
/// and `traces.jsonl` into `dir`. Returns the files written.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: &str| -> Result<BufWriter<File>> {
        let p = dir.join(name);
        let f = File::create(&p)?;
        written.push(p);
        Ok(BufWriter::new(f))
    };
    write_metrics_csv(&outcome.rows, create("metrics.csv")?)?;
    if let Some(e) = &outcome.entropy {
        write_entropy_csv(e, create("entropy.csv")?)?;
    }
    if let Some(m) = &outcome.traced {
        write_traces_jsonl(m, create("traces.jsonl")?)?;
    }
    let e = outcome.entropy.as_ref();
    let summary = Summary {
        name: &outcome.name,
        rows: &outcome.rows,
        entropy_median: e.and_then(|e| e.median),
        entropy_max: e.map(|e| e.max_entropy),
        entropy_distribution: e.map(|e| e.distribution.as_slice()),
        entropy_excluded_pairs: e.map(|e| e.excluded.len()),
    };
    let mut w = create("summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(std::io::Error::from)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    std::io::Write::flush(&mut w)?;
    Ok(written)
}

/// Reads a `traces.jsonl` file.
pub fn read_traces(path: &Path) -> Result<Vec<MessageRecord>> {
    crate::sim_engine::report::read_traces_jsonl(BufReader::new(File::open(path)?))
}
