//! One full experiment: sample (or load) the network, warm it up, run the
//! closed loop and the zero-control baseline from the same state, count
//! spikes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::init::initialize;
use crate::io::{write_controls, write_json, write_trace};
use crate::metrics::FiringCountReport;
use crate::model::{simulate, NetworkState, Trace};
use crate::mpc::{run_control, ControlRun};
use crate::netgen::generate_network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub n: usize,
    pub edges: usize,
    pub partition: [usize; 3],
    pub inhibitory: Vec<usize>,
    /// Network file the run was loaded from; `None` when sampled.
    pub file: Option<PathBuf>,
}

impl NetworkSummary {
    pub fn new(graph: &NetworkGraph, file: Option<&Path>) -> Self {
        Self {
            n: graph.n(),
            edges: graph.edges().len(),
            partition: graph.partition().sizes(),
            inhibitory: graph.inhibitory(),
            file: file.map(Path::to_path_buf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_secs: f64,
    pub mean_step_secs: f64,
    pub max_step_secs: f64,
    pub per_step_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub preset: Option<String>,
    pub seed: u64,
    pub network: NetworkSummary,
    pub controlled: FiringCountReport,
    pub baseline: Option<FiringCountReport>,
    /// Target module fired at least twice as often as the other one in both
    /// intervals.
    pub dominance: bool,
    /// Controlled objective strictly above the baseline's.
    pub improves_on_baseline: Option<bool>,
    /// Optimized horizon cost at every plant step.
    pub predicted_costs: Vec<f64>,
    pub config: ExperimentConfig,
    /// Wall-clock only; everything else in the report is deterministic.
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub graph: NetworkGraph,
    pub initial: NetworkState,
    pub controlled: ControlRun,
    pub baseline: Option<Trace>,
    pub report: RunReport,
}

/// Options that are not part of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub preset: Option<String>,
    /// Use this network instead of sampling one from `[network]`.
    pub network: Option<(NetworkGraph, PathBuf)>,
    pub no_control: bool,
    pub verbose: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Experiment> {
    let mut cfg = cfg.clone();
    if opts.no_control {
        cfg.optimizer.enabled = false;
    }
    cfg.validate()?;
    let (graph, file) = match opts.network {
        Some((g, path)) => {
            if g.n() != cfg.network.n || g.partition().sizes() != cfg.network.module_sizes {
                return Err(Error::config(format!(
                    "network file {} has n={} and blocks {:?}, config expects n={} and {:?}",
                    path.display(),
                    g.n(),
                    g.partition().sizes(),
                    cfg.network.n,
                    cfg.network.module_sizes
                )));
            }
            (g, Some(path))
        }
        None => (generate_network(&cfg.network, cfg.seed)?, None),
    };
    let initial = initialize(&graph, &cfg.model, &cfg.init, cfg.seed)?;

    let started = Instant::now();
    let controlled = run_control(
        &graph,
        &cfg.model,
        &initial,
        &cfg.mpc,
        &cfg.optimizer,
        cfg.seed,
        opts.verbose,
    )?;
    let total_secs = started.elapsed().as_secs_f64();

    let baseline = if cfg.output.baseline {
        let steps = controlled.trace.steps();
        Some(simulate(
            &initial,
            &vec![vec![0.0; graph.n()]; steps],
            &graph,
            &cfg.model,
        )?)
    } else {
        None
    };

    let count = |t: &Trace| {
        FiringCountReport::from_trace(t, graph.partition(), cfg.mpc.t_switch, cfg.mpc.t_end)
    };
    let controlled_counts = count(&controlled.trace)?;
    let baseline_counts = baseline.as_ref().map(count).transpose()?;

    let per_step: Vec<f64> = controlled.steps.iter().map(|s| s.elapsed_secs).collect();
    let timings = Timings {
        total_secs,
        mean_step_secs: if per_step.is_empty() {
            0.0
        } else {
            per_step.iter().sum::<f64>() / per_step.len() as f64
        },
        max_step_secs: per_step.iter().copied().fold(0.0, f64::max),
        per_step_secs: per_step,
    };
    let report = RunReport {
        preset: opts.preset,
        seed: cfg.seed,
        network: NetworkSummary::new(&graph, file.as_deref()),
        dominance: controlled_counts.counts.dominates(2),
        improves_on_baseline: baseline_counts
            .as_ref()
            .map(|b| controlled_counts.objective > b.objective),
        controlled: controlled_counts,
        baseline: baseline_counts,
        predicted_costs: controlled.steps.iter().map(|s| s.predicted_cost).collect(),
        config: cfg.clone(),
        timings,
    };
    Ok(Experiment {
        graph,
        initial,
        controlled,
        baseline,
        report,
    })
}

/// Write `trace.csv`, `control.csv`, `report.json` and, with a baseline,
/// `baseline_trace.csv` and `baseline_control.csv` into `dir`.
pub fn write_outputs(exp: &Experiment, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = &exp.report.config.model;
    let control_set = exp.graph.partition().control_set();
    write_trace(&exp.controlled.trace, params, dir.join("trace.csv"))?;
    write_controls(&exp.controlled.trace, control_set, dir.join("control.csv"))?;
    if let Some(b) = &exp.baseline {
        write_trace(b, params, dir.join("baseline_trace.csv"))?;
        write_controls(b, control_set, dir.join("baseline_control.csv"))?;
    }
    write_json(&exp.report, dir.join("report.json"))
}
