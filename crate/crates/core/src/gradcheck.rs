//! Reverse-mode gradient vs central finite differences on seeded random
//! plans and warm-up states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::init::initialize;
use crate::model::Synapse;
use crate::netgen::generate_network;
use crate::rng::{stream, Stream};
use crate::unfolding::{finite_diff_grad, grad_plan, unfold_forward, ControlPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub samples: usize,
    pub h: f64,
    pub tolerance: f64,
    /// Second, smaller finite-difference step used to separate truncation
    /// error of the reference from errors in the gradient.
    pub h_fine: f64,
    /// Plan entries are drawn uniformly from this range.
    pub plan_range: [f64; 2],
    /// Skip a sample whose rollout has a potential within this distance of
    /// the firing threshold.
    pub threshold_margin: f64,
    /// Skip a sample whose rollout has a module potential change this close
    /// to zero.
    pub kink_margin: f64,
    pub max_skip_fraction: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            h: 1e-3,
            tolerance: 1e-4,
            h_fine: 1e-5,
            plan_range: [0.0, 20.0],
            threshold_margin: 1.0,
            kink_margin: 1e-6,
            max_skip_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub synapse: Synapse,
    pub samples: usize,
    pub checked: usize,
    pub skipped: usize,
    pub skip_fraction: f64,
    /// Largest `max|g - fd| / max|fd|` over checked samples.
    pub max_rel_error: f64,
    pub worst_sample: Option<usize>,
    /// Checked samples within `tolerance` at `h`.
    pub within_tolerance: usize,
    /// Largest relative error against the `h_fine` reference.
    pub max_rel_error_fine: f64,
    /// Fraction of gradient entries, over all samples, that are exactly 0.
    pub zero_fraction: f64,
    pub passed: bool,
}

/// Normwise relative error; 0 when both vectors vanish.
pub fn relative_error(grad: &[f64], reference: &[f64]) -> f64 {
    let diff = grad
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (g, r)| m.max((g - r).abs()));
    let scale = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Run the check on the network and warm-up of `cfg`, with the synapse model
/// overridden by `synapse`.
pub fn gradcheck(
    cfg: &ExperimentConfig,
    gc: &GradcheckConfig,
    synapse: Synapse,
) -> Result<GradcheckReport> {
    cfg.validate()?;
    let [lo, hi] = gc.plan_range;
    if !(lo <= hi) || !(gc.h > 0.0) || !(gc.h_fine > 0.0) {
        return Err(Error::config(
            "gradcheck needs plan_range low <= high and positive steps",
        ));
    }
    let mut params = cfg.model;
    params.synapse = synapse;
    let graph = generate_network(&cfg.network, cfg.seed)?;
    let columns = graph.partition().control_set();
    let horizon = cfg.mpc.horizon;
    let schedule = cfg.mpc.phases();
    let last_start = cfg.mpc.steps(params.dt).max(1) - 1;
    let mut rng = stream(cfg.seed, Stream::PlanSamples);

    let mut checked = 0;
    let mut skipped = 0;
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut within = 0;
    let mut max_fine = 0.0f64;
    let mut zeros = 0usize;
    let mut entries = 0usize;
    for s in 0..gc.samples {
        let state0 = initialize(&graph, &params, &cfg.init, cfg.seed.wrapping_add(s as u64))?;
        let start_time = rng.random_range(0..=last_start);
        let mut plan = ControlPlan::zeros(horizon, columns);
        for x in plan.values_mut() {
            *x = if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            };
        }
        let (tape, _) = unfold_forward(&state0, &plan, &graph, &params, &schedule, start_time)?;
        let grad = grad_plan(&tape, &graph, &params)?;
        zeros += grad.values().iter().filter(|&&g| g == 0.0).count();
        entries += grad.values().len();

        let (threshold_gap, kink_gap) = tape.boundary_margins(graph.partition(), &params);
        if threshold_gap < gc.threshold_margin || kink_gap < gc.kink_margin {
            skipped += 1;
            continue;
        }
        let fd = finite_diff_grad(&state0, &plan, &graph, &params, &schedule, start_time, gc.h)?;
        let rel = relative_error(grad.values(), fd.values());
        let fine = finite_diff_grad(
            &state0, &plan, &graph, &params, &schedule, start_time, gc.h_fine,
        )?;
        max_fine = max_fine.max(relative_error(grad.values(), fine.values()));
        checked += 1;
        if rel <= gc.tolerance {
            within += 1;
        }
        if worst.is_none() || rel > max_rel {
            max_rel = rel;
            worst = Some(s);
        }
    }
    let skip_fraction = if gc.samples == 0 {
        0.0
    } else {
        skipped as f64 / gc.samples as f64
    };
    Ok(GradcheckReport {
        synapse,
        samples: gc.samples,
        checked,
        skipped,
        skip_fraction,
        max_rel_error: max_rel,
        worst_sample: worst,
        within_tolerance: within,
        max_rel_error_fine: max_fine,
        zero_fraction: if entries == 0 {
            0.0
        } else {
            zeros as f64 / entries as f64
        },
        passed: checked > 0 && max_rel <= gc.tolerance && skip_fraction <= gc.max_skip_fraction,
    })
}
