//! Receding-horizon loop: observe the plant, optimize a plan over the
//! horizon, apply its first row, advance one step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::{step_network, FiringMask, NetworkState, NeuronParams, Trace};
use crate::optimizer::{optimize_multistart, HorizonProblem, OptimizerConfig};
use crate::unfolding::{ControlPlan, PhaseSchedule};

/// `[mpc]` section. Times in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub t_switch: f64,
    pub t_end: f64,
    pub warm_start: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            t_switch: 10.0,
            t_end: 20.0,
            warm_start: true,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        // t_end = 0 is the degenerate empty run
        if self.t_end == 0.0 {
            return Ok(());
        }
        if !(0.0 < self.t_switch && self.t_switch < self.t_end) || !self.t_end.is_finite() {
            return Err(Error::config(format!(
                "need 0 < t_switch < t_end, got t_switch={} t_end={}",
                self.t_switch, self.t_end
            )));
        }
        Ok(())
    }

    pub fn phases(&self) -> PhaseSchedule {
        PhaseSchedule {
            t_switch: self.t_switch,
        }
    }

    /// Number of plant steps `k` with `k * dt < t_end`.
    pub fn steps(&self, dt: f64) -> usize {
        let mut k = (self.t_end / dt).floor().max(0.0) as usize;
        while (k as f64) * dt < self.t_end {
            k += 1;
        }
        while k > 0 && ((k - 1) as f64) * dt >= self.t_end {
            k -= 1;
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    /// Full length-`n` control row applied to the plant.
    pub applied: Vec<f64>,
    pub next_state: NetworkState,
    pub mask: FiringMask,
    pub plan: ControlPlan,
    pub predicted_cost: f64,
    pub history: Vec<f64>,
    pub elapsed_secs: f64,
}

/// One closed-loop step at plant time `k`.
#[allow(clippy::too_many_arguments)]
pub fn mpc_step(
    plant_state: &NetworkState,
    graph: &NetworkGraph,
    params: &NeuronParams,
    cfg: &MpcConfig,
    opt: &OptimizerConfig,
    k: usize,
    prev_plan: Option<&ControlPlan>,
    seed: u64,
) -> Result<MpcStep> {
    if (k as f64) * params.dt >= cfg.t_end {
        return Err(Error::contract(format!(
            "step {k} is at or beyond t_end={} ms",
            cfg.t_end
        )));
    }
    let started = Instant::now();
    let columns = graph.partition().control_set();
    let init = match prev_plan {
        Some(prev)
            if cfg.warm_start && prev.horizon() == cfg.horizon && prev.columns() == columns =>
        {
            prev.shifted()
        }
        _ => ControlPlan::zeros(cfg.horizon, columns),
    };
    let phases = cfg.phases();
    let problem = HorizonProblem {
        state0: plant_state,
        graph,
        params,
        phases: &phases,
        start_time: k,
    };
    let (plan, predicted_cost, history) = if opt.enabled && !columns.is_empty() {
        let r = optimize_multistart(&problem, opt, &init, seed)?;
        (r.plan, r.cost, r.history)
    } else {
        let zero = ControlPlan::zeros(cfg.horizon, columns);
        let c = problem.cost(&zero)?;
        (zero, c, vec![c])
    };
    let applied = plan.full_row(0, graph.n());
    let (next_state, mask) = step_network(plant_state, &applied, graph, params)?;
    Ok(MpcStep {
        applied,
        next_state,
        mask,
        plan,
        predicted_cost,
        history,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub predicted_cost: f64,
    pub history: Vec<f64>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRun {
    pub trace: Trace,
    pub steps: Vec<StepLog>,
}

/// Closed loop from `initial` until `t_end`.
pub fn run_control(
    graph: &NetworkGraph,
    params: &NeuronParams,
    initial: &NetworkState,
    cfg: &MpcConfig,
    opt: &OptimizerConfig,
    seed: u64,
    verbose: bool,
) -> Result<ControlRun> {
    params.validate()?;
    cfg.validate()?;
    opt.validate()?;
    let mut trace = Trace::new(initial.clone(), params.dt);
    let mut logs = Vec::new();
    let mut prev: Option<ControlPlan> = None;
    let total = cfg.steps(params.dt);
    for k in 0..total {
        let step = mpc_step(
            trace.last_state(),
            graph,
            params,
            cfg,
            opt,
            k,
            prev.as_ref(),
            seed,
        )?;
        if verbose {
            eprintln!(
                "step {:>3}/{total}  t={:>6.1} ms  predicted cost {:>10.3}  fired {:>2}  {:.3}s",
                k + 1,
                k as f64 * params.dt,
                step.predicted_cost,
                step.mask.count(),
                step.elapsed_secs
            );
        }
        logs.push(StepLog {
            step: k,
            predicted_cost: step.predicted_cost,
            history: step.history,
            elapsed_secs: step.elapsed_secs,
        });
        trace.push(step.applied, step.mask, step.next_state);
        prev = Some(step.plan);
    }
    Ok(ControlRun { trace, steps: logs })
}
