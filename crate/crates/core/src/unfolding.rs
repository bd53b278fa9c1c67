//! Unrolled `T`-step prediction, phase-dependent stage costs and the exact
//! reverse pass that gives d(cost)/d(control plan).
//!
//! Differentiation conventions:
//! - the branch (Euler vs reset) taken at each neuron/step is frozen as
//!   recorded on the tape;
//! - firing indicators in the cost are constants;
//! - the reset branch passes no gradient to the input current;
//! - `d|x|/dx = sign(x)`, with 0 at `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ModulePartition, NetworkGraph};
use crate::model::{advance, synaptic_gate_slope, FiringMask, NetworkState, NeuronParams};

/// Control currents for the actuated neurons over a horizon, row-major
/// `horizon x columns.len()`. Column `c` drives neuron `columns[c]`; every
/// other neuron receives zero control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    columns: Vec<usize>,
    horizon: usize,
    values: Vec<f64>,
}

impl ControlPlan {
    pub fn zeros(horizon: usize, columns: &[usize]) -> Self {
        Self {
            columns: columns.to_vec(),
            horizon,
            values: vec![0.0; horizon * columns.len()],
        }
    }

    pub fn from_rows(columns: &[usize], rows: &[Vec<f64>]) -> Result<Self> {
        let width = columns.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::config(format!(
                "plan row has {} entries, expected {width}",
                bad.len()
            )));
        }
        Ok(Self {
            columns: columns.to_vec(),
            horizon: rows.len(),
            values: rows.concat(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn get(&self, step: usize, col: usize) -> f64 {
        self.values[step * self.width() + col]
    }

    pub fn set(&mut self, step: usize, col: usize, x: f64) {
        let w = self.width();
        self.values[step * w + col] = x;
    }

    pub fn row(&self, step: usize) -> &[f64] {
        let w = self.width();
        &self.values[step * w..(step + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row `step` expanded to a length-`n` network control vector.
    pub fn full_row(&self, step: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill_row(step, &mut out);
        out
    }

    fn fill_row(&self, step: usize, out: &mut [f64]) {
        for (c, &i) in self.columns.iter().enumerate() {
            out[i] = self.get(step, c);
        }
    }

    /// Drop the first row and append a zero row (receding-horizon warm start).
    pub fn shifted(&self) -> Self {
        let w = self.width();
        let mut values = Vec::with_capacity(self.values.len());
        if self.horizon > 0 {
            values.extend_from_slice(&self.values[w..]);
            values.extend(std::iter::repeat_n(0.0, w));
        }
        Self {
            columns: self.columns.clone(),
            horizon: self.horizon,
            values,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Which module the stage cost pushes to fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostPhase {
    PromoteModule1,
    PromoteModule2,
}

/// Switches the cost from promoting module 1 to promoting module 2 at
/// `t_switch` (ms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub t_switch: f64,
}

impl PhaseSchedule {
    pub fn phase_at(&self, step: usize, dt: f64) -> CostPhase {
        if (step as f64) * dt < self.t_switch {
            CostPhase::PromoteModule1
        } else {
            CostPhase::PromoteModule2
        }
    }
}

/// Everything recorded during a forward unroll that the reverse pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTape {
    pub start_time: usize,
    pub columns: Vec<usize>,
    /// `horizon + 1` states.
    pub states: Vec<NetworkState>,
    /// Mask of `states[l]`; also the branch taken at step `l` (true = reset).
    pub masks: Vec<FiringMask>,
    /// Presynaptic gate of every neuron at `states[l]`.
    pub gates: Vec<Vec<f64>>,
    pub phases: Vec<CostPhase>,
    pub stage_costs: Vec<f64>,
}

impl RolloutTape {
    pub fn horizon(&self) -> usize {
        self.masks.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.stage_costs.iter().sum()
    }

    /// Closest approach of any recorded potential to the firing threshold,
    /// and the smallest |dv| of any neuron entering the stage costs.
    pub fn boundary_margins(
        &self,
        partition: &ModulePartition,
        params: &NeuronParams,
    ) -> (f64, f64) {
        let threshold_gap = self
            .states
            .iter()
            .flat_map(|s| s.v.iter())
            .fold(f64::INFINITY, |m, &v| {
                m.min((v - params.firing_threshold).abs())
            });
        let mut kink_gap = f64::INFINITY;
        for w in self.states.windows(2) {
            for &i in partition.module1().iter().chain(partition.module2()) {
                kink_gap = kink_gap.min((w[1].v[i] - w[0].v[i]).abs());
            }
        }
        (threshold_gap, kink_gap)
    }
}

fn promoted_and_suppressed(phase: CostPhase, partition: &ModulePartition) -> (&[usize], &[usize]) {
    match phase {
        CostPhase::PromoteModule1 => (partition.module1(), partition.module2()),
        CostPhase::PromoteModule2 => (partition.module2(), partition.module1()),
    }
}

/// Cost of one transition `state_k -> state_k1`.
///
/// The promoted module pays `(1 - fired) * (30 - c - dv)` per neuron, so
/// large upward potential changes are rewarded; the suppressed module pays
/// `|dv|`.
pub fn stage_cost(
    state_k: &NetworkState,
    state_k1: &NetworkState,
    mask_k: &FiringMask,
    phase: CostPhase,
    partition: &ModulePartition,
    params: &NeuronParams,
) -> f64 {
    let (promote, suppress) = promoted_and_suppressed(phase, partition);
    let drop = params.reset_drop();
    let mut cost = 0.0;
    for &i in promote {
        if !mask_k.fired(i) {
            cost += drop - (state_k1.v[i] - state_k.v[i]);
        }
    }
    for &j in suppress {
        cost += (state_k1.v[j] - state_k.v[j]).abs();
    }
    cost
}

/// Roll the prediction model forward `plan.horizon()` steps from `state0`
/// at absolute step `start_time`, recording a tape. Returns the tape and the
/// total cost.
pub fn unfold_forward(
    state0: &NetworkState,
    plan: &ControlPlan,
    graph: &NetworkGraph,
    params: &NeuronParams,
    schedule: &PhaseSchedule,
    start_time: usize,
) -> Result<(RolloutTape, f64)> {
    let n = graph.n();
    if plan.horizon() == 0 {
        return Err(Error::config("plan horizon must be at least 1"));
    }
    if plan.columns() != graph.partition().control_set() {
        return Err(Error::config(
            "plan columns do not match the network's control set",
        ));
    }
    if state0.len() != n || state0.u.len() != n {
        return Err(Error::config(format!(
            "state has {} neurons, network has {n}",
            state0.len()
        )));
    }
    let horizon = plan.horizon();
    let mut tape = RolloutTape {
        start_time,
        columns: plan.columns().to_vec(),
        states: Vec::with_capacity(horizon + 1),
        masks: Vec::with_capacity(horizon),
        gates: Vec::with_capacity(horizon),
        phases: Vec::with_capacity(horizon),
        stage_costs: Vec::with_capacity(horizon),
    };
    tape.states.push(state0.clone());
    let mut control = vec![0.0; n];
    for l in 0..horizon {
        plan.fill_row(l, &mut control);
        let mut gates = vec![0.0; n];
        let (next, mask) = advance(&tape.states[l], &control, graph, params, &mut gates);
        let phase = schedule.phase_at(start_time + l, params.dt);
        let cost = stage_cost(
            &tape.states[l],
            &next,
            &mask,
            phase,
            graph.partition(),
            params,
        );
        tape.states.push(next);
        tape.masks.push(mask);
        tape.gates.push(gates);
        tape.phases.push(phase);
        tape.stage_costs.push(cost);
    }
    let total = tape.total_cost();
    Ok((tape, total))
}

/// Reverse pass over a tape: gradient of the total cost with respect to
/// every plan entry, shaped like the plan.
pub fn grad_plan(
    tape: &RolloutTape,
    graph: &NetworkGraph,
    params: &NeuronParams,
) -> Result<ControlPlan> {
    let n = graph.n();
    let horizon = tape.horizon();
    if tape.states.len() != horizon + 1
        || tape.gates.len() != horizon
        || tape.phases.len() != horizon
        || tape.states.iter().any(|s| s.len() != n)
        || tape.gates.iter().any(|g| g.len() != n)
        || tape.masks.iter().any(|m| m.len() != n)
    {
        return Err(Error::Consistency(
            "tape shape does not match the network".into(),
        ));
    }
    if tape.columns != graph.partition().control_set() {
        return Err(Error::Consistency(
            "tape control columns do not match the network's control set".into(),
        ));
    }

    let partition = graph.partition();
    // adjoints of v and u at every recorded step
    let mut adj_v = vec![vec![0.0; n]; horizon + 1];
    let mut adj_u = vec![vec![0.0; n]; horizon + 1];

    // direct partials of the stage costs
    for l in 0..horizon {
        let (promote, suppress) = promoted_and_suppressed(tape.phases[l], partition);
        for &i in promote {
            if !tape.masks[l].fired(i) {
                adj_v[l + 1][i] -= 1.0;
                adj_v[l][i] += 1.0;
            }
        }
        for &j in suppress {
            let dv = tape.states[l + 1].v[j] - tape.states[l].v[j];
            let s = sign(dv);
            adj_v[l + 1][j] += s;
            adj_v[l][j] -= s;
        }
    }

    let (dt, a, b) = (params.dt, params.a, params.b);
    let mut grad = ControlPlan::zeros(horizon, &tape.columns);
    let mut adj_input = vec![0.0; n];
    for l in (0..horizon).rev() {
        let state = &tape.states[l];
        let (next_v, rest) = adj_v.split_at_mut(l + 1);
        let (gv_next, gv) = (&rest[0], &mut next_v[l]);
        let (next_u, rest_u) = adj_u.split_at_mut(l + 1);
        let (gu_next, gu) = (&rest_u[0], &mut next_u[l]);

        for i in 0..n {
            if tape.masks[l].fired(i) {
                adj_input[i] = 0.0;
                gv[i] += gv_next[i];
                gu[i] += gu_next[i];
            } else {
                let v = state.v[i];
                adj_input[i] = gv_next[i] * dt;
                gv[i] += gv_next[i] * (1.0 + (0.08 * v + 5.0) * dt) + gu_next[i] * a * b * dt;
                gu[i] += -gv_next[i] * dt + gu_next[i] * (1.0 - a * dt);
            }
        }
        for (c, &i) in tape.columns.iter().enumerate() {
            grad.set(l, c, adj_input[i]);
        }
        // synaptic coupling: I_i depends on gate(v_j) for each in-neighbor j
        for i in 0..n {
            if adj_input[i] == 0.0 {
                continue;
            }
            for &j in graph.in_neighbors(i) {
                let slope = synaptic_gate_slope(tape.gates[l][j], params);
                gv[j] += adj_input[i] * slope * params.weight(graph.kind(j));
            }
        }
    }
    Ok(grad)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Central differences of [`unfold_forward`]'s cost, entry by entry.
pub fn finite_diff_grad(
    state0: &NetworkState,
    plan: &ControlPlan,
    graph: &NetworkGraph,
    params: &NeuronParams,
    schedule: &PhaseSchedule,
    start_time: usize,
    h: f64,
) -> Result<ControlPlan> {
    if !(h > 0.0) {
        return Err(Error::config(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut grad = ControlPlan::zeros(plan.horizon(), plan.columns());
    let mut probe = plan.clone();
    for k in 0..plan.values().len() {
        let x = plan.values()[k];
        probe.values_mut()[k] = x + h;
        let (_, up) = unfold_forward(state0, &probe, graph, params, schedule, start_time)?;
        probe.values_mut()[k] = x - h;
        let (_, down) = unfold_forward(state0, &probe, graph, params, schedule, start_time)?;
        probe.values_mut()[k] = x;
        grad.values_mut()[k] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}
