//! Discrete-time Izhikevich network dynamics.
//!
//! One forward-Euler step per `dt`, with the reset applied as a branch of the
//! update itself: a neuron whose potential is at or above the firing
//! threshold at step `k` takes the reset branch at `k` instead of the Euler
//! update. Synaptic coupling goes through a sigmoid gate on the presynaptic
//! potential so that the rollout stays differentiable in the control input.
//!
//! All neurons are advanced synchronously from the step-`k` state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NetworkGraph, NeuronKind};

/// Presynaptic gating used when computing internal currents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Synapse {
    /// Logistic gate centred on `sigmoid_center` with steepness `sigma`.
    #[default]
    Soft,
    /// Indicator of `v >= firing_threshold`. Its derivative is zero almost
    /// everywhere; used to demonstrate gradient loss.
    Hard,
}

/// Neuron and synapse constants shared by every neuron in the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    pub a: f64,
    pub b: f64,
    /// Reset potential (mV).
    pub c: f64,
    pub d: f64,
    /// Current injected by an active excitatory neuron (mV scale).
    pub i_ex: f64,
    /// Current injected by an active inhibitory neuron; negative.
    pub i_in: f64,
    pub sigma: f64,
    pub firing_threshold: f64,
    pub sigmoid_center: f64,
    /// Time step in ms.
    pub dt: f64,
    pub synapse: Synapse,
}

impl Default for NeuronParams {
    /// Fast-spiking neurons, 1 ms step.
    fn default() -> Self {
        Self {
            a: 0.1,
            b: 0.2,
            c: -65.0,
            d: 2.0,
            i_ex: 15.0,
            i_in: -3.0,
            sigma: 0.38,
            firing_threshold: 30.0,
            sigmoid_center: 20.0,
            dt: 1.0,
            synapse: Synapse::Soft,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.c,
            self.d,
            self.i_ex,
            self.i_in,
            self.sigma,
            self.firing_threshold,
            self.sigmoid_center,
            self.dt,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("neuron parameters must be finite"));
        }
        if self.dt <= 0.0 {
            return Err(Error::config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.i_ex <= 0.0 {
            return Err(Error::config(format!(
                "i_ex must be positive, got {}",
                self.i_ex
            )));
        }
        if self.i_in >= 0.0 {
            return Err(Error::config(format!(
                "i_in must be negative, got {}",
                self.i_in
            )));
        }
        Ok(())
    }

    /// Synaptic current magnitude emitted by a neuron of the given kind.
    pub fn weight(&self, kind: NeuronKind) -> f64 {
        match kind {
            NeuronKind::Excitatory => self.i_ex,
            NeuronKind::Inhibitory => self.i_in,
        }
    }

    /// Potential drop applied by the reset branch.
    pub fn reset_drop(&self) -> f64 {
        self.firing_threshold - self.c
    }
}

/// Logistic soft threshold `1 / (1 + exp(-sigma (v - center)))`.
pub fn soft_threshold(v: f64, params: &NeuronParams) -> f64 {
    1.0 / (1.0 + (-params.sigma * (v - params.sigmoid_center)).exp())
}

/// Presynaptic gate value under the configured synapse model.
pub fn synaptic_gate(v: f64, params: &NeuronParams) -> f64 {
    match params.synapse {
        Synapse::Soft => soft_threshold(v, params),
        Synapse::Hard => {
            if v >= params.firing_threshold {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// d(gate)/dv given the gate value already evaluated at `v`.
pub(crate) fn synaptic_gate_slope(gate: f64, params: &NeuronParams) -> f64 {
    match params.synapse {
        Synapse::Soft => params.sigma * gate * (1.0 - gate),
        Synapse::Hard => 0.0,
    }
}

/// Membrane potentials and recovery variables of all neurons at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl NetworkState {
    pub fn new(v: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if v.len() != u.len() {
            return Err(Error::config(format!(
                "state vectors differ in length: v={}, u={}",
                v.len(),
                u.len()
            )));
        }
        Ok(Self { v, u })
    }

    /// Every neuron at `v = c`, `u = 0`.
    pub fn resting(n: usize, params: &NeuronParams) -> Self {
        Self {
            v: vec![params.c; n],
            u: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.u).all(|x| x.is_finite())
    }

    pub fn firing_mask(&self, params: &NeuronParams) -> FiringMask {
        FiringMask(
            self.v
                .iter()
                .map(|&v| v >= params.firing_threshold)
                .collect(),
        )
    }
}

/// `fired[i]` is true when neuron `i` is at or above the firing threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringMask(pub Vec<bool>);

impl FiringMask {
    pub fn fired(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|f| **f).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sum of gated synaptic currents arriving at neuron `i`.
pub fn internal_current(
    state: &NetworkState,
    graph: &NetworkGraph,
    i: usize,
    params: &NeuronParams,
) -> f64 {
    graph
        .in_neighbors(i)
        .iter()
        .map(|&j| synaptic_gate(state.v[j], params) * params.weight(graph.kind(j)))
        .sum()
}

/// Single-neuron update. Below threshold: Euler step of the Izhikevich
/// model driven by `i_total`. At or above threshold: `v - (30 - c)`,
/// `u + d`, ignoring the input current.
pub fn step_neuron(v: f64, u: f64, i_total: f64, params: &NeuronParams) -> (f64, f64) {
    if v < params.firing_threshold {
        let dv = 0.04 * v * v + 5.0 * v + 140.0 - u + i_total;
        let du = params.a * (params.b * v - u);
        (v + dv * params.dt, u + du * params.dt)
    } else {
        (v - params.reset_drop(), u + params.d)
    }
}

/// Advance the whole network one step. The returned mask describes the
/// *input* state. Control must be zero on every neuron outside the control
/// set.
pub fn step_network(
    state: &NetworkState,
    control: &[f64],
    graph: &NetworkGraph,
    params: &NeuronParams,
) -> Result<(NetworkState, FiringMask)> {
    check_control_row(control, graph)?;
    step_network_unconstrained(state, control, graph, params)
}

/// As [`step_network`] but accepts current on any neuron. Used for the
/// warm-up phase, where every neuron is driven.
pub fn step_network_unconstrained(
    state: &NetworkState,
    control: &[f64],
    graph: &NetworkGraph,
    params: &NeuronParams,
) -> Result<(NetworkState, FiringMask)> {
    let n = graph.n();
    if state.len() != n || state.u.len() != n {
        return Err(Error::config(format!(
            "state has {} neurons, network has {n}",
            state.len()
        )));
    }
    if control.len() != n {
        return Err(Error::config(format!(
            "control row has {} entries, network has {n}",
            control.len()
        )));
    }
    let mut gates = vec![0.0; n];
    Ok(advance(state, control, graph, params, &mut gates))
}

pub(crate) fn check_control_row(control: &[f64], graph: &NetworkGraph) -> Result<()> {
    if control.len() != graph.n() {
        return Err(Error::config(format!(
            "control row has {} entries, network has {}",
            control.len(),
            graph.n()
        )));
    }
    let partition = graph.partition();
    if let Some((i, x)) = control
        .iter()
        .enumerate()
        .find(|&(i, &x)| x != 0.0 && !partition.is_actuated(i))
    {
        return Err(Error::contract(format!(
            "nonzero control {x} on non-actuated neuron {i}"
        )));
    }
    Ok(())
}

/// Shapes are assumed checked. `gates` receives the presynaptic gate of every
/// neuron at the input state.
pub(crate) fn advance(
    state: &NetworkState,
    control: &[f64],
    graph: &NetworkGraph,
    params: &NeuronParams,
    gates: &mut [f64],
) -> (NetworkState, FiringMask) {
    let n = graph.n();
    for (g, &v) in gates.iter_mut().zip(&state.v) {
        *g = synaptic_gate(v, params);
    }
    let mut next = NetworkState {
        v: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
    };
    for i in 0..n {
        let internal: f64 = graph
            .in_neighbors(i)
            .iter()
            .map(|&j| gates[j] * params.weight(graph.kind(j)))
            .sum();
        let (v, u) = step_neuron(state.v[i], state.u[i], control[i] + internal, params);
        next.v.push(v);
        next.u.push(u);
    }
    (next, state.firing_mask(params))
}

/// Time-indexed record of a rollout: `states[k]` for `k = 0..=K`, and for
/// `k < K` the mask of `states[k]` and the control row applied at `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub states: Vec<NetworkState>,
    pub masks: Vec<FiringMask>,
    pub controls: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(initial: NetworkState, dt: f64) -> Self {
        Self {
            dt,
            states: vec![initial],
            masks: Vec::new(),
            controls: Vec::new(),
        }
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.masks.len()
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn last_state(&self) -> &NetworkState {
        self.states
            .last()
            .expect("trace always holds the initial state")
    }

    pub(crate) fn push(&mut self, control: Vec<f64>, mask: FiringMask, next: NetworkState) {
        self.controls.push(control);
        self.masks.push(mask);
        self.states.push(next);
    }
}

/// Open-loop rollout: apply `controls[k]` (full length-`n` rows) at step `k`.
pub fn simulate(
    initial: &NetworkState,
    controls: &[Vec<f64>],
    graph: &NetworkGraph,
    params: &NeuronParams,
) -> Result<Trace> {
    let mut trace = Trace::new(initial.clone(), params.dt);
    for row in controls {
        let (next, mask) = step_network(trace.last_state(), row, graph, params)?;
        trace.push(row.clone(), mask, next);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ModulePartition;

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    fn single() -> NetworkGraph {
        NetworkGraph::new(
            1,
            vec![],
            vec![NeuronKind::Excitatory],
            ModulePartition::contiguous([1, 0, 0]),
        )
        .unwrap()
    }

    fn chain(kind: NeuronKind) -> NetworkGraph {
        NetworkGraph::new(
            2,
            vec![(0, 1)],
            vec![kind, NeuronKind::Excitatory],
            ModulePartition::contiguous([1, 1, 0]),
        )
        .unwrap()
    }

    #[test]
    fn soft_threshold_values() {
        let p = NeuronParams::default();
        assert_eq!(soft_threshold(20.0, &p), 0.5);
        assert!(rel_eq(
            soft_threshold(30.0, &p),
            1.0 / (1.0 + (-3.8f64).exp())
        ));
        assert_eq!(soft_threshold(1e6, &p), 1.0);
        assert_eq!(soft_threshold(-1e6, &p), 0.0);
    }

    #[test]
    fn internal_current_examples() {
        let p = NeuronParams::default();
        let s = NetworkState::new(vec![20.0, -65.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(
            internal_current(&s, &chain(NeuronKind::Excitatory), 0, &p),
            0.0
        );
        assert_eq!(
            internal_current(&s, &chain(NeuronKind::Excitatory), 1, &p),
            7.5
        );
        assert_eq!(
            internal_current(&s, &chain(NeuronKind::Inhibitory), 1, &p),
            -1.5
        );
    }

    #[test]
    fn euler_branch() {
        let p = NeuronParams::default();
        let (v, u) = step_neuron(-65.0, 0.0, 0.0, &p);
        assert!(rel_eq(v, -81.0));
        assert!(rel_eq(u, -1.3));
    }

    #[test]
    fn reset_branch_is_literal() {
        let p = NeuronParams::default();
        assert_eq!(step_neuron(30.0, 5.0, 123.0, &p), (-65.0, 7.0));
        assert_eq!(step_neuron(35.0, 0.0, 0.0, &p).0, -60.0);
    }

    #[test]
    fn step_network_single_neuron() {
        let p = NeuronParams::default();
        let g = single();
        let (s, m) = step_network(&NetworkState::resting(1, &p), &[0.0], &g, &p).unwrap();
        assert!(rel_eq(s.v[0], -81.0) && rel_eq(s.u[0], -1.3));
        assert_eq!(m.0, vec![false]);
    }

    #[test]
    fn chain_presynaptic_at_threshold() {
        let p = NeuronParams::default();
        let g = chain(NeuronKind::Excitatory);
        let s = NetworkState::new(vec![30.0, -65.0], vec![0.0, 0.0]).unwrap();
        let (next, mask) = step_network(&s, &[0.0, 0.0], &g, &p).unwrap();
        let expect = step_neuron(-65.0, 0.0, soft_threshold(30.0, &p) * 15.0, &p);
        assert_eq!((next.v[1], next.u[1]), expect);
        assert_eq!(mask.0, vec![true, false]);
    }

    #[test]
    fn all_above_threshold_resets_everything() {
        let p = NeuronParams::default();
        let g = chain(NeuronKind::Excitatory);
        let s = NetworkState::new(vec![31.0, 90.0], vec![1.0, 2.0]).unwrap();
        let (next, mask) = step_network(&s, &[50.0, 0.0], &g, &p).unwrap();
        assert_eq!(mask.count(), 2);
        assert_eq!(next.v, vec![31.0 - 95.0, 90.0 - 95.0]);
        assert_eq!(next.u, vec![3.0, 4.0]);
    }

    #[test]
    fn control_contract() {
        let p = NeuronParams::default();
        let g = chain(NeuronKind::Excitatory);
        let s = NetworkState::resting(2, &p);
        assert!(matches!(
            step_network(&s, &[0.0, 1.0], &g, &p),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            step_network(&s, &[0.0], &g, &p),
            Err(Error::Config(_))
        ));
        assert!(step_network_unconstrained(&s, &[0.0, 1.0], &g, &p).is_ok());
    }

    #[test]
    fn simulate_matches_scalar_recurrence() {
        let p = NeuronParams::default();
        let g = single();
        let trace = simulate(&NetworkState::resting(1, &p), &vec![vec![0.0]; 10], &g, &p).unwrap();
        assert_eq!(trace.states.len(), 11);
        let (mut v, mut u) = (-65.0f64, 0.0f64);
        for k in 0..10 {
            // Euler step written out by hand
            let (nv, nu) = if v < 30.0 {
                (
                    v + 0.04 * v * v + 5.0 * v + 140.0 - u,
                    u + 0.1 * (0.2 * v - u),
                )
            } else {
                (v - 95.0, u + 2.0)
            };
            v = nv;
            u = nu;
            assert!(rel_eq(trace.states[k + 1].v[0], v));
            assert!(rel_eq(trace.states[k + 1].u[0], u));
        }
    }

    #[test]
    fn simulate_empty_and_unit() {
        let p = NeuronParams::default();
        let g = single();
        let s0 = NetworkState::resting(1, &p);
        let t0 = simulate(&s0, &[], &g, &p).unwrap();
        assert_eq!(t0.states, vec![s0.clone()]);
        assert_eq!(t0.steps(), 0);
        let t1 = simulate(&s0, &[vec![3.0]], &g, &p).unwrap();
        let (s1, m1) = step_network(&s0, &[3.0], &g, &p).unwrap();
        assert_eq!(t1.states[1], s1);
        assert_eq!(t1.masks[0], m1);
    }

    #[test]
    fn hard_gate_is_indicator() {
        let p = NeuronParams {
            synapse: Synapse::Hard,
            ..NeuronParams::default()
        };
        assert_eq!(synaptic_gate(29.9, &p), 0.0);
        assert_eq!(synaptic_gate(30.0, &p), 1.0);
        assert_eq!(synaptic_gate_slope(1.0, &p), 0.0);
    }

    #[test]
    fn param_validation() {
        assert!(NeuronParams::default().validate().is_ok());
        let bad = NeuronParams {
            i_in: 3.0,
            ..NeuronParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = NeuronParams {
            dt: 0.0,
            ..NeuronParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
