//! Temporal deep-unfolding model predictive control of modular Izhikevich
//! networks.
//!
//! A control module injects current so that two other modules, which are
//! never actuated directly, swap which one fires more at a chosen time. The
//! controller unrolls the discrete network dynamics over a short horizon,
//! differentiates the rollout cost with respect to the control currents, and
//! trains the currents with Adam before applying the first step.

// `!(a <= b)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod io;
pub mod metrics;
pub mod model;
pub mod mpc;
pub mod netgen;
pub mod optimizer;
pub mod rng;
pub mod unfolding;

pub use config::{load_config, ExperimentConfig, OutputConfig, Preset};
pub use error::{Error, Result};
pub use experiment::{run_experiment, write_outputs, Experiment, RunOptions, RunReport};
pub use gradcheck::{gradcheck, GradcheckConfig, GradcheckReport};
pub use graph::{ModulePartition, NetworkGraph, NeuronKind};
pub use init::{initialize, InitConfig};
pub use io::{read_json, read_trace, write_controls, write_json, write_trace};
pub use metrics::{firing_count, FiringCountReport, FiringCounts};
pub use model::{
    internal_current, simulate, soft_threshold, step_network, step_neuron, FiringMask,
    NetworkState, NeuronParams, Synapse, Trace,
};
pub use mpc::{mpc_step, run_control, ControlRun, MpcConfig, MpcStep, StepLog};
pub use netgen::{generate_network, load_network, save_network, SbmConfig};
pub use optimizer::{
    adam_step, optimize_horizon, optimize_multistart, AdamHyper, AdamState, HorizonProblem,
    Optimized, OptimizerConfig, TrainSchedule,
};
pub use unfolding::{
    finite_diff_grad, grad_plan, stage_cost, unfold_forward, ControlPlan, CostPhase, PhaseSchedule,
    RolloutTape,
};
