//! Warm-up from rest: every neuron starts at `v = c`, `u = 0` and is driven
//! by an i.i.d. uniform random current for a few steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::{step_network_unconstrained, NetworkState, NeuronParams};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub warmup_steps: usize,
    pub current_low: f64,
    pub current_high: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            warmup_steps: 10,
            current_low: 0.0,
            current_high: 20.0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.current_low.is_finite() && self.current_high.is_finite()) {
            return Err(Error::config("warm-up current bounds must be finite"));
        }
        if self.current_low > self.current_high {
            return Err(Error::config(format!(
                "current_low {} exceeds current_high {}",
                self.current_low, self.current_high
            )));
        }
        Ok(())
    }
}

pub fn initialize(
    graph: &NetworkGraph,
    params: &NeuronParams,
    cfg: &InitConfig,
    seed: u64,
) -> Result<NetworkState> {
    cfg.validate()?;
    let n = graph.n();
    let mut rng = stream(seed, Stream::WarmupCurrent);
    let mut state = NetworkState::resting(n, params);
    let mut current = vec![0.0; n];
    for _ in 0..cfg.warmup_steps {
        for x in current.iter_mut() {
            *x = if cfg.current_low == cfg.current_high {
                cfg.current_low
            } else {
                rng.random_range(cfg.current_low..cfg.current_high)
            };
        }
        state = step_network_unconstrained(&state, &current, graph, params)?.0;
    }
    if !state.is_finite() {
        return Err(Error::Consistency(
            "warm-up produced a non-finite state".into(),
        ));
    }
    Ok(state)
}
