//! Adam over control-plan entries with incremental (growing-prefix)
//! training of the horizon.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::model::{NetworkState, NeuronParams};
use crate::rng::{stream, Stream};
use crate::unfolding::{grad_plan, unfold_forward, ControlPlan, PhaseSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates shaped like the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub steps: u64,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, len: usize) -> Self {
        Self {
            hyper,
            first: vec![0.0; len],
            second: vec![0.0; len],
            steps: 0,
        }
    }
}

/// Bias-corrected Adam update on every entry.
pub fn adam_step(
    plan: &ControlPlan,
    grads: &ControlPlan,
    state: &AdamState,
) -> Result<(ControlPlan, AdamState)> {
    let mut plan = plan.clone();
    let mut state = state.clone();
    let rows = plan.horizon();
    adam_update(&mut plan, grads, &mut state, rows)?;
    Ok((plan, state))
}

/// In-place Adam update restricted to the first `active_rows` rows. Entries
/// in later rows, and their moments, are left untouched.
pub fn adam_update(
    plan: &mut ControlPlan,
    grads: &ControlPlan,
    state: &mut AdamState,
    active_rows: usize,
) -> Result<()> {
    let len = plan.values().len();
    if grads.values().len() != len
        || grads.horizon() != plan.horizon()
        || state.first.len() != len
        || state.second.len() != len
    {
        return Err(Error::config(format!(
            "shape mismatch: plan {}x{}, gradient {}x{}, moments {}",
            plan.horizon(),
            plan.width(),
            grads.horizon(),
            grads.width(),
            state.first.len()
        )));
    }
    let AdamHyper {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.hyper;
    state.steps += 1;
    let t = state.steps as i32;
    let correct1 = 1.0 - beta1.powi(t);
    let correct2 = 1.0 - beta2.powi(t);
    let active = active_rows.min(plan.horizon()) * plan.width();
    let values = plan.values_mut();
    for k in 0..active {
        let g = grads.values()[k];
        let m = beta1 * state.first[k] + (1.0 - beta1) * g;
        let v = beta2 * state.second[k] + (1.0 - beta2) * g * g;
        state.first[k] = m;
        state.second[k] = v;
        let m_hat = m / correct1;
        let v_hat = v / correct2;
        values[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// `[optimizer]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations_per_increment: usize,
    /// Optimized prefix lengths; `None` means `1, 2, ..., T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub increments: Option<Vec<usize>>,
    /// Hard cap on Adam iterations per horizon optimization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Box `[min, max]` applied to plan entries after each step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    /// Independent starts per horizon optimization; the best is kept.
    pub restarts: usize,
    /// Half-width of the uniform perturbation applied to extra starts.
    pub restart_spread: f64,
    /// Set to false to skip optimization entirely (zero control).
    pub enabled: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let h = AdamHyper::default();
        Self {
            lr: h.lr,
            beta1: h.beta1,
            beta2: h.beta2,
            epsilon: h.epsilon,
            iterations_per_increment: 50,
            increments: None,
            max_iterations: None,
            bounds: None,
            restarts: 1,
            restart_spread: 5.0,
            enabled: true,
        }
    }
}

impl OptimizerConfig {
    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta1 and beta2 must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        if let Some([lo, hi]) = self.bounds {
            if !(lo <= hi) {
                return Err(Error::config(format!("bounds [{lo}, {hi}] are inverted")));
            }
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        Ok(())
    }

    /// Resolve the training schedule for a horizon of length `horizon`.
    pub fn schedule(&self, horizon: usize) -> Result<TrainSchedule> {
        let increments = self
            .increments
            .clone()
            .unwrap_or_else(|| (1..=horizon).collect());
        TrainSchedule::new(
            increments,
            self.iterations_per_increment,
            self.max_iterations,
            horizon,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    increments: Vec<usize>,
    iterations_per_increment: usize,
    max_iterations: Option<usize>,
}

impl TrainSchedule {
    pub fn new(
        increments: Vec<usize>,
        iterations_per_increment: usize,
        max_iterations: Option<usize>,
        horizon: usize,
    ) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::config("increment schedule is empty"));
        }
        if increments.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config(format!(
                "increments must be non-decreasing, got {increments:?}"
            )));
        }
        if *increments.last().unwrap() != horizon {
            return Err(Error::config(format!(
                "final increment must equal the horizon {horizon}, got {increments:?}"
            )));
        }
        Ok(Self {
            increments,
            iterations_per_increment,
            max_iterations,
        })
    }

    pub fn increments(&self) -> &[usize] {
        &self.increments
    }

    pub fn total_iterations(&self) -> usize {
        let full = self.increments.len() * self.iterations_per_increment;
        self.max_iterations.map_or(full, |cap| cap.min(full))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub plan: ControlPlan,
    pub cost: f64,
    /// Cost of the plan at the start of every iteration, then the final plan.
    pub history: Vec<f64>,
}

/// Shared inputs of one horizon optimization.
#[derive(Debug, Clone, Copy)]
pub struct HorizonProblem<'a> {
    pub state0: &'a NetworkState,
    pub graph: &'a NetworkGraph,
    pub params: &'a NeuronParams,
    pub phases: &'a PhaseSchedule,
    pub start_time: usize,
}

impl HorizonProblem<'_> {
    pub fn cost(&self, plan: &ControlPlan) -> Result<f64> {
        unfold_forward(
            self.state0,
            plan,
            self.graph,
            self.params,
            self.phases,
            self.start_time,
        )
        .map(|(_, c)| c)
    }
}

/// Incremental training: for each prefix length `L`, run Adam on rows
/// `0..L` against the full-horizon cost with a fresh optimizer state. The
/// lowest-cost plan seen is returned.
pub fn optimize_horizon(
    problem: &HorizonProblem<'_>,
    schedule: &TrainSchedule,
    hyper: AdamHyper,
    bounds: Option<[f64; 2]>,
    init_plan: &ControlPlan,
) -> Result<Optimized> {
    let mut plan = init_plan.clone();
    let mut history = Vec::with_capacity(schedule.total_iterations() + 1);
    let mut best: Option<(f64, ControlPlan)> = None;
    let mut budget = schedule.total_iterations();
    let keep = |cost: f64, plan: &ControlPlan, best: &mut Option<(f64, ControlPlan)>| {
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            *best = Some((cost, plan.clone()));
        }
    };

    for &prefix in schedule.increments() {
        let mut adam = AdamState::new(hyper, plan.values().len());
        for _ in 0..schedule.iterations_per_increment {
            if budget == 0 {
                break;
            }
            budget -= 1;
            let (tape, cost) = unfold_forward(
                problem.state0,
                &plan,
                problem.graph,
                problem.params,
                problem.phases,
                problem.start_time,
            )?;
            history.push(cost);
            keep(cost, &plan, &mut best);
            let grad = grad_plan(&tape, problem.graph, problem.params)?;
            adam_update(&mut plan, &grad, &mut adam, prefix)?;
            if let Some([lo, hi]) = bounds {
                let active = prefix * plan.width();
                for x in &mut plan.values_mut()[..active] {
                    *x = x.clamp(lo, hi);
                }
            }
        }
    }
    let cost = problem.cost(&plan)?;
    history.push(cost);
    keep(cost, &plan, &mut best);
    let (cost, plan) = best.expect("at least one evaluation");
    Ok(Optimized {
        plan,
        cost,
        history,
    })
}

/// Run `cfg.restarts` starts (the first from `init_plan`, the rest from
/// seeded perturbations of it) concurrently and keep the cheapest; ties go to
/// the lowest start index.
pub fn optimize_multistart(
    problem: &HorizonProblem<'_>,
    cfg: &OptimizerConfig,
    init_plan: &ControlPlan,
    seed: u64,
) -> Result<Optimized> {
    let schedule = cfg.schedule(init_plan.horizon())?;
    let hyper = cfg.hyper();
    let mut starts = vec![init_plan.clone()];
    if cfg.restarts > 1 {
        let mut rng = stream(
            seed ^ (problem.start_time as u64).rotate_left(32),
            Stream::Restarts,
        );
        for _ in 1..cfg.restarts {
            let mut p = init_plan.clone();
            for x in p.values_mut() {
                *x += rng.random_range(-cfg.restart_spread..=cfg.restart_spread);
                if let Some([lo, hi]) = cfg.bounds {
                    *x = x.clamp(lo, hi);
                }
            }
            starts.push(p);
        }
    }
    if starts.len() == 1 {
        return optimize_horizon(problem, &schedule, hyper, cfg.bounds, &starts[0]);
    }
    let results: Vec<Result<Optimized>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .map(|start| {
                let schedule = &schedule;
                scope.spawn(move || optimize_horizon(problem, schedule, hyper, cfg.bounds, start))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("optimizer thread panicked"))
            .collect()
    });
    let mut best: Option<Optimized> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(vals: &[f64]) -> ControlPlan {
        ControlPlan::from_rows(&[0], &vals.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_plan() {
        let p = plan(&[1.0, -2.0]);
        let mut s = AdamState::new(AdamHyper::default(), 2);
        s.first = vec![0.5, 0.5];
        s.second = vec![0.25, 0.25];
        s.steps = 3;
        let (p2, s2) = adam_step(&p, &plan(&[0.0, 0.0]), &s).unwrap();
        // the moment still moves the plan, but decays
        assert!(s2.first[0] < s.first[0] && s2.second[0] < s.second[0]);
        let fresh = AdamState::new(AdamHyper::default(), 2);
        let (p3, _) = adam_step(&p, &plan(&[0.0, 0.0]), &fresh).unwrap();
        assert_eq!(p3, p);
        assert_ne!(p2, p);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let hyper = AdamHyper::default();
        let s = AdamState::new(hyper, 3);
        let (p, _) = adam_step(&plan(&[0.0; 3]), &plan(&[3.0, -0.02, 1e3]), &s).unwrap();
        for (x, sign) in p.values().iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - sign * hyper.lr).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let s = AdamState::new(AdamHyper::default(), 2);
        let g = plan(&[0.3, -0.7]);
        let a = adam_step(&plan(&[1.0, 1.0]), &g, &s).unwrap();
        let b = adam_step(&plan(&[1.0, 1.0]), &g, &s).unwrap();
        assert_eq!(a, b);
        assert!(adam_step(&plan(&[1.0]), &g, &s).is_err());
    }

    #[test]
    fn masked_rows_untouched() {
        let mut p = plan(&[1.0, 2.0, 3.0]);
        let mut s = AdamState::new(AdamHyper::default(), 3);
        adam_update(&mut p, &plan(&[1.0, 1.0, 1.0]), &mut s, 1).unwrap();
        assert_eq!(&p.values()[1..], &[2.0, 3.0]);
        assert_eq!(&s.first[1..], &[0.0, 0.0]);
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainSchedule::new(vec![1, 3, 2], 1, None, 2).is_err());
        assert!(TrainSchedule::new(vec![1, 2], 1, None, 3).is_err());
        assert!(TrainSchedule::new(vec![], 1, None, 3).is_err());
        let s = TrainSchedule::new(vec![1, 2, 3], 4, Some(5), 3).unwrap();
        assert_eq!(s.total_iterations(), 5);
    }
}
