//! Spike counts per module and interval, and the switching objective
//! `(f[M1, I1] - f[M2, I1]) + (f[M2, I2] - f[M1, I2])`.
//!
//! Intervals are half-open `[t_a, t_b)` in ms, so `I1 = [0, t_switch)` and
//! `I2 = [t_switch, t_end)` never both count the step at `t_switch`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ModulePartition;
use crate::model::Trace;

/// Number of firing events of `module` at steps `k` with `t_a <= k*dt < t_b`.
pub fn firing_count(trace: &Trace, module: &[usize], interval: (f64, f64)) -> Result<usize> {
    let (t_a, t_b) = interval;
    let extent = trace.steps() as f64 * trace.dt;
    if !(t_a <= t_b) || t_a < 0.0 || t_b > extent + 1e-9 * extent.max(1.0) {
        return Err(Error::config(format!(
            "interval [{t_a}, {t_b}) lies outside the trace extent [0, {extent})"
        )));
    }
    if let Some(&bad) = module.iter().find(|&&i| i >= trace.n()) {
        return Err(Error::config(format!("neuron {bad} is not in the trace")));
    }
    let count = trace
        .masks
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = *k as f64 * trace.dt;
            t_a <= t && t < t_b
        })
        .map(|(_, mask)| module.iter().filter(|&&i| mask.fired(i)).count())
        .sum();
    Ok(count)
}

/// Spike counts of the two target modules over the two intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringCounts {
    pub module1_interval1: usize,
    pub module2_interval1: usize,
    pub module1_interval2: usize,
    pub module2_interval2: usize,
}

impl FiringCounts {
    pub fn objective(&self) -> i64 {
        (self.module1_interval1 as i64 - self.module2_interval1 as i64)
            + (self.module2_interval2 as i64 - self.module1_interval2 as i64)
    }

    /// Both intervals: target module fired at least `factor` times as often
    /// as the other module.
    pub fn dominates(&self, factor: usize) -> bool {
        self.module1_interval1 >= factor * self.module2_interval1
            && self.module2_interval2 >= factor * self.module1_interval2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiringCountReport {
    pub counts: FiringCounts,
    pub objective: i64,
    /// Target/other ratio in interval 1 and 2; `None` when the other module
    /// stayed silent.
    pub ratio_interval1: Option<f64>,
    pub ratio_interval2: Option<f64>,
    pub interval1: (f64, f64),
    pub interval2: (f64, f64),
}

impl FiringCountReport {
    pub fn from_trace(
        trace: &Trace,
        partition: &ModulePartition,
        t_switch: f64,
        t_end: f64,
    ) -> Result<Self> {
        // an empty run has t_end = 0 < t_switch
        let mid = t_switch.min(t_end);
        let i1 = (0.0, mid);
        let i2 = (mid, t_end);
        let counts = FiringCounts {
            module1_interval1: firing_count(trace, partition.module1(), i1)?,
            module2_interval1: firing_count(trace, partition.module2(), i1)?,
            module1_interval2: firing_count(trace, partition.module1(), i2)?,
            module2_interval2: firing_count(trace, partition.module2(), i2)?,
        };
        Ok(Self::from_counts(counts, i1, i2))
    }

    pub fn from_counts(counts: FiringCounts, interval1: (f64, f64), interval2: (f64, f64)) -> Self {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Self {
            counts,
            objective: counts.objective(),
            ratio_interval1: ratio(counts.module1_interval1, counts.module2_interval1),
            ratio_interval2: ratio(counts.module2_interval2, counts.module1_interval2),
            interval1,
            interval2,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.objective == self.counts.objective()
    }

    /// Two-row table: module rows, interval columns.
    pub fn table(&self, partition: &ModulePartition) -> String {
        let span = |m: &[usize]| match (m.first(), m.last()) {
            (Some(a), Some(b)) => format!("{a}-{b}"),
            _ => "-".to_string(),
        };
        let (a1, b1) = self.interval1;
        let (a2, b2) = self.interval2;
        let h1 = format!("{a1} <= t < {b1}");
        let h2 = format!("{a2} <= t < {b2}");
        let c = &self.counts;
        format!(
            "{:<12}| {:>16} | {:>16}\n{:<12}| {:>16} | {:>16}\n{:<12}| {:>16} | {:>16}\nobjective: {}\n",
            "neurons",
            h1,
            h2,
            span(partition.module1()),
            c.module1_interval1,
            c.module1_interval2,
            span(partition.module2()),
            c.module2_interval1,
            c.module2_interval2,
            self.objective
        )
    }
}
