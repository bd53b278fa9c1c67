//! CSV traces and JSON reports.
//!
//! `trace.csv` has one row per (step, neuron) for every recorded state,
//! including the initial one; `control.csv` has one row per (step, control
//! neuron) for every applied control row.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FiringMask, NetworkState, NeuronParams, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateRow {
    time_ms: f64,
    neuron_id: usize,
    v: f64,
    u: f64,
    fired: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ControlRow {
    time_ms: f64,
    neuron_id: usize,
    i_control: f64,
}

// headers are written by hand so that empty files still get one
fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

/// Write every state of `trace`. The last state has no recorded mask, so its
/// `fired` column is evaluated against the firing threshold directly.
pub fn write_trace(trace: &Trace, params: &NeuronParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["time_ms", "neuron_id", "v", "u", "fired"])?;
    let last = trace.last_state().firing_mask(params);
    for (k, state) in trace.states.iter().enumerate() {
        let mask = trace.masks.get(k).unwrap_or(&last);
        for i in 0..state.len() {
            w.serialize(StateRow {
                time_ms: k as f64 * trace.dt,
                neuron_id: i,
                v: state.v[i],
                u: state.u[i],
                fired: mask.fired(i) as u8,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the control-set entries of every applied control row.
pub fn write_controls(trace: &Trace, control_set: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["time_ms", "neuron_id", "i_control"])?;
    for (k, row) in trace.controls.iter().enumerate() {
        for &i in control_set {
            w.serialize(ControlRow {
                time_ms: k as f64 * trace.dt,
                neuron_id: i,
                i_control: row[i],
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rebuild a trace from `trace.csv` and `control.csv`. Neurons absent from
/// the control file received zero control.
pub fn read_trace(
    trace_path: impl AsRef<Path>,
    control_path: impl AsRef<Path>,
    dt: f64,
) -> Result<Trace> {
    let trace_path = trace_path.as_ref();
    let control_path = control_path.as_ref();
    let bad = |path: &Path, line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg,
    };

    let mut rows: Vec<(u64, StateRow)> = Vec::new();
    let mut r = open(trace_path)?;
    for rec in r.deserialize() {
        let row: StateRow = rec?;
        // header is line 1
        rows.push((rows.len() as u64 + 2, row));
    }
    let n = rows.iter().map(|(_, r)| r.neuron_id + 1).max().unwrap_or(0);
    if n == 0 {
        return Err(bad(trace_path, 1, "trace has no rows".into()));
    }
    if !rows.len().is_multiple_of(n) {
        return Err(bad(
            trace_path,
            rows.len() as u64 + 1,
            format!("{} rows is not a multiple of n={n}", rows.len()),
        ));
    }
    let mut states = Vec::new();
    let mut masks = Vec::new();
    for (k, chunk) in rows.chunks(n).enumerate() {
        let mut v = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut fired = Vec::with_capacity(n);
        for (i, (line, row)) in chunk.iter().enumerate() {
            if row.neuron_id != i
                || (row.time_ms - k as f64 * dt).abs() > 1e-9 * dt.max(1.0) * (k as f64 + 1.0)
            {
                return Err(bad(
                    trace_path,
                    *line,
                    format!(
                        "expected neuron {i} at t={}, got neuron {} at t={}",
                        k as f64 * dt,
                        row.neuron_id,
                        row.time_ms
                    ),
                ));
            }
            v.push(row.v);
            u.push(row.u);
            fired.push(row.fired != 0);
        }
        states.push(NetworkState { v, u });
        masks.push(FiringMask(fired));
    }
    // the final state's flag is derived, not a recorded branch
    masks.pop();
    let steps = masks.len();

    let mut controls = vec![vec![0.0; n]; steps];
    let mut r = open(control_path)?;
    for (idx, rec) in r.deserialize().enumerate() {
        let row: ControlRow = rec?;
        let line = idx as u64 + 2;
        let k = (row.time_ms / dt).round();
        if k < 0.0 || k as usize >= steps || row.neuron_id >= n {
            return Err(bad(
                control_path,
                line,
                format!(
                    "control at t={} for neuron {} is outside the trace",
                    row.time_ms, row.neuron_id
                ),
            ));
        }
        controls[k as usize][row.neuron_id] = row.i_control;
    }

    Ok(Trace {
        dt,
        states,
        masks,
        controls,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
