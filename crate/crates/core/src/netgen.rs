//! Stochastic block model generator and the plain-text network file.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ModulePartition, NetworkGraph, NeuronKind};
use crate::rng::{stream, Stream};

/// Three-block SBM: control, module 1, module 2 laid out contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmConfig {
    pub n: usize,
    pub module_sizes: [usize; 3],
    pub p_within: f64,
    pub p_between: f64,
    #[serde(default = "default_inhibitory_fraction")]
    pub inhibitory_fraction: f64,
    /// Explicit inhibitory neurons. Overrides `inhibitory_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhibitory: Option<Vec<usize>>,
}

fn default_inhibitory_fraction() -> f64 {
    0.2
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("p_within", self.p_within)?;
        prob("p_between", self.p_between)?;
        prob("inhibitory_fraction", self.inhibitory_fraction)?;
        if self.module_sizes.contains(&0) {
            return Err(Error::config(format!(
                "module sizes must be positive, got {:?}",
                self.module_sizes
            )));
        }
        let total: usize = self.module_sizes.iter().sum();
        if total != self.n {
            return Err(Error::config(format!(
                "module sizes {:?} sum to {total}, expected n={}",
                self.module_sizes, self.n
            )));
        }
        if let Some(list) = &self.inhibitory {
            if let Some(&bad) = list.iter().find(|&&i| i >= self.n) {
                return Err(Error::config(format!(
                    "inhibitory index {bad} out of range for n={}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn inhibitory_count(&self) -> usize {
        (self.inhibitory_fraction * self.n as f64).round() as usize
    }
}

/// Sample a network. Edges and neuron kinds come from separate streams of
/// `seed`.
pub fn generate_network(cfg: &SbmConfig, seed: u64) -> Result<NetworkGraph> {
    cfg.validate()?;
    let n = cfg.n;
    let partition = ModulePartition::contiguous(cfg.module_sizes);
    let labels = partition.labels();

    let mut rng = stream(seed, Stream::Edges);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if labels[i] == labels[j] {
                cfg.p_within
            } else {
                cfg.p_between
            };
            // always draw so the stream position does not depend on p
            let x: f64 = rng.random();
            if x < p {
                edges.push((j, i));
            }
        }
    }

    let mut kinds = vec![NeuronKind::Excitatory; n];
    let inhibitory: Vec<usize> = match &cfg.inhibitory {
        Some(list) => list.clone(),
        None => {
            let mut rng = stream(seed, Stream::Kinds);
            index::sample(&mut rng, n, cfg.inhibitory_count()).into_vec()
        }
    };
    for i in inhibitory {
        kinds[i] = NeuronKind::Inhibitory;
    }

    NetworkGraph::new(n, edges, kinds, partition)
}

/// Serialize to the edge-list format:
///
/// ```text
/// n=<int>
/// partition=<control>,<module1>,<module2>
/// inhibitory=<comma-separated indices>
/// <source> <target>
/// ...
/// ```
pub fn format_network(graph: &NetworkGraph) -> Result<String> {
    let sizes = graph.partition().sizes();
    if *graph.partition() != ModulePartition::contiguous(sizes) {
        return Err(Error::config(
            "network file format requires contiguous module blocks",
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "n={}", graph.n());
    let _ = writeln!(out, "partition={},{},{}", sizes[0], sizes[1], sizes[2]);
    let inh: Vec<String> = graph.inhibitory().iter().map(|i| i.to_string()).collect();
    let _ = writeln!(out, "inhibitory={}", inh.join(","));
    for &(j, i) in graph.edges() {
        let _ = writeln!(out, "{j} {i}");
    }
    Ok(out)
}

pub fn save_network(graph: &NetworkGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_network(graph)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, path)
}

pub fn parse_network(text: &str, path: &Path) -> Result<NetworkGraph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let parse_usize = |line: usize, s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| err(line, format!("expected a non-negative integer, got {s:?}")))
    };

    let mut n = None;
    let mut sizes = None;
    let mut inhibitory = None;
    let mut edges = Vec::new();
    let mut edge_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=") {
            n = Some(parse_usize(line_no, rest)?);
        } else if let Some(rest) = line.strip_prefix("partition=") {
            let parts = rest
                .split(',')
                .map(|s| parse_usize(line_no, s))
                .collect::<Result<Vec<_>>>()?;
            let arr: [usize; 3] = parts
                .try_into()
                .map_err(|_| err(line_no, "partition needs exactly three sizes".into()))?;
            sizes = Some(arr);
        } else if let Some(rest) = line.strip_prefix("inhibitory=") {
            let list = if rest.trim().is_empty() {
                Vec::new()
            } else {
                rest.split(',')
                    .map(|s| parse_usize(line_no, s))
                    .collect::<Result<Vec<_>>>()?
            };
            inhibitory = Some((line_no, list));
        } else {
            let mut it = line.split_whitespace();
            let (Some(j), Some(i), None) = (it.next(), it.next(), it.next()) else {
                return Err(err(
                    line_no,
                    format!("expected \"<source> <target>\", got {line:?}"),
                ));
            };
            edges.push((parse_usize(line_no, j)?, parse_usize(line_no, i)?));
            edge_lines.push(line_no);
        }
    }

    let n = n.ok_or_else(|| err(0, "missing \"n=\" header".into()))?;
    let sizes = sizes.ok_or_else(|| err(0, "missing \"partition=\" header".into()))?;
    if sizes.iter().sum::<usize>() != n {
        return Err(err(0, format!("partition {sizes:?} does not sum to n={n}")));
    }
    let mut kinds = vec![NeuronKind::Excitatory; n];
    if let Some((line_no, list)) = inhibitory {
        for i in list {
            if i >= n {
                return Err(err(line_no, format!("inhibitory index {i} >= n={n}")));
            }
            kinds[i] = NeuronKind::Inhibitory;
        }
    }
    for (&(j, i), &line_no) in edges.iter().zip(&edge_lines) {
        if j >= n || i >= n {
            return Err(err(
                line_no,
                format!("edge {j} {i} references a neuron >= n={n}"),
            ));
        }
        if j == i {
            return Err(err(line_no, format!("self-loop on neuron {i}")));
        }
    }
    NetworkGraph::new(n, edges, kinds, ModulePartition::contiguous(sizes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, sizes: [usize; 3], pw: f64, pb: f64) -> SbmConfig {
        SbmConfig {
            n,
            module_sizes: sizes,
            p_within: pw,
            p_between: pb,
            inhibitory_fraction: 0.2,
            inhibitory: None,
        }
    }

    #[test]
    fn zero_and_full_probability() {
        let g = generate_network(&cfg(15, [5, 5, 5], 0.0, 0.0), 1).unwrap();
        assert!(g.edges().is_empty());
        let g = generate_network(&cfg(3, [1, 1, 1], 1.0, 1.0), 1).unwrap();
        assert_eq!(g.edges().len(), 6);
    }

    #[test]
    fn inhibitory_count_and_override() {
        let g = generate_network(&cfg(15, [5, 5, 5], 0.5, 0.125), 3).unwrap();
        assert_eq!(g.inhibitory().len(), 3);
        let mut c = cfg(15, [5, 5, 5], 0.5, 0.125);
        c.inhibitory = Some(vec![6, 9, 13]);
        assert_eq!(
            generate_network(&c, 3).unwrap().inhibitory(),
            vec![6, 9, 13]
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_network(&cfg(15, [5, 5, 5], 1.5, 0.1), 0).is_err());
        assert!(generate_network(&cfg(15, [5, 5, 4], 0.5, 0.1), 0).is_err());
        assert!(generate_network(&cfg(10, [0, 5, 5], 0.5, 0.1), 0).is_err());
    }

    #[test]
    fn parse_rejects_bad_files() {
        let p = Path::new("net.txt");
        let self_loop = "n=3\npartition=1,1,1\ninhibitory=\n0 1\n2 2\n";
        match parse_network(self_loop, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        let out_of_range = "n=3\npartition=1,1,1\ninhibitory=\n0 3\n";
        assert!(matches!(
            parse_network(out_of_range, p),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(parse_network("n=3\npartition=1,1\n", p).is_err());
        assert!(parse_network("n=3\npartition=1,1,1\n0 x\n", p).is_err());
    }

    #[test]
    fn format_is_stable() {
        let mut c = cfg(3, [1, 1, 1], 1.0, 0.0);
        c.inhibitory = Some(vec![2]);
        let g = generate_network(&c, 3).unwrap();
        assert_eq!(
            format_network(&g).unwrap(),
            "n=3\npartition=1,1,1\ninhibitory=2\n"
        );
    }
}
