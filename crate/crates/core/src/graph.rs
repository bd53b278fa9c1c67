//! Directed network topology with excitatory/inhibitory labels and the
//! three-way module partition (control set, module 1, module 2).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuronKind {
    Excitatory,
    Inhibitory,
}

/// Disjoint cover of `0..n` by the actuated set and the two target modules.
///
/// Index sets are kept sorted; column `c` of a control plan addresses
/// neuron `control_set[c]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulePartition {
    control_set: Vec<usize>,
    module1: Vec<usize>,
    module2: Vec<usize>,
}

impl ModulePartition {
    pub fn new(
        mut control_set: Vec<usize>,
        mut module1: Vec<usize>,
        mut module2: Vec<usize>,
        n: usize,
    ) -> Result<Self> {
        control_set.sort_unstable();
        module1.sort_unstable();
        module2.sort_unstable();
        let mut seen = vec![false; n];
        for &i in control_set.iter().chain(&module1).chain(&module2) {
            if i >= n {
                return Err(Error::config(format!(
                    "partition index {i} out of range for n={n}"
                )));
            }
            if seen[i] {
                return Err(Error::config(format!(
                    "neuron {i} appears in more than one module"
                )));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!(
                "neuron {missing} is not assigned to any module"
            )));
        }
        Ok(Self {
            control_set,
            module1,
            module2,
        })
    }

    /// Contiguous blocks: control first, then module 1, then module 2.
    pub fn contiguous(sizes: [usize; 3]) -> Self {
        let [c, m1, m2] = sizes;
        Self {
            control_set: (0..c).collect(),
            module1: (c..c + m1).collect(),
            module2: (c + m1..c + m1 + m2).collect(),
        }
    }

    pub fn control_set(&self) -> &[usize] {
        &self.control_set
    }

    pub fn module1(&self) -> &[usize] {
        &self.module1
    }

    pub fn module2(&self) -> &[usize] {
        &self.module2
    }

    pub fn len(&self) -> usize {
        self.control_set.len() + self.module1.len() + self.module2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> [usize; 3] {
        [
            self.control_set.len(),
            self.module1.len(),
            self.module2.len(),
        ]
    }

    /// Module label of each neuron: 0 = control, 1 = module 1, 2 = module 2.
    pub fn labels(&self) -> Vec<u8> {
        let mut labels = vec![0u8; self.len()];
        for &i in &self.module1 {
            labels[i] = 1;
        }
        for &i in &self.module2 {
            labels[i] = 2;
        }
        labels
    }

    pub fn is_actuated(&self, i: usize) -> bool {
        self.control_set.binary_search(&i).is_ok()
    }
}

/// Directed graph over `n` neurons. An edge `(j, i)` means `j` is an
/// in-neighbor of `i`: when `j` is active it injects current into `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    // sorted, deduplicated (source, target) pairs
    edges: Vec<(usize, usize)>,
    kinds: Vec<NeuronKind>,
    partition: ModulePartition,
    in_neighbors: Vec<Vec<usize>>,
}

impl NetworkGraph {
    pub fn new(
        n: usize,
        mut edges: Vec<(usize, usize)>,
        kinds: Vec<NeuronKind>,
        partition: ModulePartition,
    ) -> Result<Self> {
        if kinds.len() != n {
            return Err(Error::config(format!(
                "expected {n} neuron kinds, got {}",
                kinds.len()
            )));
        }
        if partition.len() != n {
            return Err(Error::config(format!(
                "partition covers {} neurons, network has {n}",
                partition.len()
            )));
        }
        for &(j, i) in &edges {
            if j >= n || i >= n {
                return Err(Error::config(format!(
                    "edge {j} -> {i} references a neuron outside 0..{n}"
                )));
            }
            if j == i {
                return Err(Error::config(format!("self-loop on neuron {i}")));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut in_neighbors = vec![Vec::new(); n];
        for &(j, i) in &edges {
            in_neighbors[i].push(j);
        }
        Ok(Self {
            n,
            edges,
            kinds,
            partition,
            in_neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kinds(&self) -> &[NeuronKind] {
        &self.kinds
    }

    pub fn kind(&self, i: usize) -> NeuronKind {
        self.kinds[i]
    }

    pub fn partition(&self) -> &ModulePartition {
        &self.partition
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn inhibitory(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NeuronKind::Inhibitory)
            .map(|(i, _)| i)
            .collect()
    }

    /// Relabel neurons: neuron `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::config("permutation length mismatch"));
        }
        let mut kinds = vec![NeuronKind::Excitatory; self.n];
        for (i, &p) in perm.iter().enumerate() {
            kinds[p] = self.kinds[i];
        }
        let map = |set: &[usize]| set.iter().map(|&i| perm[i]).collect::<Vec<_>>();
        let partition = ModulePartition::new(
            map(self.partition.control_set()),
            map(self.partition.module1()),
            map(self.partition.module2()),
            self.n,
        )?;
        let edges = self
            .edges
            .iter()
            .map(|&(j, i)| (perm[j], perm[i]))
            .collect();
        Self::new(self.n, edges, kinds, partition)
    }
}
