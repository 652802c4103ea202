//! Graph storage, normalized propagation operators, synthetic generators and
//! the dataset file format.

mod dataset;
mod io;
mod propagation;
mod synthetic;

pub use dataset::NodeDataset;
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use propagation::{PropagationKind, PropagationMatrix};
pub use synthetic::{
    edge_homophily, generate, generate_noisy_complete, generate_planted_partition,
    GeneratorKind, PlantedProbabilities, SyntheticSpec, NOISY_COMPLETE_MAX_NODES,
};

use crate::error::{Error, Result};

/// Undirected graph in compressed sparse row form. Each undirected edge is
/// stored as two arcs; self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparseGraph {
    /// Builds a graph from undirected edges. Either orientation is accepted and
    /// duplicates collapse; self-loops and out-of-range endpoints are errors.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Graph(format!(
                    "edge [{u},{v}] out of range for {n_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(n_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            col_indices.extend(row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_nodes,
            row_offsets,
            col_indices,
        })
    }

    /// Every distinct pair connected.
    pub fn complete(n_nodes: usize) -> Self {
        let mut row_offsets = Vec::with_capacity(n_nodes + 1);
        let mut col_indices = Vec::with_capacity(n_nodes * n_nodes.saturating_sub(1));
        row_offsets.push(0);
        for i in 0..n_nodes {
            col_indices.extend((0..n_nodes).filter(|&j| j != i));
            row_offsets.push(col_indices.len());
        }
        Self {
            n_nodes,
            row_offsets,
            col_indices,
        }
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(n_nodes: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>) -> Result<Self> {
        let g = Self {
            n_nodes,
            row_offsets,
            col_indices,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes;
        if self.row_offsets.len() != n + 1 || self.row_offsets[0] != 0 {
            return Err(Error::Graph("row_offsets must have n+1 entries starting at 0".into()));
        }
        if *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return Err(Error::Graph("last row offset must equal arc count".into()));
        }
        for u in 0..n {
            let (s, e) = (self.row_offsets[u], self.row_offsets[u + 1]);
            if e < s {
                return Err(Error::Graph(format!("row_offsets decrease at row {u}")));
            }
            let row = &self.col_indices[s..e];
            for (k, &v) in row.iter().enumerate() {
                if v >= n {
                    return Err(Error::Graph(format!("arc ({u},{v}) out of range")));
                }
                if v == u {
                    return Err(Error::Graph(format!("self-loop on node {u}")));
                }
                if k > 0 && row[k - 1] >= v {
                    return Err(Error::Graph(format!("row {u} not strictly increasing")));
                }
            }
        }
        for u in 0..n {
            for &v in self.neighbors(u) {
                if !self.has_arc(v, u) {
                    return Err(Error::Graph(format!("arc ({u},{v}) has no reverse")));
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Stored directed arcs (twice the undirected edge count).
    pub fn n_arcs(&self) -> usize {
        self.col_indices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges with `u < v`, in ascending `(u, v)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for u in 0..self.n_nodes {
            out.extend(self.neighbors(u).iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }
}
