use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SparseGraph;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Outputs at or above this many entries are filled in parallel.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PropagationKind {
    /// `D^{-1/2} A D^{-1/2}`
    #[default]
    SymNorm,
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂ = D + I`
    SymNormSelfLoop,
    /// `D^{-1} A`
    RowNorm,
}

impl PropagationKind {
    pub fn is_symmetric(self) -> bool {
        matches!(self, Self::SymNorm | Self::SymNormSelfLoop)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn mul(&self, h: &Tensor) -> Tensor {
        let n = self.row_offsets.len() - 1;
        let d = h.cols();
        let mut out = Tensor::zeros(n, d);
        let fill_row = |i: usize, o_row: &mut [f64]| {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let w = self.values[k];
                let src = h.row(self.col_indices[k]);
                for (o, &x) in o_row.iter_mut().zip(src) {
                    *o += w * x;
                }
            }
        };
        if d == 0 {
            return out;
        }
        if n * d >= PAR_THRESHOLD {
            out.data_mut()
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, row)| fill_row(i, row));
        } else {
            out.data_mut()
                .chunks_mut(d)
                .enumerate()
                .for_each(|(i, row)| fill_row(i, row));
        }
        out
    }

    fn transpose(&self, n: usize) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.col_indices.len()];
        let mut values = vec![0.0; self.values.len()];
        // rows are visited in ascending order, so each transposed row comes out sorted
        for i in 0..n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let c = self.col_indices[k];
                col_indices[next[c]] = i;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Csr {
            row_offsets,
            col_indices,
            values,
        }
    }
}

/// Normalized sparse propagation operator `P`. The transposed operator is
/// materialized at construction for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    kind: PropagationKind,
    n: usize,
    forward: Csr,
    transposed: Csr,
}

impl PropagationMatrix {
    pub fn build(graph: &SparseGraph, kind: PropagationKind) -> Self {
        let n = graph.n_nodes();
        let self_loop = kind == PropagationKind::SymNormSelfLoop;
        let deg: Vec<f64> = (0..n)
            .map(|u| (graph.degree(u) + usize::from(self_loop)) as f64)
            .collect();

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(graph.n_arcs() + if self_loop { n } else { 0 });
        let mut values = Vec::with_capacity(col_indices.capacity());
        row_offsets.push(0);
        for u in 0..n {
            let nbrs = graph.neighbors(u);
            let mut push = |v: usize| {
                let w = match kind {
                    // d_u * d_v commutes exactly, so P stays bitwise symmetric
                    PropagationKind::SymNorm | PropagationKind::SymNormSelfLoop => 1.0 / (deg[u] * deg[v]).sqrt(),
                    PropagationKind::RowNorm => 1.0 / deg[u],
                };
                col_indices.push(v);
                values.push(w);
            };
            if self_loop {
                let split = nbrs.partition_point(|&v| v < u);
                nbrs[..split].iter().for_each(|&v| push(v));
                push(u);
                nbrs[split..].iter().for_each(|&v| push(v));
            } else {
                nbrs.iter().for_each(|&v| push(v));
            }
            row_offsets.push(col_indices.len());
        }
        let forward = Csr {
            row_offsets,
            col_indices,
            values,
        };
        let transposed = if kind.is_symmetric() {
            forward.clone()
        } else {
            forward.transpose(n)
        };
        Self {
            kind,
            n,
            forward,
            transposed,
        }
    }

    pub fn kind(&self) -> PropagationKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.forward.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.forward.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.forward.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.forward.values
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.forward.row_offsets[i], self.forward.row_offsets[i + 1]);
        match self.forward.col_indices[s..e].binary_search(&j) {
            Ok(k) => self.forward.values[s + k],
            Err(_) => 0.0,
        }
    }

    fn check_rows(&self, h: &Tensor, op: &'static str) -> Result<()> {
        if h.rows() != self.n {
            return Err(Error::shape(
                op,
                format!("operator has {} rows, input has {}", self.n, h.rows()),
            ));
        }
        Ok(())
    }

    /// `P · H`. Row `i` accumulates its neighbors in ascending column order,
    /// so the parallel and sequential paths agree bit for bit.
    pub fn spmm(&self, h: &Tensor) -> Result<Tensor> {
        self.check_rows(h, "spmm")?;
        Ok(self.forward.mul(h))
    }

    /// `Pᵀ · H`.
    pub fn spmm_t(&self, h: &Tensor) -> Result<Tensor> {
        self.check_rows(h, "spmm_t")?;
        Ok(self.transposed.mul(h))
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.forward.row_offsets[i]..self.forward.row_offsets[i + 1] {
                t.set(i, self.forward.col_indices[k], self.forward.values[k]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedRng;

    fn path2() -> SparseGraph {
        SparseGraph::from_edges(2, &[(0, 1)]).unwrap()
    }

    fn triangle() -> SparseGraph {
        SparseGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn random_graph(n: usize, p: f64, rng: &mut SeedRng) -> SparseGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.bernoulli(p) {
                    edges.push((u, v));
                }
            }
        }
        SparseGraph::from_edges(n, &edges).unwrap()
    }

    fn naive(p: &Tensor, h: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(p.rows(), h.cols());
        for i in 0..p.rows() {
            for j in 0..h.cols() {
                let mut acc = 0.0;
                for k in 0..p.cols() {
                    acc += p.get(i, k) * h.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn path_graph_sym_norm() {
        let p = PropagationMatrix::build(&path2(), PropagationKind::SymNorm);
        assert_eq!(p.value(0, 1), 1.0);
        assert_eq!(p.value(1, 0), 1.0);
        assert_eq!(p.nnz(), 2);
    }

    #[test]
    fn path_graph_self_loops_give_halves() {
        let p = PropagationMatrix::build(&path2(), PropagationKind::SymNormSelfLoop);
        assert_eq!(p.to_dense().data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn triangle_sym_norm_is_half() {
        let p = PropagationMatrix::build(&triangle(), PropagationKind::SymNorm);
        assert!(p.values().iter().all(|&v| v == 0.5));
        assert_eq!(p.nnz(), 6);
    }

    #[test]
    fn row_norm_triangle_averages_one_hots() {
        let p = PropagationMatrix::build(&triangle(), PropagationKind::RowNorm);
        let out = p.spmm(&Tensor::identity(3)).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.5, 0.5]);
        assert_eq!(out.row(1), &[0.5, 0.0, 0.5]);
        assert_eq!(out.row(2), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn isolated_nodes_give_zero_rows_and_columns() {
        let g = SparseGraph::from_edges(3, &[(0, 1)]).unwrap();
        for kind in [PropagationKind::SymNorm, PropagationKind::RowNorm] {
            let p = PropagationMatrix::build(&g, kind);
            let out = p.spmm(&Tensor::filled(3, 2, 1.0)).unwrap();
            assert_eq!(out.row(2), &[0.0, 0.0]);
            assert_eq!(p.value(0, 2), 0.0);
            assert!(out.all_finite());
        }
    }

    #[test]
    fn empty_graph_gives_empty_operator() {
        let g = SparseGraph::from_edges(0, &[]).unwrap();
        let p = PropagationMatrix::build(&g, PropagationKind::SymNorm);
        assert_eq!(p.nnz(), 0);
        assert_eq!(p.spmm(&Tensor::zeros(0, 3)).unwrap().shape(), (0, 3));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = PropagationMatrix::build(&triangle(), PropagationKind::SymNorm);
        assert!(p.spmm(&Tensor::zeros(4, 2)).is_err());
    }

    #[test]
    fn random_five_node_matches_naive_product() {
        let mut rng = SeedRng::new(11);
        let g = random_graph(5, 0.6, &mut rng);
        let h = Tensor::from_fn(5, 3, |_, _| rng.normal());
        for kind in [
            PropagationKind::SymNorm,
            PropagationKind::SymNormSelfLoop,
            PropagationKind::RowNorm,
        ] {
            let p = PropagationMatrix::build(&g, kind);
            let fast = p.spmm(&h).unwrap();
            let slow = naive(&p.to_dense(), &h);
            assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-12 * slow.max_abs().max(1.0));
            let fast_t = p.spmm_t(&h).unwrap();
            let slow_t = naive(&p.to_dense().transpose(), &h);
            assert!(fast_t.max_abs_diff(&slow_t).unwrap() <= 1e-12 * slow_t.max_abs().max(1.0));
        }
    }

    #[test]
    fn parallel_path_is_bitwise_sequential() {
        let mut rng = SeedRng::new(5);
        let g = random_graph(600, 0.02, &mut rng);
        let p = PropagationMatrix::build(&g, PropagationKind::SymNorm);
        let h = Tensor::from_fn(600, 64, |_, _| rng.normal());
        const { assert!(600 * 64 >= PAR_THRESHOLD) };
        let par = p.spmm(&h).unwrap();
        let mut seq = Tensor::zeros(600, 64);
        for i in 0..600 {
            let row = seq.row_mut(i);
            for k in p.row_offsets()[i]..p.row_offsets()[i + 1] {
                let w = p.values()[k];
                for (o, &x) in row.iter_mut().zip(h.row(p.col_indices()[k])) {
                    *o += w * x;
                }
            }
        }
        assert_eq!(par, seq);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn operator_invariants(seed in any::<u64>(), n in 1usize..64, p in 0.0f64..0.5) {
                let mut rng = SeedRng::new(seed);
                let g = random_graph(n, p, &mut rng);
                let sym = PropagationMatrix::build(&g, PropagationKind::SymNorm);
                for i in 0..n {
                    for k in sym.row_offsets()[i]..sym.row_offsets()[i + 1] {
                        let j = sym.col_indices()[k];
                        prop_assert_eq!(sym.values()[k], sym.value(j, i));
                    }
                }
                let rw = PropagationMatrix::build(&g, PropagationKind::RowNorm);
                for i in 0..n {
                    let s: f64 = rw.values()[rw.row_offsets()[i]..rw.row_offsets()[i + 1]].iter().sum();
                    if g.degree(i) > 0 {
                        prop_assert!((s - 1.0).abs() <= 1e-12);
                    } else {
                        prop_assert_eq!(s, 0.0);
                    }
                }
                for m in [&sym, &rw] {
                    prop_assert!(m.values().iter().all(|v| v.is_finite() && *v >= 0.0));
                }
                let h = Tensor::from_fn(n, 4, |_, _| rng.normal());
                for m in [&sym, &rw] {
                    let fast = m.spmm(&h).unwrap();
                    let slow = naive(&m.to_dense(), &h);
                    for (a, b) in fast.data().iter().zip(slow.data()) {
                        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() <= 1e-15);
                    }
                }
            }
        }
    }
}
