//! Dataset file format: one JSON object
//! `{"n", "edges", "features", "labels", "splits": {"train","val","test"}, "n_classes"}`.
//! Each undirected edge is listed once as `[u, v]` with `u < v`. Keys are
//! written in that order and accepted in any order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NodeDataset, SparseGraph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Splits {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    splits: Splits,
    n_classes: usize,
}

pub fn write_dataset<W: Write>(graph: &SparseGraph, data: &NodeDataset, mut w: W) -> Result<()> {
    if graph.n_nodes() != data.n_nodes() {
        return Err(Error::Dataset(format!(
            "graph has {} nodes, dataset has {}",
            graph.n_nodes(),
            data.n_nodes()
        )));
    }
    data.validate()?;
    let file = DatasetFile {
        n: graph.n_nodes(),
        edges: graph.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        features: data.features.to_rows(),
        labels: data.labels.clone(),
        splits: Splits {
            train: data.train_indices(),
            val: data.val_indices(),
            test: data.test_indices(),
        },
        n_classes: data.n_classes,
    };
    let ctx = || "dataset".to_string();
    serde_json::to_writer(&mut w, &file).map_err(|source| Error::Json { context: ctx(), source })?;
    w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<(SparseGraph, NodeDataset)> {
    let file: DatasetFile = serde_json::from_reader(r).map_err(|source| Error::Json {
        context: "dataset".into(),
        source,
    })?;
    let n = file.n;
    if file.features.len() != n {
        return Err(Error::Dataset(format!("{} feature rows for n = {n}", file.features.len())));
    }
    if file.labels.len() != n {
        return Err(Error::Dataset(format!("{} labels for n = {n}", file.labels.len())));
    }
    for &[u, v] in &file.edges {
        if u >= n || v >= n {
            return Err(Error::Dataset(format!("edge [{u},{v}] index out of range for n = {n}")));
        }
    }
    let edges: Vec<(usize, usize)> = file.edges.iter().map(|&[u, v]| (u, v)).collect();
    let graph = SparseGraph::from_edges(n, &edges).map_err(|e| Error::Dataset(e.to_string()))?;
    let features = Tensor::from_rows(&file.features).map_err(|e| Error::Dataset(e.to_string()))?;
    let features = if n == 0 { Tensor::zeros(0, 0) } else { features };

    let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
    let names = ["train", "val", "test"];
    let lists = [&file.splits.train, &file.splits.val, &file.splits.test];
    for ((mask, name), list) in masks.iter_mut().zip(names).zip(lists) {
        for &i in list {
            if i >= n {
                return Err(Error::Dataset(format!("{name} split index {i} out of range for n = {n}")));
            }
            mask[i] = true;
        }
    }
    let [train_mask, val_mask, test_mask] = masks;
    let data = NodeDataset {
        features,
        labels: file.labels,
        train_mask,
        val_mask,
        test_mask,
        n_classes: file.n_classes,
    };
    data.validate()?;
    Ok((graph, data))
}

pub fn save_dataset(graph: &SparseGraph, data: &NodeDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_dataset(graph, data, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(SparseGraph, NodeDataset)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_dataset(bytes.as_slice())
}
