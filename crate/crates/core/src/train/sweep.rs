use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeDataset, SparseGraph};
use crate::nn::{ConvKind, GraphOperators, ModelSpec, UdgnnModel};
use crate::rng::derive_seed;

pub const SWEEP_HEADER: &str = "variant,conv,depth,repeat,seed,val_acc,test_acc,best_epoch,wall_ms";

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Variant names as accepted by [`ModelSpec::parse_variant`].
    pub variants: Vec<String>,
    pub convs: Vec<ConvKind>,
    pub depths: Vec<usize>,
    pub repeats: usize,
    /// Width, gates, dropout and propagation kind for every cell.
    pub template: ModelSpec,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variant: String,
    pub conv: String,
    pub depth: usize,
    pub repeat: usize,
    pub seed: u64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub wall_ms: u64,
}

/// Worker count from `UDGNN_THREADS`, else the machine's core count.
pub fn sweep_threads() -> usize {
    std::env::var("UDGNN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct Cell {
    variant: String,
    spec: ModelSpec,
    repeat: usize,
    seed: u64,
    init_seed: u64,
}

impl SweepPlan {
    /// Checks names, lists and every cell's model spec without training.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.cells().map(|_| ())
    }

    fn cells(&self) -> Result<Vec<Cell>> {
        let bad = |field, reason: String| Err(Error::config("sweep", field, reason));
        if self.variants.is_empty() {
            return bad("variants", "must not be empty".into());
        }
        if self.convs.is_empty() {
            return bad("convs", "must not be empty".into());
        }
        if self.depths.is_empty() {
            return bad("depths", "must not be empty".into());
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1".into());
        }
        let mut cells = Vec::new();
        for name in &self.variants {
            let Some((skip_kind, with_ffn)) = ModelSpec::parse_variant(name) else {
                return bad(
                    "variants",
                    format!("unknown variant `{name}`; valid names: {}", ModelSpec::VARIANT_NAMES.join(", ")),
                );
            };
            for &conv_kind in &self.convs {
                for &depth in &self.depths {
                    let spec = ModelSpec {
                        conv_kind,
                        skip_kind,
                        with_ffn,
                        depth,
                        ..self.template.clone()
                    };
                    spec.validate()?;
                    for repeat in 0..self.repeats {
                        let key = format!("{name}/{}/{depth}/{repeat}", conv_kind.name());
                        cells.push(Cell {
                            variant: name.clone(),
                            spec: spec.clone(),
                            repeat,
                            seed: derive_seed(self.config.seed, &key),
                            // Shared across variants and depths so encoder and
                            // decoder start identical within a repeat.
                            init_seed: derive_seed(self.config.seed, &format!("init/{repeat}")),
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Trains every (variant, conv, depth, repeat) cell. Rows come back in plan
/// order whatever the completion order.
pub fn depth_sweep(graph: &SparseGraph, data: &NodeDataset, plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    let cells = plan.cells()?;
    let ops = GraphOperators::new(graph, plan.template.propagation_kind);
    let run = |cell: &Cell| -> Result<SweepRow> {
        let mut model = UdgnnModel::new(&cell.spec, data.feature_dim(), data.n_classes, cell.init_seed)?;
        let config = TrainConfig {
            seed: cell.seed,
            ..plan.config.clone()
        };
        let report = train(&mut model, &ops, data, &config)?;
        Ok(SweepRow {
            variant: cell.variant.clone(),
            conv: cell.spec.conv_kind.name().to_string(),
            depth: cell.spec.depth,
            repeat: cell.repeat,
            seed: cell.seed,
            val_acc: report.best_val_acc,
            test_acc: report.test_acc,
            best_epoch: report.best_epoch,
            wall_ms: report.wall_ms,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads())
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(run).collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(SWEEP_HEADER.split(','))?;
    }
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| Error::io("<csv writer>", e))
}
