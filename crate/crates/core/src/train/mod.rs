mod adam;
mod config;
mod sweep;
mod trainer;

pub use adam::adam_step;
pub use config::{EpochRecord, TrainConfig, TrainReport};
pub use sweep::{depth_sweep, sweep_threads, write_sweep_csv, SweepPlan, SweepRow, SWEEP_HEADER};
pub use trainer::{accuracy, argmax_rows, evaluate, train, train_with_observer, EpochView};
