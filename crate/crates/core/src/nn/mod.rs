//! Graph convolutions, skip-connection variants, the gated feed-forward block
//! and the encoder → blocks → decoder stack.

mod model;
mod spec;

pub use model::{Forward, GraphOperators, LayerParams, UdgnnModel};
pub use spec::{ConvKind, ModelSpec, SkipKind};
