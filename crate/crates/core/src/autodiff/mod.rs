//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records each primitive together with its cached output. Model
//! parameters live in a [`ParamStore`]; the tape reads them through
//! [`Tape::param`] and [`Tape::backward`] writes their gradients back.

mod gradcheck;
mod param;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{NodeId, Tape};
