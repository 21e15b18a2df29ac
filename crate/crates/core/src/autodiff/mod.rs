//! Dense matrices with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] is built per example, since sequence lengths differ between examples.
//! Parameters live in a [`ParameterSet`] and are bound onto the tape by id; calling
//! [`Tape::backward`] on a scalar returns their gradients as [`ParamGrads`].

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, Objective, TapeObjective, DEFAULT_STEP};
pub use params::{GradBuf, Param, ParamGrads, ParamGroup, ParamId, ParamRecord, ParameterSet};
pub use tape::{Binary, Broadcast, Gradients, Tape, Unary, Var, MASKED_SCORE};
pub use tensor::{Precision, Real, Tensor};
