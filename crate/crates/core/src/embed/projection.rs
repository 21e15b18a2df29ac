use crate::autodiff::{ParamId, ParameterSet, Real, Tape, Var};
use crate::error::Result;

/// Linear map from word-vector space (`d`) to the hidden size `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Projection {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Projection {
    /// `W x + b` for a `d × 1` input.
    pub fn project<T: Real>(&self, tape: &mut Tape<T>, params: &ParameterSet<T>, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        let wx = tape.matmul(w, x)?;
        tape.add(wx, b)
    }
}
