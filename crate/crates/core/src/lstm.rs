//! LSTM cell and a masked sequence runner.

use rand::Rng;

use crate::autodiff::{ParamGroup, ParamId, ParameterSet, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Gate matrices act on the stacked `[x_t; h_{t−1}]`, so each is `k × 2k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub w_input: ParamId,
    pub w_forget: ParamId,
    pub w_output: ParamId,
    pub w_cell: ParamId,
    pub b_input: ParamId,
    pub b_forget: ParamId,
    pub b_output: ParamId,
    pub b_cell: ParamId,
}

/// Forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

impl LstmParams {
    pub const NAMES: [&'static str; 8] = ["W_i", "W_f", "W_o", "W_c", "b_i", "b_f", "b_o", "b_c"];

    /// Registers the eight tensors under `prefix`. Weights are uniform in
    /// (−1/√k, 1/√k); the forget bias starts at 1 and the other biases at 0.
    pub fn register<T: Real>(params: &mut ParameterSet<T>, prefix: &str, k: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (k as f64).sqrt();
        let mut weight = |name: &str, params: &mut ParameterSet<T>| {
            let w = Tensor::from_fn(k, 2 * k, |_, _| T::from_f64(rng.gen_range(-s..s)));
            params.insert(format!("{prefix}.{name}"), ParamGroup::Model, w)
        };
        let w_input = weight("W_i", params);
        let w_forget = weight("W_f", params);
        let w_output = weight("W_o", params);
        let w_cell = weight("W_c", params);
        let mut bias = |name: &str, v: f64| {
            params.insert(format!("{prefix}.{name}"), ParamGroup::Model, Tensor::filled(k, 1, T::from_f64(v)))
        };
        LstmParams {
            w_input,
            w_forget,
            w_output,
            w_cell,
            b_input: bias("b_i", 0.0),
            b_forget: bias("b_f", FORGET_BIAS_INIT),
            b_output: bias("b_o", 0.0),
            b_cell: bias("b_c", 0.0),
        }
    }

    /// Resolves the tensors registered under `prefix`.
    pub fn lookup<T: Real>(params: &ParameterSet<T>, prefix: &str) -> Result<Self> {
        let get = |name: &str| {
            params
                .id(&format!("{prefix}.{name}"))
                .ok_or_else(|| Error::Integrity(format!("missing parameter `{prefix}.{name}`")))
        };
        Ok(LstmParams {
            w_input: get("W_i")?,
            w_forget: get("W_f")?,
            w_output: get("W_o")?,
            w_cell: get("W_c")?,
            b_input: get("b_i")?,
            b_forget: get("b_f")?,
            b_output: get("b_o")?,
            b_cell: get("b_c")?,
        })
    }

    pub fn hidden_size<T: Real>(&self, params: &ParameterSet<T>) -> usize {
        params.value(self.b_input).rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros<T: Real>(tape: &mut Tape<T>, k: usize) -> Self {
        let h = tape.constant(Tensor::zeros(k, 1));
        let c = tape.constant(Tensor::zeros(k, 1));
        LstmState { h, c }
    }
}

/// Output of [`encode`].
#[derive(Clone, Debug)]
pub struct EncodedSequence {
    /// `h_t` per position; a masked position repeats the previous output.
    pub outputs: Vec<Var>,
    /// State after the last unmasked position.
    pub last: LstmState,
    pub mask: Vec<bool>,
}

impl EncodedSequence {
    /// The `k × L` output matrix `[h_1 ⋯ h_L]`.
    pub fn matrix<T: Real>(&self, tape: &mut Tape<T>) -> Result<Var> {
        tape.concat_cols(&self.outputs)
    }
}

fn gate<T: Real>(tape: &mut Tape<T>, params: &ParameterSet<T>, w: ParamId, b: ParamId, stacked: Var) -> Result<Var> {
    let w = tape.param(params, w);
    let b = tape.param(params, b);
    let wh = tape.matmul(w, stacked)?;
    tape.add(wh, b)
}

/// One LSTM step:
///
/// ```text
/// H   = [x_t; h_{t−1}]
/// i_t = σ(W_i H + b_i)     f_t = σ(W_f H + b_f)     o_t = σ(W_o H + b_o)
/// c_t = f_t ⊙ c_{t−1} + i_t ⊙ tanh(W_c H + b_c)
/// h_t = o_t ⊙ tanh(c_t)
/// ```
pub fn lstm_step<T: Real>(
    tape: &mut Tape<T>,
    params: &ParameterSet<T>,
    lstm: &LstmParams,
    x: Var,
    state: LstmState,
) -> Result<LstmState> {
    let k = lstm.hidden_size(params);
    for v in [x, state.h, state.c] {
        if tape.shape(v) != (k, 1) {
            return Err(Error::shape("lstm_step", tape.shape(v), (k, 1)));
        }
    }
    let stacked = tape.concat_rows(x, state.h)?;
    let i_pre = gate(tape, params, lstm.w_input, lstm.b_input, stacked)?;
    let i = tape.sigmoid(i_pre)?;
    let f_pre = gate(tape, params, lstm.w_forget, lstm.b_forget, stacked)?;
    let f = tape.sigmoid(f_pre)?;
    let o_pre = gate(tape, params, lstm.w_output, lstm.b_output, stacked)?;
    let o = tape.sigmoid(o_pre)?;
    let g_pre = gate(tape, params, lstm.w_cell, lstm.b_cell, stacked)?;
    let g = tape.tanh(g_pre)?;

    let keep = tape.mul(f, state.c)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(o, tc)?;
    Ok(LstmState { h, c })
}

/// Runs the cell left to right from `init`. Masked positions leave the state untouched
/// and repeat the previous output (the initial `h` before any real token).
pub fn encode<T: Real>(
    tape: &mut Tape<T>,
    params: &ParameterSet<T>,
    lstm: &LstmParams,
    inputs: &[Var],
    init: LstmState,
    mask: &[bool],
) -> Result<EncodedSequence> {
    if inputs.is_empty() {
        return Err(Error::EmptySequence { op: "encode" });
    }
    if mask.len() != inputs.len() {
        return Err(Error::shape("encode mask", (inputs.len(), 1), (mask.len(), 1)));
    }
    let mut state = init;
    let mut outputs = Vec::with_capacity(inputs.len());
    for (&x, &m) in inputs.iter().zip(mask) {
        if m {
            state = lstm_step(tape, params, lstm, x, state)?;
        }
        outputs.push(state.h);
    }
    Ok(EncodedSequence {
        outputs,
        last: state,
        mask: mask.to_vec(),
    })
}
