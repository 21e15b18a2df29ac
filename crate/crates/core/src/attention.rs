//! Attention over premise outputs: from the final hypothesis output only, or anew at
//! every hypothesis word with a recurrent attention representation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamGroup, ParamId, ParameterSet, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Attention maps carry no biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnParams {
    pub w_y: ParamId,
    pub w_h: ParamId,
    /// Scoring vector stored as a `1 × k` row.
    pub w: ParamId,
    pub w_p: ParamId,
    pub w_x: ParamId,
    /// Word-by-word only: feeds `r_{t−1}` into the scores.
    pub w_r: Option<ParamId>,
    /// Word-by-word only: carries `r_{t−1}` into `r_t`.
    pub w_t: Option<ParamId>,
}

impl AttnParams {
    pub fn register<T: Real>(
        params: &mut ParameterSet<T>,
        prefix: &str,
        k: usize,
        word_by_word: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let s = 1.0 / (k as f64).sqrt();
        let mut mat = |name: &str, rows: usize, params: &mut ParameterSet<T>| {
            let t = Tensor::from_fn(rows, k, |_, _| T::from_f64(rng.gen_range(-s..s)));
            params.insert(format!("{prefix}.{name}"), ParamGroup::Model, t)
        };
        let w_y = mat("W_y", k, params);
        let w_h = mat("W_h", k, params);
        let w = mat("w", 1, params);
        let w_p = mat("W_p", k, params);
        let w_x = mat("W_x", k, params);
        let (w_r, w_t) = if word_by_word {
            (Some(mat("W_r", k, params)), Some(mat("W_t", k, params)))
        } else {
            (None, None)
        };
        AttnParams {
            w_y,
            w_h,
            w,
            w_p,
            w_x,
            w_r,
            w_t,
        }
    }

    pub fn lookup<T: Real>(params: &ParameterSet<T>, prefix: &str, word_by_word: bool) -> Result<Self> {
        let get = |name: &str| {
            params
                .id(&format!("{prefix}.{name}"))
                .ok_or_else(|| Error::Integrity(format!("missing parameter `{prefix}.{name}`")))
        };
        let (w_r, w_t) = if word_by_word {
            (Some(get("W_r")?), Some(get("W_t")?))
        } else {
            (None, None)
        };
        Ok(AttnParams {
            w_y: get("W_y")?,
            w_h: get("W_h")?,
            w: get("w")?,
            w_p: get("W_p")?,
            w_x: get("W_x")?,
            w_r,
            w_t,
        })
    }
}

/// Scores, weights, and the weighted premise representation for one query.
///
/// `projected_y` is `W_y Y`, shared across the steps of word-by-word attention.
fn attend_step<T: Real>(
    tape: &mut Tape<T>,
    params: &ParameterSet<T>,
    attn: &AttnParams,
    y: Var,
    projected_y: Var,
    query: Var,
    mask: &[bool],
) -> Result<(Var, Var)> {
    let len = tape.shape(y).1;
    let repeated = tape.broadcast_cols(query, len)?;
    let pre = tape.add(projected_y, repeated)?;
    let m = tape.tanh(pre)?;
    let w = tape.param(params, attn.w);
    let scores = tape.matmul(w, m)?;
    let alpha = tape.softmax_masked(scores, mask)?;
    let alpha_col = tape.transpose(alpha);
    let r = tape.matmul(y, alpha_col)?;
    Ok((alpha, r))
}

fn check_inputs<T: Real>(tape: &Tape<T>, y: Var, h: Var, mask: &[bool]) -> Result<()> {
    let (k, len) = tape.shape(y);
    if len == 0 {
        return Err(Error::EmptySequence { op: "attention" });
    }
    if mask.len() != len {
        return Err(Error::shape("attention mask", (1, len), (1, mask.len())));
    }
    if tape.shape(h) != (k, 1) {
        return Err(Error::shape("attention", tape.shape(y), tape.shape(h)));
    }
    Ok(())
}

/// Attention from the last output `h_N` over the premise outputs `Y` (`k × L`):
///
/// ```text
/// M = tanh(W_y Y + (W_h h_N) ⊗ e_L)
/// α = softmax(wᵀ M)
/// r = Y αᵀ
/// ```
///
/// Returns `α` as a `1 × L` row and `r` as a `k × 1` column.
pub fn attend_last<T: Real>(
    tape: &mut Tape<T>,
    params: &ParameterSet<T>,
    attn: &AttnParams,
    y: Var,
    h_n: Var,
    mask: &[bool],
) -> Result<(Var, Var)> {
    check_inputs(tape, y, h_n, mask)?;
    let w_y = tape.param(params, attn.w_y);
    let projected_y = tape.matmul(w_y, y)?;
    let w_h = tape.param(params, attn.w_h);
    let query = tape.matmul(w_h, h_n)?;
    attend_step(tape, params, attn, y, projected_y, query, mask)
}

/// `h* = tanh(W_p r + W_x h_N)`.
pub fn combine<T: Real>(tape: &mut Tape<T>, params: &ParameterSet<T>, attn: &AttnParams, r: Var, h_n: Var) -> Result<Var> {
    if tape.shape(r) != tape.shape(h_n) {
        return Err(Error::shape("combine", tape.shape(r), tape.shape(h_n)));
    }
    let w_p = tape.param(params, attn.w_p);
    let w_x = tape.param(params, attn.w_x);
    let a = tape.matmul(w_p, r)?;
    let b = tape.matmul(w_x, h_n)?;
    let sum = tape.add(a, b)?;
    tape.tanh(sum)
}

/// Output of [`attend_wordbyword`].
#[derive(Clone, Debug)]
pub struct WordByWord {
    /// One `1 × L` weight row per unmasked hypothesis step.
    pub alphas: Vec<Var>,
    /// Attention representation after the last unmasked hypothesis step.
    pub r_last: Var,
}

/// Attention recomputed at every hypothesis output `h_t`, starting from `r_0 = 0`:
///
/// ```text
/// M_t = tanh(W_y Y + (W_h h_t + W_r r_{t−1}) ⊗ e_L)
/// α_t = softmax(wᵀ M_t)
/// r_t = Y α_tᵀ + tanh(W_t r_{t−1})
/// ```
///
/// Steps with `hyp_mask` unset are skipped and leave `r` unchanged.
pub fn attend_wordbyword<T: Real>(
    tape: &mut Tape<T>,
    params: &ParameterSet<T>,
    attn: &AttnParams,
    y: Var,
    hyp_outputs: &[Var],
    hyp_mask: &[bool],
    mask: &[bool],
) -> Result<WordByWord> {
    let (Some(w_r), Some(w_t)) = (attn.w_r, attn.w_t) else {
        return Err(Error::Config("word-by-word attention needs W_r and W_t".into()));
    };
    if hyp_outputs.is_empty() || !hyp_mask.iter().any(|&m| m) {
        return Err(Error::EmptySequence { op: "attend_wordbyword" });
    }
    if hyp_mask.len() != hyp_outputs.len() {
        return Err(Error::shape("hypothesis mask", (hyp_outputs.len(), 1), (hyp_mask.len(), 1)));
    }
    check_inputs(tape, y, hyp_outputs[0], mask)?;

    let k = tape.shape(y).0;
    let w_y = tape.param(params, attn.w_y);
    let projected_y = tape.matmul(w_y, y)?;
    let w_h = tape.param(params, attn.w_h);
    let w_r = tape.param(params, w_r);
    let w_t = tape.param(params, w_t);

    let mut r = tape.constant(Tensor::zeros(k, 1));
    let mut alphas = Vec::new();
    for (&h_t, _) in hyp_outputs.iter().zip(hyp_mask).filter(|(_, &m)| m) {
        let wh = tape.matmul(w_h, h_t)?;
        let wr = tape.matmul(w_r, r)?;
        let query = tape.add(wh, wr)?;
        let (alpha, attended) = attend_step(tape, params, attn, y, projected_y, query, mask)?;
        let carried_pre = tape.matmul(w_t, r)?;
        let carried = tape.tanh(carried_pre)?;
        r = tape.add(attended, carried)?;
        alphas.push(alpha);
    }
    Ok(WordByWord { alphas, r_last: r })
}

/// Concatenates the premise→hypothesis and hypothesis→premise representations.
pub fn two_way<T: Real>(tape: &mut Tape<T>, forward: Var, reverse: Var) -> Result<Var> {
    if tape.shape(forward) != tape.shape(reverse) {
        return Err(Error::shape("two_way", tape.shape(forward), tape.shape(reverse)));
    }
    tape.concat_rows(forward, reverse)
}

/// Which attention a model uses, as written into attention records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionKind {
    Attention,
    Wordbyword,
}

/// Attention weights of one prediction, for visualization.
///
/// `weights` has one row for last-output attention and one row per hypothesis token for
/// word-by-word attention; columns follow premise tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub variant: String,
    pub predicted: String,
    pub gold: Option<String>,
    /// Hypothesis→premise direction of a two-way model (premise and hypothesis swapped).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_weights: Option<Vec<Vec<f64>>>,
}

impl AttentionRecord {
    /// Largest deviation of any row sum from 1; infinite if a weight is negative.
    pub fn simplex_violation(&self) -> f64 {
        let rows = self.weights.iter().chain(self.reverse_weights.iter().flatten());
        rows.map(|r| {
            let neg = r.iter().any(|&w| w < 0.0);
            if neg {
                f64::INFINITY
            } else {
                (r.iter().sum::<f64>() - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
    }
}
