use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Stage, Token, Vocabulary, DELIM_ID, PAD_ID, UNK_ID};
use super::word2vec::Pretrained;
use crate::autodiff::{ParamId, ParameterSet, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Half-width of the uniform range used for random word vectors.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "row", rename_all = "lowercase")]
pub enum RowKind {
    /// Zero vector; padding positions are never read by the model.
    Padding,
    /// Row of the fixed pretrained matrix.
    Frozen(usize),
    /// Row of the trainable embedding parameter.
    Tunable(usize),
}

/// Word vectors for a vocabulary: pretrained rows stay fixed, words without a
/// pretrained vector get trainable rows, and words first seen at inference get
/// deterministic random vectors derived from their hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    kinds: Vec<RowKind>,
    frozen: Vec<f64>,
    tunable: usize,
    oov_seed: u64,
}

/// Vector returned by [`EmbeddingTable::lookup`].
#[derive(Clone, Debug, PartialEq)]
pub struct Lookup<T> {
    pub vector: Vec<T>,
    pub tunable: bool,
}

impl EmbeddingTable {
    /// `pretrained` supplies frozen rows; every other word plus `<delim>` and `<unk>`
    /// becomes a tunable row.
    pub fn new(vocab: &Vocabulary, pretrained: Option<&Pretrained>, dim: usize, oov_seed: u64) -> Result<Self> {
        if let Some(p) = pretrained {
            if p.dim != dim {
                return Err(Error::Config(format!(
                    "embedding dimension {dim} does not match pretrained dimension {}",
                    p.dim
                )));
            }
        }
        let mut kinds = Vec::with_capacity(vocab.len());
        let mut frozen = Vec::new();
        let mut tunable = 0;
        for id in 0..vocab.len() {
            let kind = match (id, pretrained.and_then(|p| p.rows.get(&id))) {
                (PAD_ID, _) => RowKind::Padding,
                (DELIM_ID | UNK_ID, _) | (_, None) => {
                    tunable += 1;
                    RowKind::Tunable(tunable - 1)
                }
                (_, Some(v)) => {
                    frozen.extend_from_slice(v);
                    RowKind::Frozen(frozen.len() / dim - 1)
                }
            };
            kinds.push(kind);
        }
        Ok(EmbeddingTable {
            dim,
            kinds,
            frozen,
            tunable,
            oov_seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, id: usize) -> RowKind {
        self.kinds[id]
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.len() / self.dim.max(1)
    }

    pub fn tunable_count(&self) -> usize {
        self.tunable
    }

    pub fn frozen_row(&self, row: usize) -> &[f64] {
        &self.frozen[row * self.dim..(row + 1) * self.dim]
    }

    /// Initial values of the trainable rows, uniform in (−0.05, 0.05).
    pub fn init_tunable<T: Real>(&self, seed: u64) -> Tensor<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(self.tunable, self.dim, |_, _| {
            T::from_f64(rng.gen_range(-INIT_RANGE..INIT_RANGE))
        })
    }

    /// Fixed random vector for a word first seen at inference.
    pub fn unseen_vector<T: Real>(&self, hash: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(hash ^ self.oov_seed);
        (0..self.dim)
            .map(|_| T::from_f64(rng.gen_range(-INIT_RANGE..INIT_RANGE)))
            .collect()
    }

    /// Resolves a word to its vector. `tunable` holds the current trainable rows.
    pub fn lookup<T: Real>(&self, vocab: &Vocabulary, tunable: &Tensor<T>, word: &str, stage: Stage) -> Lookup<T> {
        match vocab.encode(word, stage) {
            Token::Known(id) => match self.kinds[id] {
                RowKind::Padding => Lookup {
                    vector: vec![T::zero(); self.dim],
                    tunable: false,
                },
                RowKind::Frozen(r) => Lookup {
                    vector: self.frozen_row(r).iter().map(|&v| T::from_f64(v)).collect(),
                    tunable: false,
                },
                RowKind::Tunable(r) => Lookup {
                    vector: tunable.row_slice(r).to_vec(),
                    tunable: true,
                },
            },
            Token::Unseen(h) => Lookup {
                vector: self.unseen_vector(h),
                tunable: false,
            },
        }
    }

    /// Records the `d × 1` vector for `token` on the tape. Only tunable rows are
    /// differentiable.
    pub fn input<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        tunable: Option<ParamId>,
        token: Token,
    ) -> Result<Var> {
        Ok(match token {
            Token::Known(id) => match self.kinds.get(id).copied() {
                None => return Err(Error::Input(format!("token id {id} outside vocabulary"))),
                Some(RowKind::Padding) => tape.constant(Tensor::zeros(self.dim, 1)),
                Some(RowKind::Frozen(r)) => {
                    let v: Vec<T> = self.frozen_row(r).iter().map(|&x| T::from_f64(x)).collect();
                    tape.constant(Tensor::column(&v))
                }
                Some(RowKind::Tunable(r)) => {
                    let id = tunable.ok_or_else(|| Error::Config("missing tunable embedding parameter".into()))?;
                    tape.embed_row(params, id, r)
                }
            },
            Token::Unseen(h) => tape.constant(Tensor::column(&self.unseen_vector::<T>(h))),
        })
    }
}
