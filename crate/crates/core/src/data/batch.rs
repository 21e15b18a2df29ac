use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Example, Label};
use crate::embed::{Stage, Token, Vocabulary};

/// An example after vocabulary lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedExample {
    pub premise: Vec<Token>,
    pub hypothesis: Vec<Token>,
    pub label: Label,
}

impl EncodedExample {
    pub fn encode(example: &Example, vocab: &Vocabulary, stage: Stage) -> Self {
        EncodedExample {
            premise: vocab.encode_all(&example.premise, stage),
            hypothesis: vocab.encode_all(&example.hypothesis, stage),
            label: example.label,
        }
    }

    pub fn view(&self) -> PairView<'_> {
        PairView {
            premise: &self.premise,
            premise_mask: None,
            hypothesis: &self.hypothesis,
            hypothesis_mask: None,
            label: self.label,
        }
    }
}

/// Right-padded token matrices with masks, one row per example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub premise: Vec<Vec<Token>>,
    pub premise_mask: Vec<Vec<bool>>,
    pub hypothesis: Vec<Vec<Token>>,
    pub hypothesis_mask: Vec<Vec<bool>>,
    pub labels: Vec<Label>,
}

/// One premise/hypothesis pair, possibly padded. A missing mask means all positions
/// are real.
#[derive(Clone, Copy, Debug)]
pub struct PairView<'a> {
    pub premise: &'a [Token],
    pub premise_mask: Option<&'a [bool]>,
    pub hypothesis: &'a [Token],
    pub hypothesis_mask: Option<&'a [bool]>,
    pub label: Label,
}

impl PairView<'_> {
    pub fn premise_mask(&self) -> Vec<bool> {
        self.premise_mask
            .map_or_else(|| vec![true; self.premise.len()], <[bool]>::to_vec)
    }

    pub fn hypothesis_mask(&self) -> Vec<bool> {
        self.hypothesis_mask
            .map_or_else(|| vec![true; self.hypothesis.len()], <[bool]>::to_vec)
    }
}

fn pad(rows: &[&[Token]]) -> (Vec<Vec<Token>>, Vec<Vec<bool>>) {
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let mut tokens = r.to_vec();
            tokens.resize(width, Token::PAD);
            let mut mask = vec![true; r.len()];
            mask.resize(width, false);
            (tokens, mask)
        })
        .unzip()
}

impl Batch {
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a EncodedExample>) -> Batch {
        let examples: Vec<&EncodedExample> = examples.into_iter().collect();
        let premises: Vec<&[Token]> = examples.iter().map(|e| e.premise.as_slice()).collect();
        let hypotheses: Vec<&[Token]> = examples.iter().map(|e| e.hypothesis.as_slice()).collect();
        let (premise, premise_mask) = pad(&premises);
        let (hypothesis, hypothesis_mask) = pad(&hypotheses);
        Batch {
            premise,
            premise_mask,
            hypothesis,
            hypothesis_mask,
            labels: examples.iter().map(|e| e.label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> PairView<'_> {
        PairView {
            premise: &self.premise[i],
            premise_mask: Some(&self.premise_mask[i]),
            hypothesis: &self.hypothesis[i],
            hypothesis_mask: Some(&self.hypothesis_mask[i]),
            label: self.labels[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = PairView<'_>> {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Strips padding, recovering the encoded examples.
    pub fn unbatch(&self) -> Vec<EncodedExample> {
        let strip = |tokens: &[Token], mask: &[bool]| -> Vec<Token> {
            tokens.iter().zip(mask).filter(|(_, &m)| m).map(|(t, _)| *t).collect()
        };
        (0..self.len())
            .map(|i| EncodedExample {
                premise: strip(&self.premise[i], &self.premise_mask[i]),
                hypothesis: strip(&self.hypothesis[i], &self.hypothesis_mask[i]),
                label: self.labels[i],
            })
            .collect()
    }
}

/// Splits `examples` into batches of at most `batch_size`, shuffled by `seed` when given.
pub fn make_batches(examples: &[EncodedExample], batch_size: usize, seed: Option<u64>) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
        .chunks(batch_size)
        .map(|chunk| Batch::from_examples(chunk.iter().map(|&i| &examples[i])))
        .collect()
}
