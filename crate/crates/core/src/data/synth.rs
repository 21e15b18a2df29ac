//! Planted-correspondence entailment task.
//!
//! Words are `w0 … w{V-1}`. The first `2 · antonym_pairs` words form antonym pairs
//! `(w0, w1), (w2, w3), …`; a premise never holds both members of a pair. Labels:
//!
//! * contradiction: some hypothesis word's antonym occurs in the premise;
//! * entailment: otherwise, if every hypothesis word occurs in the premise;
//! * neutral: otherwise.
//!
//! Each hypothesis word is planted against one premise position (its own occurrence,
//! or its antonym's), except the novel word of a neutral pair.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, Label};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub antonym_pairs: usize,
    /// Inclusive premise length range.
    pub premise_len: (usize, usize),
    /// Inclusive hypothesis length range; clipped to the premise length.
    pub hypothesis_len: (usize, usize),
    pub size: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 50,
            antonym_pairs: 10,
            premise_len: (4, 7),
            hypothesis_len: (2, 4),
            size: 3000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let (pl, ph) = self.premise_len;
        let (hl, hh) = self.hypothesis_len;
        if pl == 0 || hl == 0 || pl > ph || hl > hh {
            return Err(Error::Config("length ranges must be non-empty and start at 1 or more".into()));
        }
        if self.antonym_pairs == 0 {
            return Err(Error::Config("at least one antonym pair is needed".into()));
        }
        // Worst case premise: one member of every pair plus all plain words must cover
        // the longest premise, with one spare word left for neutral hypotheses.
        let plain = self.vocab_size.saturating_sub(2 * self.antonym_pairs);
        if self.antonym_pairs + plain < ph + 1 {
            return Err(Error::Config("vocabulary too small for the premise length".into()));
        }
        Ok(())
    }

    fn antonym(&self, w: usize) -> Option<usize> {
        (w < 2 * self.antonym_pairs).then_some(w ^ 1)
    }
}

/// Generated examples with their planted alignments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    #[serde(skip)]
    pub examples: Vec<Example>,
    /// Per example, per hypothesis token: the planted premise position.
    pub alignments: Vec<Vec<Option<usize>>>,
}

fn word(i: usize) -> String {
    format!("w{i}")
}

/// Label implied by the task rule, computed from the tokens alone.
pub fn synth_label(spec: &SynthSpec, premise: &[String], hypothesis: &[String]) -> Label {
    let ids = |ts: &[String]| -> Vec<usize> { ts.iter().filter_map(|t| t.strip_prefix('w')?.parse().ok()).collect() };
    let p: HashSet<usize> = ids(premise).into_iter().collect();
    let h = ids(hypothesis);
    if h.iter().any(|&w| spec.antonym(w).is_some_and(|a| p.contains(&a))) {
        Label::Contradiction
    } else if h.iter().all(|w| p.contains(w)) {
        Label::Entailment
    } else {
        Label::Neutral
    }
}

pub fn gen_synth(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(spec.size);
    let mut alignments = Vec::with_capacity(spec.size);

    for n in 0..spec.size {
        let label = Label::ALL[rng.gen_range(0..3)];
        let (premise, hypothesis, alignment) = loop {
            if let Some(sample) = sample_pair(spec, label, &mut rng) {
                break sample;
            }
        };
        examples.push(Example::new(
            format!("synth{n}"),
            premise.iter().map(|&w| word(w)).collect(),
            hypothesis.iter().map(|&w| word(w)).collect(),
            label,
        )?);
        alignments.push(alignment);
    }
    Ok(SynthDataset { examples, alignments })
}

type Sample = (Vec<usize>, Vec<usize>, Vec<Option<usize>>);

fn sample_pair(spec: &SynthSpec, label: Label, rng: &mut ChaCha8Rng) -> Option<Sample> {
    let len = rng.gen_range(spec.premise_len.0..=spec.premise_len.1);
    let mut candidates: Vec<usize> = (0..spec.vocab_size).collect();
    candidates.shuffle(rng);
    let mut premise = Vec::with_capacity(len);
    for w in candidates {
        if premise.len() == len {
            break;
        }
        if spec.antonym(w).is_some_and(|a| premise.contains(&a)) {
            continue;
        }
        premise.push(w);
    }
    if premise.len() < len {
        return None;
    }

    let hlen = rng.gen_range(spec.hypothesis_len.0..=spec.hypothesis_len.1).min(len);
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(rng);

    let (planted_word, planted_pos) = match label {
        Label::Entailment => {
            let picked = &positions[..hlen];
            let hyp = picked.iter().map(|&p| premise[p]).collect();
            return Some((premise, hyp, picked.iter().map(|&p| Some(p)).collect()));
        }
        Label::Contradiction => {
            let p = *positions.iter().find(|&&p| spec.antonym(premise[p]).is_some())?;
            (spec.antonym(premise[p])?, Some(p))
        }
        Label::Neutral => {
            let novel: Vec<usize> = (0..spec.vocab_size)
                .filter(|w| !premise.contains(w) && !spec.antonym(*w).is_some_and(|a| premise.contains(&a)))
                .collect();
            (*novel.choose(rng)?, None)
        }
    };

    let others: Vec<usize> = positions
        .iter()
        .copied()
        .filter(|&p| Some(p) != planted_pos)
        .take(hlen - 1)
        .collect();
    let mut hyp: Vec<usize> = others.iter().map(|&p| premise[p]).collect();
    let mut align: Vec<Option<usize>> = others.iter().map(|&p| Some(p)).collect();
    let at = rng.gen_range(0..=hyp.len());
    hyp.insert(at, planted_word);
    align.insert(at, planted_pos);
    Some((premise, hyp, align))
}
