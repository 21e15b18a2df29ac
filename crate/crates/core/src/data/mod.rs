//! Corpus ingestion, batching, and the synthetic alignment task.

mod batch;
mod snli;
mod synth;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use batch::{make_batches, Batch, EncodedExample, PairView};
pub use snli::{parse_snli, read_snli, write_snli, SnliCorpus};
pub use synth::{gen_synth, synth_label, SynthDataset, SynthSpec};
pub use tokenize::tokenize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Label> {
        Label::ALL.get(i).copied().ok_or(Error::Label {
            label: i,
            classes: 3,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A tokenized premise/hypothesis pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub pair_id: String,
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub label: Label,
}

impl Example {
    pub fn new(pair_id: impl Into<String>, premise: Vec<String>, hypothesis: Vec<String>, label: Label) -> Result<Self> {
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(Error::Input("premise and hypothesis must be non-empty".into()));
        }
        Ok(Example {
            pair_id: pair_id.into(),
            premise,
            hypothesis,
            label,
        })
    }
}
