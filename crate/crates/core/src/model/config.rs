use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Conditional encoding with one LSTM shared by premise and hypothesis.
    ConditionalShared,
    /// Conditional encoding with separate premise and hypothesis LSTMs.
    Conditional,
    /// Attention from the last hypothesis output.
    Attention,
    /// Word-by-word attention.
    Wordbyword,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::ConditionalShared,
        Architecture::Conditional,
        Architecture::Attention,
        Architecture::Wordbyword,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::ConditionalShared => "conditional-shared",
            Architecture::Conditional => "conditional",
            Architecture::Attention => "attention",
            Architecture::Wordbyword => "wordbyword",
        }
    }

    pub fn has_attention(self) -> bool {
        matches!(self, Architecture::Attention | Architecture::Wordbyword)
    }

    pub fn shares_lstm(self) -> bool {
        self == Architecture::ConditionalShared
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model variant `{s}`")))
    }
}

/// Shape of one model: which architecture, its sizes, and the classifier layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Attend in both directions and concatenate the two representations.
    pub two_way: bool,
    /// Hidden size `k`.
    pub hidden: usize,
    /// Word-vector dimension `d`.
    pub embed_dim: usize,
    /// Insert a `tanh` layer of width `k` before the softmax layer.
    pub classifier_hidden: bool,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, hidden: usize, embed_dim: usize) -> Self {
        ModelConfig {
            architecture,
            two_way: false,
            hidden,
            embed_dim,
            classifier_hidden: false,
        }
    }

    pub fn two_way(mut self, on: bool) -> Self {
        self.two_way = on;
        self
    }

    pub fn classifier_hidden(mut self, on: bool) -> Self {
        self.classifier_hidden = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("hidden size and embedding dimension must be positive".into()));
        }
        if self.two_way && !self.architecture.has_attention() {
            return Err(Error::Config(format!(
                "two-way composition needs an attention model, not `{}`",
                self.architecture
            )));
        }
        Ok(())
    }

    /// Variant name, e.g. `wordbyword-two-way`.
    pub fn variant_name(&self) -> String {
        if self.two_way {
            format!("{}-two-way", self.architecture)
        } else {
            self.architecture.to_string()
        }
    }

    /// Width of the representation that enters the classifier.
    pub fn representation_width(&self) -> usize {
        if self.two_way {
            2 * self.hidden
        } else {
            self.hidden
        }
    }
}
