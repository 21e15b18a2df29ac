use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::data::Example;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const DELIM: &str = "<delim>";
pub const UNK: &str = "<unk>";

pub const PAD_ID: usize = 0;
pub const DELIM_ID: usize = 1;
pub const UNK_ID: usize = 2;

const RESERVED: [&str; 3] = [PAD, DELIM, UNK];

/// Whether a lookup happens while fitting parameters or when evaluating.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Train,
    Inference,
}

/// An encoded token: a vocabulary index, or the stable hash of a word first seen at
/// inference time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Known(usize),
    Unseen(u64),
}

impl Token {
    pub const PAD: Token = Token::Known(PAD_ID);
    pub const DELIM: Token = Token::Known(DELIM_ID);
}

/// Bijection between token strings and indices. Indices 0..3 are the reserved
/// `<pad>`, `<delim>`, and `<unk>` entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds the vocabulary of a training corpus: reserved entries first, then words by
    /// descending frequency with ties broken alphabetically.
    pub fn build(examples: &[Example]) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for e in examples {
            for t in e.premise.iter().chain(&e.hypothesis) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, _)| !RESERVED.contains(w))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_words(words.into_iter().map(|(w, _)| w.to_string()))
            .expect("reserved tokens filtered out")
    }

    /// Reserved entries followed by `words` in order.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(words).collect();
        Self::from_tokens(tokens)
    }

    /// Restores a vocabulary from its full token list (reserved entries included).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Format("vocabulary must start with <pad>, <delim>, <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Words other than the reserved entries.
    pub fn words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .map(|(i, t)| (i, t.as_str()))
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// Unknown words map to `<unk>` while training and to a hashed [`Token::Unseen`] at
    /// inference.
    pub fn encode(&self, token: &str, stage: Stage) -> Token {
        match (self.id(token), stage) {
            (Some(i), _) => Token::Known(i),
            (None, Stage::Train) => Token::Known(UNK_ID),
            (None, Stage::Inference) => Token::Unseen(token_hash(token)),
        }
    }

    pub fn encode_all(&self, tokens: &[String], stage: Stage) -> Vec<Token> {
        tokens.iter().map(|t| self.encode(t, stage)).collect()
    }

    /// SHA-256 over the newline-joined token list, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One `index<TAB>token` line per entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            out.push_str(&format!("{i}\t{t}\n"));
        }
        out
    }
}

/// First eight bytes of SHA-256 of the token, little endian.
pub fn token_hash(token: &str) -> u64 {
    let digest = Sha256::digest(token.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
