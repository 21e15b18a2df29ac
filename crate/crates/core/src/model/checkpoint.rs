use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntailModel, ModelConfig};
use crate::autodiff::{ParamRecord, ParameterSet, Precision, Real};
use crate::embed::{EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "entail-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a trained model: configuration, vocabulary (with its
/// SHA-256), word-vector table, and every named parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub precision: Precision,
    pub vocab_hash: String,
    pub vocab: Vec<String>,
    pub embeddings: EmbeddingTable,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new<T: Real>(model: &EntailModel, params: &ParameterSet<T>) -> Result<Self> {
        model.check_params(params)?;
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            precision: T::PRECISION,
            vocab_hash: model.vocab().hash(),
            vocab: model.vocab().tokens().to_vec(),
            embeddings: model.embeddings().clone(),
            params: params.to_records(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Format(format!("{}: not a checkpoint: {e}", path.display())))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Rebuilds the model and its parameters, verifying the vocabulary hash and the
    /// parameter layout.
    pub fn restore<T: Real>(&self) -> Result<(EntailModel, ParameterSet<T>)> {
        let vocab = Vocabulary::from_tokens(self.vocab.clone())?;
        let hash = vocab.hash();
        if hash != self.vocab_hash {
            return Err(Error::Integrity(format!(
                "vocabulary hash mismatch: checkpoint records {}, contents hash to {hash}",
                self.vocab_hash
            )));
        }
        let model = EntailModel::new(self.config.clone(), vocab, self.embeddings.clone())?;
        let params = ParameterSet::from_records(&self.params)?;
        model.check_params(&params)?;
        Ok((model, params))
    }

    /// Fails unless the checkpoint was built over a vocabulary hashing to `expected`.
    pub fn expect_vocab(&self, expected: &str) -> Result<()> {
        if self.vocab_hash != expected {
            return Err(Error::Integrity(format!(
                "vocabulary hash mismatch: expected {expected}, checkpoint has {}",
                self.vocab_hash
            )));
        }
        Ok(())
    }
}
