use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::dropout::{check_rate, Phase};
use crate::autodiff::{Objective, ParamGrads, ParamGroup, ParameterSet, Real, Tape};
use crate::data::{make_batches, Batch, EncodedExample};
use crate::error::{Error, Result};
use crate::model::{argmax, EntailModel};

/// Optimization settings. Batch size, epoch budget, and patience are free knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    /// Strength λ of the `λ · ½‖θ_M‖²` penalty.
    pub l2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a better selection score before stopping; `None` never stops early.
    pub patience: Option<usize>,
    /// Stop once training accuracy reaches this value.
    pub stop_at_train_acc: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            dropout: 0.0,
            l2: 0.0,
            batch_size: 32,
            max_epochs: 20,
            patience: Some(5),
            stop_at_train_acc: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_rate(self.dropout)?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 strength {} must be finite and non-negative", self.l2)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epoch budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Objective on the training set at inference: mean cross-entropy plus the ℓ2 term.
    pub train_loss: f64,
    pub train_acc: f64,
    pub dev_acc: Option<f64>,
}

impl EpochRecord {
    /// Dev accuracy, or training accuracy when there is no dev set.
    pub fn selection_score(&self) -> f64 {
        self.dev_acc.unwrap_or(self.train_acc)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

impl RunHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.iter().find(|r| r.epoch == e))
    }

    pub fn best_score(&self) -> f64 {
        self.best().map_or(f64::NAN, EpochRecord::selection_score)
    }

    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub struct TrainOutcome<T> {
    /// Parameters of the best epoch by selection score.
    pub best: ParameterSet<T>,
    pub last: ParameterSet<T>,
    pub history: RunHistory,
}

/// Derives a child seed; distinct inputs give unrelated streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3u64, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}

/// Mean cross-entropy of `batch` and its gradient. Examples run in parallel, each on
/// its own tape; gradients are summed in example order so the result does not depend
/// on scheduling. With `dropout = Some((rate, seed))`, example `i` draws its masks from
/// a stream derived from `(seed, i)`.
pub fn batch_gradient<T: Real>(
    model: &EntailModel,
    params: &ParameterSet<T>,
    batch: &Batch,
    dropout: Option<(f64, u64)>,
) -> Result<(f64, ParamGrads<T>)> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let per_example: Vec<(f64, ParamGrads<T>)> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let mut tape = Tape::new();
            let mut rng;
            let mut phase = match dropout {
                Some((rate, seed)) => {
                    rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, i as u64]));
                    Phase::Train { dropout: rate, rng: &mut rng }
                }
                None => Phase::Inference,
            };
            let (loss, _) = model.example_loss(&mut tape, params, batch.row(i), &mut phase)?;
            let value = tape.value(loss).item().to_f64();
            Ok((value, tape.backward(loss)?.params))
        })
        .collect::<Result<_>>()?;

    let n = batch.len();
    let mut total = 0.0;
    let mut grads = ParamGrads::new();
    for (loss, g) in &per_example {
        total += loss;
        grads.accumulate(g);
    }
    grads.scale(T::from_f64(1.0 / n as f64));
    Ok((total / n as f64, grads))
}

/// Adds `λ θ` to the gradient of every model-group parameter.
pub fn add_l2<T: Real>(params: &ParameterSet<T>, grads: &mut ParamGrads<T>, l2: f64) {
    if l2 == 0.0 {
        return;
    }
    let lambda = T::from_f64(l2);
    for (id, p) in params.iter() {
        if p.group == ParamGroup::Model {
            grads.add_dense(id, &p.value.scale(lambda));
        }
    }
}

/// Batch objective `mean CE + λ · ½‖θ_M‖²` at inference, for gradient checking.
pub struct BatchObjective<'a> {
    pub model: &'a EntailModel,
    pub batch: &'a Batch,
    pub l2: f64,
}

impl Objective for BatchObjective<'_> {
    fn evaluate(&self, params: &ParameterSet<f64>) -> Result<(f64, ParamGrads<f64>)> {
        let (ce, mut grads) = batch_gradient(self.model, params, self.batch, None)?;
        add_l2(params, &mut grads, self.l2);
        Ok((ce + self.l2 * params.half_sq_norm_model(), grads))
    }
}

/// Mean cross-entropy and accuracy at inference.
pub fn loss_and_accuracy<T: Real>(
    model: &EntailModel,
    params: &ParameterSet<T>,
    examples: &[EncodedExample],
) -> Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(Error::Input("no examples to evaluate".into()));
    }
    let scored: Vec<(f64, bool)> = examples
        .par_iter()
        .map(|e| {
            let z = model.logits(params, e.view())?;
            let y = e.label.index();
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            Ok((lse - z[y], argmax(&z) == y))
        })
        .collect::<Result<_>>()?;
    let n = scored.len() as f64;
    let loss = scored.iter().map(|s| s.0).sum::<f64>() / n;
    let acc = scored.iter().filter(|s| s.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Runs ADAM over seeded shuffles of `train`, scoring every epoch and keeping the
/// parameters with the best dev accuracy (training accuracy without a dev set).
pub fn train<T: Real>(
    model: &EntailModel,
    init: ParameterSet<T>,
    train: &[EncodedExample],
    dev: &[EncodedExample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    model.check_params(&init)?;
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let mut params = init;
    let mut adam = AdamState::new(&params);
    let mut history = RunHistory::default();
    let mut best = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        let batches = make_batches(train, config.batch_size, Some(derive_seed(&[config.seed, epoch as u64])));
        for (b, batch) in batches.iter().enumerate() {
            let drop = (config.dropout > 0.0).then(|| (config.dropout, derive_seed(&[config.seed, epoch as u64, b as u64, 1])));
            let (loss, mut grads) = batch_gradient(model, &params, batch, drop)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            add_l2(&params, &mut grads, config.l2);
            adam.step(&mut params, &grads, config.lr)?;
        }

        let (ce, train_acc) = loss_and_accuracy(model, &params, train)?;
        let train_loss = ce + config.l2 * params.half_sq_norm_model().to_f64();
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        let dev_acc = if dev.is_empty() {
            None
        } else {
            Some(loss_and_accuracy(model, &params, dev)?.1)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            dev_acc,
        };
        on_epoch(&record);
        let score = record.selection_score();
        history.epochs.push(record);

        if score > best_score {
            best_score = score;
            best = params.clone();
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        if config.patience.is_some_and(|p| stale >= p) {
            break;
        }
        if config.stop_at_train_acc.is_some_and(|t| train_acc >= t) {
            break;
        }
    }
    Ok(TrainOutcome {
        best,
        last: params,
        history,
    })
}
