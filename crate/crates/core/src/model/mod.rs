//! The four entailment architectures assembled from embeddings, conditional encoding,
//! optional attention, and a softmax classifier.

mod checkpoint;
mod config;
mod count;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Architecture, ModelConfig};
pub use count::{count_params, reference_count, CountReport, GroupCount, TOLERANCE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{attend_last, attend_wordbyword, combine, two_way, AttentionRecord, AttnParams};
use crate::autodiff::{ParamGroup, ParamId, ParameterSet, Real, Tape, Tensor, Var};
use crate::data::{Label, PairView};
use crate::embed::{EmbeddingTable, Projection, Stage, Token, Vocabulary};
use crate::error::{Error, Result};
use crate::lstm::{encode, LstmParams, LstmState};
use crate::train::{apply_dropout, Phase};

/// Resolved parameter handles. Registration order is fixed, so the ids are the same
/// for every parameter set built for one model.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    embed: ParamId,
    projection: Projection,
    premise_lstm: LstmParams,
    hypothesis_lstm: LstmParams,
    attn: Option<AttnParams>,
    hidden: Option<(ParamId, ParamId)>,
    output: (ParamId, ParamId),
}

/// A model configuration bound to its vocabulary and word vectors.
#[derive(Clone, Debug)]
pub struct EntailModel {
    config: ModelConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    layout: Layout,
    template: ParameterSet<f32>,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `3 × 1` unnormalized class scores.
    pub logits: Var,
    /// Attention rows of the premise→hypothesis direction.
    pub alphas: Vec<Var>,
    /// Attention rows of the hypothesis→premise direction (two-way only).
    pub reverse_alphas: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 3],
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionRecord>,
}

fn uniform<T: Real>(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    Tensor::from_fn(rows, cols, |_, _| T::from_f64(rng.gen_range(-scale..scale)))
}

/// Registers every tensor in the canonical order. Weight matrices are uniform in
/// (−1/√fan_in, 1/√fan_in); biases start at zero (forget gates at one).
fn register<T: Real>(
    config: &ModelConfig,
    embeddings: &EmbeddingTable,
    params: &mut ParameterSet<T>,
    seed: u64,
) -> Layout {
    let (k, d) = (config.hidden, config.embed_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embed = params.insert(
        "embed.tunable",
        ParamGroup::Embedding,
        embeddings.init_tunable(seed ^ 0x9e37_79b9_7f4a_7c15),
    );
    let sd = 1.0 / (d as f64).sqrt();
    let projection = Projection {
        weight: params.insert("proj.W", ParamGroup::Model, uniform(k, d, sd, &mut rng)),
        bias: params.insert("proj.b", ParamGroup::Model, Tensor::zeros(k, 1)),
    };
    let (premise_lstm, hypothesis_lstm) = if config.architecture.shares_lstm() {
        let shared = LstmParams::register(params, "lstm", k, &mut rng);
        (shared, shared)
    } else {
        (
            LstmParams::register(params, "premise_lstm", k, &mut rng),
            LstmParams::register(params, "hypothesis_lstm", k, &mut rng),
        )
    };
    let attn = config.architecture.has_attention().then(|| {
        let wbw = config.architecture == Architecture::Wordbyword;
        AttnParams::register(params, "attn", k, wbw, &mut rng)
    });
    let width = config.representation_width();
    let sw = 1.0 / (width as f64).sqrt();
    let (hidden, out_in) = if config.classifier_hidden {
        let w = params.insert("classifier.W1", ParamGroup::Model, uniform(k, width, sw, &mut rng));
        let b = params.insert("classifier.b1", ParamGroup::Model, Tensor::zeros(k, 1));
        (Some((w, b)), k)
    } else {
        (None, width)
    };
    let so = 1.0 / (out_in as f64).sqrt();
    let output = (
        params.insert("classifier.W", ParamGroup::Model, uniform(3, out_in, so, &mut rng)),
        params.insert("classifier.b", ParamGroup::Model, Tensor::zeros(3, 1)),
    );
    Layout {
        embed,
        projection,
        premise_lstm,
        hypothesis_lstm,
        attn,
        hidden,
        output,
    }
}

fn softmax3(z: &[f64]) -> [f64; 3] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    [e[0] / s, e[1] / s, e[2] / s]
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    // First maximum wins, so ties resolve deterministically.
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

impl EntailModel {
    pub fn new(config: ModelConfig, vocab: Vocabulary, embeddings: EmbeddingTable) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.embed_dim {
            return Err(Error::Config(format!(
                "model expects {}-dimensional word vectors, table has {}",
                config.embed_dim,
                embeddings.dim()
            )));
        }
        if embeddings.vocab_len() != vocab.len() {
            return Err(Error::Integrity(format!(
                "embedding table covers {} words, vocabulary has {}",
                embeddings.vocab_len(),
                vocab.len()
            )));
        }
        let mut template = ParameterSet::new();
        let layout = register(&config, &embeddings, &mut template, 0);
        Ok(EntailModel {
            config,
            vocab,
            embeddings,
            layout,
            template,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.embeddings
    }

    /// Fresh parameters drawn from `seed`.
    pub fn init_params<T: Real>(&self, seed: u64) -> ParameterSet<T> {
        let mut params = ParameterSet::new();
        let layout = register(&self.config, &self.embeddings, &mut params, seed);
        debug_assert_eq!(layout, self.layout);
        params
    }

    /// Fails with an integrity error unless `params` has this model's layout.
    pub fn check_params<T: Real>(&self, params: &ParameterSet<T>) -> Result<()> {
        self.template.check_layout(params)
    }

    /// Names of the tensors this model owns, in registration order.
    pub fn param_names(&self) -> Vec<&str> {
        self.template.iter().map(|(_, p)| p.name.as_str()).collect()
    }

    pub fn attention_params(&self) -> Option<&AttnParams> {
        self.layout.attn.as_ref()
    }

    pub fn lstm_params(&self) -> (LstmParams, LstmParams) {
        (self.layout.premise_lstm, self.layout.hypothesis_lstm)
    }

    fn inputs<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        tokens: &[Token],
        mask: &[bool],
        phase: &mut Phase<'_>,
    ) -> Result<Vec<Var>> {
        let mut pad = None;
        tokens
            .iter()
            .zip(mask)
            .map(|(&tok, &real)| {
                if !real {
                    let k = self.config.hidden;
                    return Ok(*pad.get_or_insert_with(|| tape.constant(Tensor::zeros(k, 1))));
                }
                let x = self.embeddings.input(tape, params, Some(self.layout.embed), tok)?;
                let p = self.layout.projection.project(tape, params, x)?;
                apply_dropout(tape, p, phase)
            })
            .collect()
    }

    /// One reading direction: `first` conditions the encoder of `second`. Returns the
    /// pair representation and any attention rows.
    fn direction<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        first: (&[Token], &[bool]),
        second: (&[Token], &[bool]),
        phase: &mut Phase<'_>,
    ) -> Result<(Var, Vec<Var>)> {
        let layout = &self.layout;
        let (p_tokens, p_mask) = first;
        let (h_tokens, h_mask) = second;

        let p_in = self.inputs(tape, params, p_tokens, p_mask, phase)?;
        let zeros = LstmState::zeros(tape, self.config.hidden);
        let premise = encode(tape, params, &layout.premise_lstm, &p_in, zeros, p_mask)?;

        // The hypothesis encoder reads the delimiter first, starting from h = 0 and the
        // premise's final cell state.
        let mut h_in = self.inputs(tape, params, &[Token::DELIM], &[true], phase)?;
        h_in.extend(self.inputs(tape, params, h_tokens, h_mask, phase)?);
        let mut mask = Vec::with_capacity(h_in.len());
        mask.push(true);
        mask.extend_from_slice(h_mask);
        let init = LstmState {
            h: zeros.h,
            c: premise.last.c,
        };
        let hypothesis = encode(tape, params, &layout.hypothesis_lstm, &h_in, init, &mask)?;
        let h_n = hypothesis.last.h;

        match (self.config.architecture, &layout.attn) {
            (Architecture::Attention, Some(attn)) => {
                let y = premise.matrix(tape)?;
                let (alpha, r) = attend_last(tape, params, attn, y, h_n, p_mask)?;
                Ok((combine(tape, params, attn, r, h_n)?, vec![alpha]))
            }
            (Architecture::Wordbyword, Some(attn)) => {
                let y = premise.matrix(tape)?;
                let out = attend_wordbyword(tape, params, attn, y, &hypothesis.outputs[1..], h_mask, p_mask)?;
                Ok((combine(tape, params, attn, out.r_last, h_n)?, out.alphas))
            }
            _ => Ok((h_n, Vec::new())),
        }
    }

    /// Records the full network for one pair.
    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        pair: PairView<'_>,
        phase: &mut Phase<'_>,
    ) -> Result<Forward> {
        let p_mask = pair.premise_mask();
        let h_mask = pair.hypothesis_mask();
        if p_mask.len() != pair.premise.len() || h_mask.len() != pair.hypothesis.len() {
            return Err(Error::Input("mask length differs from token count".into()));
        }
        if !p_mask.iter().any(|&m| m) || !h_mask.iter().any(|&m| m) {
            return Err(Error::Input("premise and hypothesis must each hold a token".into()));
        }
        let premise = (pair.premise, p_mask.as_slice());
        let hypothesis = (pair.hypothesis, h_mask.as_slice());

        let (forward, alphas) = self.direction(tape, params, premise, hypothesis, phase)?;
        let (rep, reverse_alphas) = if self.config.two_way {
            let (reverse, reverse_alphas) = self.direction(tape, params, hypothesis, premise, phase)?;
            (two_way(tape, forward, reverse)?, reverse_alphas)
        } else {
            (forward, Vec::new())
        };

        let mut z = apply_dropout(tape, rep, phase)?;
        if let Some((w1, b1)) = self.layout.hidden {
            let w1 = tape.param(params, w1);
            let b1 = tape.param(params, b1);
            let pre = tape.matmul(w1, z)?;
            let pre = tape.add(pre, b1)?;
            z = tape.tanh(pre)?;
        }
        let (w, b) = self.layout.output;
        let w = tape.param(params, w);
        let b = tape.param(params, b);
        let wz = tape.matmul(w, z)?;
        let logits = tape.add(wz, b)?;
        Ok(Forward {
            logits,
            alphas,
            reverse_alphas,
        })
    }

    /// Cross-entropy of one pair against its label.
    pub fn example_loss<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &ParameterSet<T>,
        pair: PairView<'_>,
        phase: &mut Phase<'_>,
    ) -> Result<(Var, Forward)> {
        let out = self.forward(tape, params, pair, phase)?;
        let loss = tape.cross_entropy(out.logits, pair.label.index())?;
        Ok((loss, out))
    }

    /// Class scores of one pair at inference.
    pub fn logits<T: Real>(&self, params: &ParameterSet<T>, pair: PairView<'_>) -> Result<[f64; 3]> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, params, pair, &mut Phase::Inference)?;
        let z = Self::values(&tape, out.logits);
        Ok([z[0], z[1], z[2]])
    }

    /// Class probabilities of one pair at inference.
    pub fn classify<T: Real>(&self, params: &ParameterSet<T>, pair: PairView<'_>) -> Result<[f64; 3]> {
        Ok(softmax3(&self.logits(params, pair)?))
    }

    fn values<T: Real>(tape: &Tape<T>, v: Var) -> Vec<f64> {
        tape.value(v).data().iter().map(|x| x.to_f64()).collect()
    }

    /// Tokenized pair → probabilities, label, and attention weights.
    pub fn predict<T: Real>(
        &self,
        params: &ParameterSet<T>,
        premise: &[String],
        hypothesis: &[String],
        gold: Option<Label>,
    ) -> Result<Prediction> {
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(Error::Input("premise and hypothesis must each hold a token".into()));
        }
        let p = self.vocab.encode_all(premise, Stage::Inference);
        let h = self.vocab.encode_all(hypothesis, Stage::Inference);
        let pair = PairView {
            premise: &p,
            premise_mask: None,
            hypothesis: &h,
            hypothesis_mask: None,
            label: gold.unwrap_or(Label::Entailment),
        };
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, params, pair, &mut Phase::Inference)?;
        let probs = softmax3(&Self::values(&tape, out.logits));
        let label = Label::from_index(argmax(&probs)).expect("three classes");
        let attention = self.config.architecture.has_attention().then(|| {
            let rows = |alphas: &[Var]| alphas.iter().map(|&a| Self::values(&tape, a)).collect::<Vec<_>>();
            AttentionRecord {
                premise: premise.to_vec(),
                hypothesis: hypothesis.to_vec(),
                weights: rows(&out.alphas),
                variant: self.config.variant_name(),
                predicted: label.as_str().to_string(),
                gold: gold.map(|g| g.as_str().to_string()),
                reverse_weights: self.config.two_way.then(|| rows(&out.reverse_alphas)),
            }
        });
        Ok(Prediction { probs, label, attention })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EncodedExample, Example};

    fn fixture(arch: Architecture, two_way: bool) -> (EntailModel, Vec<Example>) {
        let examples = vec![
            Example::new(
                "a",
                "a man rides a horse".split(' ').map(String::from).collect(),
                "a person rides".split(' ').map(String::from).collect(),
                Label::Entailment,
            )
            .unwrap(),
            Example::new(
                "b",
                "two dogs sleep".split(' ').map(String::from).collect(),
                "dogs run".split(' ').map(String::from).collect(),
                Label::Contradiction,
            )
            .unwrap(),
        ];
        let vocab = Vocabulary::build(&examples);
        let table = EmbeddingTable::new(&vocab, None, 5, 3).unwrap();
        let config = ModelConfig::new(arch, 4, 5).two_way(two_way);
        (EntailModel::new(config, vocab, table).unwrap(), examples)
    }

    #[test]
    fn zero_network_is_uniform() {
        for arch in Architecture::ALL {
            let (model, examples) = fixture(arch, false);
            let params = model.init_params::<f64>(1).zeroed();
            let e = &examples[0];
            let p = model.predict(&params, &e.premise, &e.hypothesis, None).unwrap();
            for v in p.probs {
                assert!((v - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layout_is_stable_across_seeds_and_precisions() {
        let (model, _) = fixture(Architecture::Wordbyword, true);
        let a = model.init_params::<f64>(1);
        let b = model.init_params::<f32>(2);
        model.check_params(&a).unwrap();
        model.check_params(&b).unwrap();
        assert!(model.param_names().contains(&"attn.W_t"));
        let (other, _) = fixture(Architecture::Attention, false);
        assert!(matches!(other.check_params(&a), Err(Error::Integrity(_))));
    }

    #[test]
    fn shared_variant_reuses_one_lstm() {
        let (model, _) = fixture(Architecture::ConditionalShared, false);
        let (p, h) = model.lstm_params();
        assert_eq!(p, h);
        let (model, _) = fixture(Architecture::Conditional, false);
        let (p, h) = model.lstm_params();
        assert_ne!(p, h);
    }

    #[test]
    fn attention_records_match_token_counts() {
        let (model, examples) = fixture(Architecture::Wordbyword, true);
        let params = model.init_params::<f64>(5);
        let e = &examples[0];
        let p = model.predict(&params, &e.premise, &e.hypothesis, Some(e.label)).unwrap();
        let rec = p.attention.unwrap();
        assert_eq!(rec.weights.len(), e.hypothesis.len());
        assert!(rec.weights.iter().all(|r| r.len() == e.premise.len()));
        let rev = rec.reverse_weights.as_ref().unwrap();
        assert_eq!(rev.len(), e.premise.len());
        assert!(rev.iter().all(|r| r.len() == e.hypothesis.len()));
        assert!(rec.simplex_violation() < 1e-6);
        assert_eq!(rec.variant, "wordbyword-two-way");
    }

    #[test]
    fn padding_does_not_change_predictions() {
        let (model, examples) = fixture(Architecture::Wordbyword, false);
        let params = model.init_params::<f64>(8);
        let encoded: Vec<EncodedExample> = examples
            .iter()
            .map(|e| EncodedExample::encode(e, model.vocab(), Stage::Train))
            .collect();
        let batch = crate::data::Batch::from_examples(&encoded);
        for (i, e) in encoded.iter().enumerate() {
            let padded = model.classify(&params, batch.row(i)).unwrap();
            let plain = model.classify(&params, e.view()).unwrap();
            assert_eq!(padded, plain);
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let (model, _) = fixture(Architecture::Conditional, false);
        let params = model.init_params::<f64>(0);
        assert!(matches!(
            model.predict(&params, &[], &["x".into()], None),
            Err(Error::Input(_))
        ));
    }
}
