//! Shared fixtures and a straight-line f64 transcription of the network, written
//! against parameter names only so it shares no code with the tape implementation.

#![allow(dead_code)]

pub mod prims;

use std::path::PathBuf;

use entail_core::autodiff::ParameterSet;
use entail_core::data::{parse_snli, Example, Label};
use entail_core::embed::{EmbeddingTable, Stage, Vocabulary};
use entail_core::model::{Architecture, EntailModel, ModelConfig};

pub type Vector = Vec<f64>;
/// Row-major: `m[i][j]` is row `i`, column `j`.
pub type Matrix = Vec<Vec<f64>>;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_128() -> Vec<Example> {
    parse_snli(&fixture_path("snli_128.jsonl")).expect("bundled fixture parses").examples
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn example(p: &str, h: &str, label: Label) -> Example {
    Example::new("t", words(p), words(h), label).unwrap()
}

/// Three short pairs over a dozen words.
pub fn tiny_corpus() -> Vec<Example> {
    vec![
        example("a man rides a horse", "a person rides", Label::Entailment),
        example("two dogs sleep", "dogs run", Label::Contradiction),
        example("a girl reads", "a girl reads a long book", Label::Neutral),
    ]
}

pub fn model(arch: Architecture, two_way: bool, k: usize, d: usize, examples: &[Example]) -> EntailModel {
    let vocab = Vocabulary::build(examples);
    let table = EmbeddingTable::new(&vocab, None, d, 11).unwrap();
    EntailModel::new(ModelConfig::new(arch, k, d).two_way(two_way), vocab, table).unwrap()
}

/// Every architecture plus the two-way attention variants.
pub fn variants() -> Vec<(Architecture, bool)> {
    vec![
        (Architecture::ConditionalShared, false),
        (Architecture::Conditional, false),
        (Architecture::Attention, false),
        (Architecture::Wordbyword, false),
        (Architecture::Attention, true),
        (Architecture::Wordbyword, true),
    ]
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

// ---- oracle -------------------------------------------------------------------

pub fn matrix(params: &ParameterSet<f64>, name: &str) -> Matrix {
    let t = params.by_name(name).unwrap_or_else(|| panic!("no parameter {name}"));
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

pub fn vector(params: &ParameterSet<f64>, name: &str) -> Vector {
    matrix(params, name).into_iter().map(|row| row[0]).collect()
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Vector {
    m.iter()
        .map(|row| {
            assert_eq!(row.len(), v.len(), "matvec shape");
            row.iter().zip(v).map(|(a, b)| a * b).sum()
        })
        .collect()
}

pub fn plus(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn tanh_v(v: &[f64]) -> Vector {
    v.iter().map(|x| x.tanh()).collect()
}

pub struct Lstm {
    pub w: [Matrix; 4],
    pub b: [Vector; 4],
}

impl Lstm {
    pub fn load(params: &ParameterSet<f64>, prefix: &str) -> Self {
        let m = |n: &str| matrix(params, &format!("{prefix}.{n}"));
        let v = |n: &str| vector(params, &format!("{prefix}.{n}"));
        Lstm {
            w: [m("W_i"), m("W_f"), m("W_o"), m("W_c")],
            b: [v("b_i"), v("b_f"), v("b_o"), v("b_c")],
        }
    }

    /// Gates over `[x; h]`, new cell, new output.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vector, Vector) {
        let stacked: Vector = x.iter().chain(h).copied().collect();
        let pre = |g: usize| plus(&matvec(&self.w[g], &stacked), &self.b[g]);
        let i: Vector = pre(0).into_iter().map(sigmoid).collect();
        let f: Vector = pre(1).into_iter().map(sigmoid).collect();
        let o: Vector = pre(2).into_iter().map(sigmoid).collect();
        let g = tanh_v(&pre(3));
        let c_new: Vector = (0..c.len()).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
        let h_new: Vector = (0..c.len()).map(|j| o[j] * c_new[j].tanh()).collect();
        (h_new, c_new)
    }
}

pub struct Attn {
    pub w_y: Matrix,
    pub w_h: Matrix,
    pub w: Vector,
    pub w_p: Matrix,
    pub w_x: Matrix,
    pub w_r: Option<Matrix>,
    pub w_t: Option<Matrix>,
}

impl Attn {
    pub fn load(params: &ParameterSet<f64>, wbw: bool) -> Self {
        let m = |n: &str| matrix(params, &format!("attn.{n}"));
        Attn {
            w_y: m("W_y"),
            w_h: m("W_h"),
            w: m("w").remove(0),
            w_p: m("W_p"),
            w_x: m("W_x"),
            w_r: wbw.then(|| m("W_r")),
            w_t: wbw.then(|| m("W_t")),
        }
    }

    /// Weights over the columns `ys` given an already projected query; masked columns
    /// get exactly zero.
    pub fn weights(&self, ys: &[Vector], query: &[f64], mask: &[bool]) -> Vector {
        let scores: Vec<Option<f64>> = ys
            .iter()
            .zip(mask)
            .map(|(y, &m)| {
                m.then(|| {
                    let pre = plus(&matvec(&self.w_y, y), query);
                    self.w.iter().zip(&pre).map(|(a, b)| a * b.tanh()).sum()
                })
            })
            .collect();
        let max = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - max).exp())).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    pub fn weighted(ys: &[Vector], alpha: &[f64]) -> Vector {
        let mut r = vec![0.0; ys[0].len()];
        for (y, a) in ys.iter().zip(alpha) {
            for (ri, yi) in r.iter_mut().zip(y) {
                *ri += a * yi;
            }
        }
        r
    }

    pub fn last(&self, ys: &[Vector], h_n: &[f64], mask: &[bool]) -> (Vector, Vector) {
        let alpha = self.weights(ys, &matvec(&self.w_h, h_n), mask);
        let r = Self::weighted(ys, &alpha);
        (alpha, r)
    }

    pub fn wordbyword(&self, ys: &[Vector], hs: &[Vector], mask: &[bool]) -> (Vec<Vector>, Vector) {
        let (w_r, w_t) = (self.w_r.as_ref().unwrap(), self.w_t.as_ref().unwrap());
        let mut r = vec![0.0; ys[0].len()];
        let mut alphas = Vec::new();
        for h in hs {
            let query = plus(&matvec(&self.w_h, h), &matvec(w_r, &r));
            let alpha = self.weights(ys, &query, mask);
            r = plus(&Self::weighted(ys, &alpha), &tanh_v(&matvec(w_t, &r)));
            alphas.push(alpha);
        }
        (alphas, r)
    }

    pub fn combine(&self, r: &[f64], h_n: &[f64]) -> Vector {
        tanh_v(&plus(&matvec(&self.w_p, r), &matvec(&self.w_x, h_n)))
    }
}

pub struct OracleOutput {
    pub logits: [f64; 3],
    pub probs: [f64; 3],
    pub alphas: Vec<Vector>,
    pub reverse_alphas: Vec<Vector>,
}

/// Straight-line forward pass of `model` on a tokenized pair, at inference.
pub fn oracle_forward(model: &EntailModel, params: &ParameterSet<f64>, premise: &[String], hypothesis: &[String]) -> OracleOutput {
    let cfg = model.config();
    let tunable = params.by_name("embed.tunable").unwrap();
    let proj_w = matrix(params, "proj.W");
    let proj_b = vector(params, "proj.b");
    let embed = |w: &str| {
        let v = model.embeddings().lookup(model.vocab(), tunable, w, Stage::Inference).vector;
        plus(&matvec(&proj_w, &v), &proj_b)
    };
    let (lstm_p, lstm_h) = if cfg.architecture == Architecture::ConditionalShared {
        (Lstm::load(params, "lstm"), Lstm::load(params, "lstm"))
    } else {
        (Lstm::load(params, "premise_lstm"), Lstm::load(params, "hypothesis_lstm"))
    };
    let attn = cfg
        .architecture
        .has_attention()
        .then(|| Attn::load(params, cfg.architecture == Architecture::Wordbyword));
    let k = cfg.hidden;

    let direction = |first: &[String], second: &[String]| -> (Vector, Vec<Vector>) {
        let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
        let mut ys = Vec::new();
        for w in first {
            (h, c) = lstm_p.step(&embed(w), &h, &c);
            ys.push(h.clone());
        }
        // Hypothesis: h restarts at zero, c carries over, delimiter read first.
        let mut h = vec![0.0; k];
        (h, c) = lstm_h.step(&embed("<delim>"), &h, &c);
        let mut hs = Vec::new();
        for w in second {
            (h, c) = lstm_h.step(&embed(w), &h, &c);
            hs.push(h.clone());
        }
        let mask = vec![true; ys.len()];
        match (&attn, cfg.architecture) {
            (Some(a), Architecture::Attention) => {
                let (alpha, r) = a.last(&ys, &h, &mask);
                (a.combine(&r, &h), vec![alpha])
            }
            (Some(a), Architecture::Wordbyword) => {
                let (alphas, r) = a.wordbyword(&ys, &hs, &mask);
                (a.combine(&r, &h), alphas)
            }
            _ => (h, Vec::new()),
        }
    };

    let (mut rep, alphas) = direction(premise, hypothesis);
    let mut reverse_alphas = Vec::new();
    if cfg.two_way {
        let (back, ra) = direction(hypothesis, premise);
        rep.extend(back);
        reverse_alphas = ra;
    }
    if cfg.classifier_hidden {
        rep = tanh_v(&plus(&matvec(&matrix(params, "classifier.W1"), &rep), &vector(params, "classifier.b1")));
    }
    let z = plus(&matvec(&matrix(params, "classifier.W"), &rep), &vector(params, "classifier.b"));
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    OracleOutput {
        logits: [z[0], z[1], z[2]],
        probs: [e[0] / s, e[1] / s, e[2] / s],
        alphas,
        reverse_alphas,
    }
}

/// Overwrites every parameter with draws from U(−scale, scale).
pub fn randomize(params: &mut ParameterSet<f64>, seed: u64, scale: f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for v in params.value_mut(id).data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

pub fn random_vec(rng: &mut impl rand::Rng, n: usize, scale: f64) -> Vector {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Pairs of at most five tokens each, with uneven lengths so batches pad.
pub fn short_corpus() -> Vec<Example> {
    vec![
        example("a man rides a horse", "a person rides", Label::Entailment),
        example("two dogs sleep", "dogs run", Label::Contradiction),
        example("a girl reads", "a girl reads books", Label::Neutral),
    ]
}

/// End-to-end check of mean batch cross-entropy plus an ℓ2 term.
pub fn model_grad_check(arch: Architecture, two_way: bool, hidden: bool, k: usize, seed: u64) -> entail_core::autodiff::GradCheckReport {
    use entail_core::autodiff::{grad_check, DEFAULT_STEP};
    use entail_core::data::{Batch, EncodedExample};
    use entail_core::train::BatchObjective;
    let corpus = short_corpus();
    let vocab = Vocabulary::build(&corpus);
    let table = EmbeddingTable::new(&vocab, None, 3, 1).unwrap();
    let config = ModelConfig::new(arch, k, 3).two_way(two_way).classifier_hidden(hidden);
    let m = EntailModel::new(config, vocab, table).unwrap();
    let encoded: Vec<EncodedExample> = corpus.iter().map(|e| EncodedExample::encode(e, m.vocab(), Stage::Train)).collect();
    let batch = Batch::from_examples(&encoded);
    let mut params = m.init_params::<f64>(seed);
    randomize(&mut params, seed + 1, 0.6);
    grad_check(&BatchObjective { model: &m, batch: &batch, l2: 1e-2 }, &params, DEFAULT_STEP).unwrap()
}
