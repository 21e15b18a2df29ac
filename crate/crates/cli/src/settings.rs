//! Run settings merged from an optional `key = value` file and command-line flags.
//! Flags win; anything left unset falls back to the built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use clap::Args;
use entail_core::autodiff::Precision;
use entail_core::model::{Architecture, ModelConfig};
use entail_core::train::TrainConfig;
use entail_core::Error;

const KEYS: &[&str] = &[
    "model",
    "two-way",
    "classifier-hidden",
    "k",
    "d",
    "lr",
    "dropout",
    "l2",
    "batch",
    "epochs",
    "patience",
    "stop-at-train-acc",
    "seed",
    "jobs",
    "precision",
    "train",
    "dev",
    "embeddings",
    "out",
];

pub const DEFAULT_K: usize = 100;

/// Flags shared by `train` and `grid`.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// File of `key = value` lines; `#` starts a comment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// conditional-shared, conditional, attention, or wordbyword.
    #[arg(long)]
    pub model: Option<String>,
    /// Attend in both directions (attention models only).
    #[arg(long)]
    pub two_way: bool,
    /// Add a tanh layer before the softmax classifier.
    #[arg(long)]
    pub classifier_hidden: bool,
    /// Hidden size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Word-vector dimension; defaults to the embedding file's, else to k.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Stop once training accuracy reaches this value.
    #[arg(long)]
    pub stop_at_train_acc: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for grid search.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// `train` (f32) or `check` (f64).
    #[arg(long)]
    pub precision: Option<String>,
    /// Training split (SNLI JSONL).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Development split used for model selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// word2vec text file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub architecture: Architecture,
    pub two_way: bool,
    pub classifier_hidden: bool,
    pub k: usize,
    pub d: Option<usize>,
    pub train: TrainConfig,
    pub jobs: usize,
    pub precision: Precision,
    pub train_path: PathBuf,
    pub dev_path: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
}

fn config_error(msg: String) -> anyhow::Error {
    Error::Config(msg).into()
}

/// Parses `key = value` lines. Blank lines and `#` comments are ignored.
pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_error(format!("{}:{}: expected `key = value`", origin.display(), n + 1)));
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(config_error(format!("{}:{}: unknown key `{key}`", origin.display(), n + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_precision(s: &str) -> Result<Precision> {
    match s {
        "train" | "training" => Ok(Precision::Training),
        "check" | "checking" => Ok(Precision::Checking),
        _ => Err(config_error(format!("unknown precision `{s}` (expected train or check)"))),
    }
}

pub fn precision_name(p: Precision) -> &'static str {
    match p {
        Precision::Training => "train",
        Precision::Checking => "check",
    }
}

struct Layer<'a> {
    file: BTreeMap<String, String>,
    origin: &'a str,
}

impl Layer<'_> {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| config_error(format!("{}: bad value `{v}` for `{key}`", self.origin))),
        }
    }

    fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let (file, origin) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
                (parse_config(&text, path)?, path.display().to_string())
            }
            None => (BTreeMap::new(), String::new()),
        };
        let layer = Layer { file, origin: &origin };
        let defaults = TrainConfig::default();

        let architecture = match layer.pick::<String>(self.model.clone(), "model")? {
            Some(name) => name.parse()?,
            None => Architecture::Wordbyword,
        };
        let precision = match layer.pick::<String>(self.precision.clone(), "precision")? {
            Some(p) => parse_precision(&p)?,
            None => Precision::Training,
        };
        let patience = match layer.pick(self.patience, "patience")? {
            Some(0) => None,
            Some(p) => Some(p),
            None => defaults.patience,
        };
        let train = TrainConfig {
            lr: layer.pick(self.lr, "lr")?.unwrap_or(defaults.lr),
            dropout: layer.pick(self.dropout, "dropout")?.unwrap_or(defaults.dropout),
            l2: layer.pick(self.l2, "l2")?.unwrap_or(defaults.l2),
            batch_size: layer.pick(self.batch, "batch")?.unwrap_or(defaults.batch_size),
            max_epochs: layer.pick(self.epochs, "epochs")?.unwrap_or(defaults.max_epochs),
            patience,
            stop_at_train_acc: layer.pick(self.stop_at_train_acc, "stop-at-train-acc")?,
            seed: layer.pick(self.seed, "seed")?.unwrap_or(defaults.seed),
        };
        train.validate()?;

        let train_path = layer
            .pick(self.train.clone(), "train")?
            .ok_or_else(|| config_error("a training split is required (--train)".into()))?;
        let out = layer
            .pick(self.out.clone(), "out")?
            .ok_or_else(|| config_error("an output directory is required (--out)".into()))?;

        Ok(Settings {
            architecture,
            two_way: layer.switch(self.two_way, "two-way")?,
            classifier_hidden: layer.switch(self.classifier_hidden, "classifier-hidden")?,
            k: layer.pick(self.k, "k")?.unwrap_or(DEFAULT_K),
            d: layer.pick(self.d, "d")?,
            train,
            jobs: layer.pick(self.jobs, "jobs")?.unwrap_or(1).max(1),
            precision,
            train_path,
            dev_path: layer.pick(self.dev.clone(), "dev")?,
            embeddings: layer.pick(self.embeddings.clone(), "embeddings")?,
            out,
        })
    }
}

impl Settings {
    /// Fails with a configuration error if any input path is missing, so nothing is
    /// written for a run that cannot start.
    pub fn check_inputs(&self) -> Result<()> {
        let inputs = [Some(&self.train_path), self.dev_path.as_ref(), self.embeddings.as_ref()];
        for path in inputs.into_iter().flatten() {
            if !path.is_file() {
                return Err(config_error(format!("input file {} does not exist", path.display())));
            }
        }
        if self.out.exists() && !self.out.is_dir() {
            return Err(config_error(format!("{} exists and is not a directory", self.out.display())));
        }
        Ok(())
    }

    pub fn model_config(&self, d: usize) -> ModelConfig {
        ModelConfig::new(self.architecture, self.k, d)
            .two_way(self.two_way)
            .classifier_hidden(self.classifier_hidden)
    }

    /// The settings in the same `key = value` form the config file accepts.
    pub fn render(&self, d: usize) -> String {
        let mut s = String::new();
        let t = &self.train;
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        line("model", self.architecture.to_string());
        line("two-way", self.two_way.to_string());
        line("classifier-hidden", self.classifier_hidden.to_string());
        line("k", self.k.to_string());
        line("d", d.to_string());
        line("lr", t.lr.to_string());
        line("dropout", t.dropout.to_string());
        line("l2", t.l2.to_string());
        line("batch", t.batch_size.to_string());
        line("epochs", t.max_epochs.to_string());
        line("patience", t.patience.unwrap_or(0).to_string());
        if let Some(acc) = t.stop_at_train_acc {
            line("stop-at-train-acc", acc.to_string());
        }
        line("seed", t.seed.to_string());
        line("jobs", self.jobs.to_string());
        line("precision", precision_name(self.precision).to_string());
        line("train", self.train_path.display().to_string());
        if let Some(dev) = &self.dev_path {
            line("dev", dev.display().to_string());
        }
        if let Some(e) = &self.embeddings {
            line("embeddings", e.display().to_string());
        }
        line("out", self.out.display().to_string());
        s
    }
}
