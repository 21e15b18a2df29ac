//! `entail`: train, tune, evaluate, and inspect entailment models.

mod heatmap;
mod settings;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use entail_core::autodiff::{ParameterSet, Precision, Real};
use entail_core::data::{gen_synth, parse_snli, tokenize, write_snli, EncodedExample, Example, Label, SynthSpec};
use entail_core::embed::{load_word2vec_text, EmbeddingTable, Pretrained, Stage, Vocabulary};
use entail_core::model::{count_params, Architecture, Checkpoint, EntailModel, ModelConfig};
use entail_core::train::{evaluate, grid_search, train, EpochRecord, Grid};
use entail_core::{Error, ErrorClass};
use serde::Serialize;

use heatmap::Heatmap;
use settings::{RunArgs, Settings};

#[derive(Parser)]
#[command(name = "entail", version, about = "Recognizing textual entailment with LSTMs and neural attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write checkpoint.json, history.jsonl, and resolved.conf.
    Train(RunArgs),
    /// Train one model per (lr, dropout, l2) grid point and keep the best on dev.
    Grid(GridArgs),
    /// Score a checkpoint on a labeled split.
    Eval(EvalArgs),
    /// Classify a single pair, or every pair of a split.
    Predict(PredictArgs),
    /// Print the parameter count of a configuration.
    Params(ParamsArgs),
    /// Write the attention weights of one pair as JSON and an SVG heatmap.
    Attend(AttendArgs),
    /// Generate the synthetic alignment task.
    Synth(SynthArgs),
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Learning rates to try (comma separated).
    #[arg(long, value_delimiter = ',')]
    grid_lr: Option<Vec<f64>>,
    /// Dropout rates to try.
    #[arg(long, value_delimiter = ',')]
    grid_dropout: Option<Vec<f64>>,
    /// ℓ2 strengths to try.
    #[arg(long, value_delimiter = ',')]
    grid_l2: Option<Vec<f64>>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled split (SNLI JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    premise: Option<String>,
    #[arg(long)]
    hypothesis: Option<String>,
    /// Gold label, recorded alongside the prediction.
    #[arg(long)]
    gold: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Classify every pair of this split instead (one JSON line each).
    #[arg(long, conflicts_with_all = ["premise", "hypothesis"])]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct AttendArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Output path prefix; writes PREFIX.json and PREFIX.svg.
    #[arg(long, default_value = "attention")]
    out: PathBuf,
    /// Print each weight inside its cell.
    #[arg(long)]
    annotate: bool,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long, default_value = "wordbyword")]
    model: String,
    #[arg(long, default_value_t = settings::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 300)]
    d: usize,
    #[arg(long)]
    two_way: bool,
    #[arg(long)]
    classifier_hidden: bool,
    /// Training split; with it the tunable word-vector rows are counted too.
    #[arg(long)]
    train: Option<PathBuf>,
    /// word2vec file whose words stay frozen.
    #[arg(long, requires = "train")]
    embeddings: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives synth.jsonl and synth.alignments.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().size)]
    size: usize,
    #[arg(long, default_value_t = SynthSpec::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SynthSpec::default().vocab_size)]
    vocab: usize,
    #[arg(long, default_value_t = SynthSpec::default().antonym_pairs)]
    antonyms: usize,
}

/// Runs `$f::<T>(args)` with `T` chosen by a [`Precision`].
macro_rules! with_real {
    ($precision:expr, $f:ident($($arg:expr),*)) => {
        match $precision {
            Precision::Training => $f::<f32>($($arg),*),
            Precision::Checking => $f::<f64>($($arg),*),
        }
    };
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::class);
    match class {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Data) => 3,
        Some(ErrorClass::Integrity) => 4,
        Some(ErrorClass::Numeric) => 5,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Grid(args) => cmd_grid(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Params(args) => cmd_params(&args),
        Command::Attend(args) => cmd_attend(&args),
        Command::Synth(args) => cmd_synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_split(path: &Path) -> Result<Vec<Example>> {
    let corpus = parse_snli(path)?;
    if corpus.skipped > 0 {
        eprintln!("{}: skipped {} pairs without a gold label", path.display(), corpus.skipped);
    }
    Ok(corpus.examples)
}

fn encode(model: &EntailModel, examples: &[Example], stage: Stage) -> Vec<EncodedExample> {
    examples.iter().map(|e| EncodedExample::encode(e, model.vocab(), stage)).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Everything a training run needs once inputs have been read.
struct Prepared {
    model: EntailModel,
    train: Vec<EncodedExample>,
    dev: Vec<EncodedExample>,
}

fn prepare(settings: &Settings) -> Result<Prepared> {
    settings.check_inputs()?;
    let train_set = load_split(&settings.train_path)?;
    let dev_set = match &settings.dev_path {
        Some(p) => load_split(p)?,
        None => Vec::new(),
    };
    let vocab = Vocabulary::build(&train_set);
    let pretrained: Option<Pretrained> = match &settings.embeddings {
        Some(p) => Some(load_word2vec_text(p, &vocab)?),
        None => None,
    };
    let d = match (&pretrained, settings.d) {
        (Some(pre), Some(d)) if pre.dim != d => {
            return Err(Error::Config(format!("--d {d} disagrees with the {}-dimensional embeddings", pre.dim)).into())
        }
        (Some(pre), _) => pre.dim,
        (None, d) => d.unwrap_or(settings.k),
    };
    let config = settings.model_config(d);
    config.validate()?;
    let table = EmbeddingTable::new(&vocab, pretrained.as_ref(), d, settings.train.seed)?;
    let model = EntailModel::new(config, vocab, table)?;
    let train = encode(&model, &train_set, Stage::Train);
    let dev = encode(&model, &dev_set, Stage::Inference);
    Ok(Prepared { model, train, dev })
}

fn report_epoch(r: &EpochRecord) {
    let dev = r.dev_acc.map_or_else(String::new, |a| format!("  dev acc {a:.4}"));
    eprintln!("epoch {:>3}  loss {:.5}  train acc {:.4}{dev}", r.epoch, r.train_loss, r.train_acc);
}

fn save_run<T: Real>(settings: &Settings, model: &EntailModel, params: &ParameterSet<T>) -> Result<()> {
    fs::create_dir_all(&settings.out).with_context(|| format!("creating {}", settings.out.display()))?;
    Checkpoint::new(model, params)?.save(&settings.out.join("checkpoint.json"))?;
    write_file(&settings.out.join("resolved.conf"), &settings.render(model.config().embed_dim))
}

fn run_train<T: Real>(settings: &Settings, prep: &Prepared) -> Result<()> {
    let init = prep.model.init_params::<T>(settings.train.seed);
    let outcome = train(&prep.model, init, &prep.train, &prep.dev, &settings.train, report_epoch)?;
    save_run(settings, &prep.model, &outcome.best)?;
    outcome.history.write_jsonl(&settings.out.join("history.jsonl"))?;
    if let Some(best) = outcome.history.best() {
        eprintln!("kept epoch {} (selection score {:.4})", best.epoch, best.selection_score());
    }
    Ok(())
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let settings = args.resolve()?;
    let prep = prepare(&settings)?;
    with_real!(settings.precision, run_train(&settings, &prep))
}

fn run_grid<T: Real>(settings: &Settings, prep: &Prepared, grid: &Grid) -> Result<()> {
    let dev = if prep.dev.is_empty() {
        eprintln!("no --dev split given; ranking grid points by training accuracy");
        &prep.train
    } else {
        &prep.dev
    };
    eprintln!("{} grid points on {} thread(s)", grid.candidates().len(), settings.jobs);
    let (report, best) = grid_search::<T>(&prep.model, &prep.train, dev, &settings.train, grid, settings.jobs)?;
    save_run(settings, &prep.model, &best)?;
    write_file(&settings.out.join("grid.csv"), &report.to_csv())?;
    write_file(&settings.out.join("grid.json"), &to_json(&report)?)?;
    report.best().history.write_jsonl(&settings.out.join("history.jsonl"))?;
    let b = report.best();
    eprintln!("best: lr {} dropout {} l2 {} (dev acc {:.4})", b.lr, b.dropout, b.l2, b.best_dev_acc);
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let settings = args.run.resolve()?;
    let standard = Grid::standard();
    let grid = Grid {
        lr: args.grid_lr.clone().unwrap_or(standard.lr),
        dropout: args.grid_dropout.clone().unwrap_or(standard.dropout),
        l2: args.grid_l2.clone().unwrap_or(standard.l2),
    };
    let prep = prepare(&settings)?;
    with_real!(settings.precision, run_grid(&settings, &prep, &grid))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())).into());
    }
    Ok(Checkpoint::load(path)?)
}

fn run_eval<T: Real>(ckpt: &Checkpoint, data: &[Example], out: Option<&Path>) -> Result<()> {
    let (model, params) = ckpt.restore::<T>()?;
    let metrics = evaluate(&model, &params, &encode(&model, data, Stage::Inference))?;
    let json = to_json(&metrics)?;
    if let Some(path) = out {
        write_file(path, &json)?;
    }
    print!("{json}");
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if !args.data.is_file() {
        return Err(Error::Config(format!("data file {} does not exist", args.data.display())).into());
    }
    let data = load_split(&args.data)?;
    with_real!(ckpt.precision, run_eval(&ckpt, &data, args.out.as_deref()))
}

fn parse_gold(gold: Option<&str>) -> Result<Option<Label>> {
    gold.map(|g| Label::parse(g).ok_or_else(|| Error::Input(format!("unknown label `{g}`")).into()))
        .transpose()
}

impl PairArgs {
    fn tokens(&self) -> Result<(Vec<String>, Vec<String>)> {
        let (Some(p), Some(h)) = (&self.premise, &self.hypothesis) else {
            return Err(Error::Config("--premise and --hypothesis are both required".into()).into());
        };
        Ok((tokenize(p), tokenize(h)))
    }
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_id: Option<&'a str>,
    label: Label,
    probs: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    gold: Option<Label>,
}

fn run_predict<T: Real>(ckpt: &Checkpoint, args: &PredictArgs) -> Result<()> {
    let (model, params) = ckpt.restore::<T>()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Some(path) = &args.data {
        if !path.is_file() {
            return Err(Error::Config(format!("data file {} does not exist", path.display())).into());
        }
        for e in load_split(path)? {
            let p = model.predict(&params, &e.premise, &e.hypothesis, None)?;
            let line = PredictionLine {
                pair_id: Some(&e.pair_id),
                label: p.label,
                probs: p.probs,
                gold: Some(e.label),
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
    } else {
        let (premise, hypothesis) = args.pair.tokens()?;
        let gold = parse_gold(args.pair.gold.as_deref())?;
        let p = model.predict(&params, &premise, &hypothesis, gold)?;
        let line = PredictionLine {
            pair_id: None,
            label: p.label,
            probs: p.probs,
            gold,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.pair.checkpoint)?;
    with_real!(ckpt.precision, run_predict(&ckpt, args))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn heatmap_rows<'a>(wordbyword: bool, labels: &'a [String], weights: &'a [Vec<f64>]) -> Vec<(String, &'a [f64])> {
    if wordbyword {
        labels.iter().cloned().zip(weights.iter().map(Vec::as_slice)).collect()
    } else {
        weights.iter().map(|w| ("(last)".to_string(), w.as_slice())).collect()
    }
}

fn run_attend<T: Real>(ckpt: &Checkpoint, args: &AttendArgs) -> Result<()> {
    let (model, params) = ckpt.restore::<T>()?;
    let (premise, hypothesis) = args.pair.tokens()?;
    let gold = parse_gold(args.pair.gold.as_deref())?;
    let prediction = model.predict(&params, &premise, &hypothesis, gold)?;
    let record = prediction.attention.expect("attention models record their weights");

    let wordbyword = model.config().architecture == Architecture::Wordbyword;
    let title = match &record.gold {
        Some(g) => format!("{}: predicted {} (gold {g})", record.variant, record.predicted),
        None => format!("{}: predicted {}", record.variant, record.predicted),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let json_path = with_suffix(&args.out, ".json");
    write_file(&json_path, &to_json(&record)?)?;
    let forward = Heatmap {
        title: title.clone(),
        columns: &record.premise,
        rows: heatmap_rows(wordbyword, &record.hypothesis, &record.weights),
        annotate: args.annotate,
    };
    let svg_path = with_suffix(&args.out, ".svg");
    write_file(&svg_path, &forward.render())?;
    let mut written = vec![json_path, svg_path];
    if let Some(reverse) = &record.reverse_weights {
        let map = Heatmap {
            title: format!("{title}, hypothesis → premise"),
            columns: &record.hypothesis,
            rows: heatmap_rows(wordbyword, &record.premise, reverse),
            annotate: args.annotate,
        };
        let path = with_suffix(&args.out, ".reverse.svg");
        write_file(&path, &map.render())?;
        written.push(path);
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_attend(args: &AttendArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.pair.checkpoint)?;
    if !ckpt.config.architecture.has_attention() {
        return Err(Error::Config(format!(
            "variant `{}` has no attention weights to show",
            ckpt.config.variant_name()
        ))
        .into());
    }
    with_real!(ckpt.precision, run_attend(&ckpt, args))
}

fn cmd_params(args: &ParamsArgs) -> Result<()> {
    let config = ModelConfig::new(args.model.parse()?, args.k, args.d)
        .two_way(args.two_way)
        .classifier_hidden(args.classifier_hidden);
    config.validate()?;
    let tunable = match &args.train {
        Some(path) => {
            if !path.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())).into());
            }
            let vocab = Vocabulary::build(&load_split(path)?);
            let pretrained = match &args.embeddings {
                Some(p) => Some(load_word2vec_text(p, &vocab)?),
                None => None,
            };
            let d = pretrained.as_ref().map_or(args.d, |p| p.dim);
            if d != args.d {
                return Err(Error::Config(format!("--d {} disagrees with the {d}-dimensional embeddings", args.d)).into());
            }
            Some(EmbeddingTable::new(&vocab, pretrained.as_ref(), d, 0)?.tunable_count())
        }
        None => None,
    };
    let report = count_params(&config, tunable);
    if args.json {
        print!("{}", to_json(&report)?);
    } else {
        print!("{report}");
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        vocab_size: args.vocab,
        antonym_pairs: args.antonyms,
        size: args.size,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let data = gen_synth(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_snli(&args.out.join("synth.jsonl"), &data.examples)?;
    write_file(&args.out.join("synth.alignments.json"), &(serde_json::to_string(&data)? + "\n"))?;
    eprintln!("wrote {} pairs to {}", data.examples.len(), args.out.display());
    Ok(())
}
