use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Example, Label};
use crate::error::{Error, Result};

/// Parsed SNLI split.
#[derive(Clone, Debug, Default)]
pub struct SnliCorpus {
    pub examples: Vec<Example>,
    /// Records with gold label `-` (no annotator consensus).
    pub skipped: usize,
}

impl SnliCorpus {
    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for e in &self.examples {
            counts[e.label.index()] += 1;
        }
        counts
    }
}

#[derive(Deserialize)]
struct RawRecord {
    gold_label: String,
    sentence1: String,
    sentence2: String,
    #[serde(rename = "pairID", default)]
    pair_id: Option<String>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    gold_label: &'a str,
    sentence1: String,
    sentence2: String,
    #[serde(rename = "pairID")]
    pair_id: &'a str,
}

pub fn parse_snli(path: &Path) -> Result<SnliCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_snli(BufReader::new(file), path)
}

/// Reads SNLI JSON lines. `origin` only labels error messages.
pub fn read_snli(reader: impl BufRead, origin: &Path) -> Result<SnliCorpus> {
    let mut corpus = SnliCorpus::default();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if raw.gold_label == "-" {
            corpus.skipped += 1;
            continue;
        }
        let label = Label::parse(&raw.gold_label)
            .ok_or_else(|| parse_err(lineno, format!("unknown gold_label `{}`", raw.gold_label)))?;
        let premise = tokenize(&raw.sentence1);
        let hypothesis = tokenize(&raw.sentence2);
        let id = raw.pair_id.unwrap_or_else(|| format!("line{lineno}"));
        let example =
            Example::new(id, premise, hypothesis, label).map_err(|e| parse_err(lineno, e.to_string()))?;
        corpus.examples.push(example);
    }
    Ok(corpus)
}

/// Writes examples as SNLI-shaped JSON lines with space-joined tokens.
pub fn write_snli(path: &Path, examples: &[Example]) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for e in examples {
        let rec = OutRecord {
            gold_label: e.label.as_str(),
            sentence1: e.premise.join(" "),
            sentence2: e.hypothesis.join(" "),
            pair_id: &e.pair_id,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
