use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// Pretrained vectors for the words of one vocabulary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pretrained {
    pub dim: usize,
    /// Vocabulary index → vector.
    pub rows: HashMap<usize, Vec<f64>>,
    /// Vocabulary words (reserved entries excluded) with no vector in the file.
    pub missing: usize,
}

/// Loads a word2vec text file, keeping only rows for words in `vocab`.
///
/// An optional first line `V d` is a header. Every other line is a token followed by `d`
/// decimals.
pub fn load_word2vec_text(path: &Path, vocab: &Vocabulary) -> Result<Pretrained> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_text(BufReader::new(file), path, vocab)
}

pub fn read_word2vec_text(reader: impl BufRead, origin: &Path, vocab: &Vocabulary) -> Result<Pretrained> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut dim: Option<usize> = None;
    let mut rows = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();

        if lineno == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }

        match dim {
            Some(d) if d != rest.len() => {
                return Err(Error::Format(format!(
                    "{}:{lineno}: expected {d} values, found {}",
                    origin.display(),
                    rest.len()
                )));
            }
            None if rest.is_empty() => return Err(parse_err(lineno, "line has no vector".into())),
            None => dim = Some(rest.len()),
            _ => {}
        }

        let Some(id) = vocab.id(word) else {
            // Still validate the numbers so a corrupt file is reported.
            for f in &rest {
                f.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("bad number `{f}`")))?;
            }
            continue;
        };
        if Vocabulary::is_reserved(id) {
            continue;
        }
        let values = rest
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("bad number `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.entry(id).or_insert(values);
    }

    let dim = dim.ok_or_else(|| Error::Format(format!("{}: no vectors", origin.display())))?;
    let missing = vocab.words().filter(|(id, _)| !rows.contains_key(id)).count();
    Ok(Pretrained { dim, rows, missing })
}
