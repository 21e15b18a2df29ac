use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParameterSet, Real};
use crate::data::{EncodedExample, Example, Label};
use crate::error::{Error, Result};
use crate::model::{argmax, Architecture, EntailModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs.
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][predicted]`, in entailment/neutral/contradiction order.
    pub confusion: [[usize; 3]; 3],
}

impl Metrics {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut confusion = [[0usize; 3]; 3];
        for (gold, pred) in pairs {
            confusion[gold.index()][pred.index()] += 1;
        }
        let n: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
        let per_class = Label::ALL
            .iter()
            .map(|&label| {
                let i = label.index();
                let support: usize = confusion[i].iter().sum();
                let predicted: usize = (0..3).map(|g| confusion[g][i]).sum();
                let ratio = |den: usize| (den > 0).then(|| confusion[i][i] as f64 / den as f64);
                ClassMetrics {
                    label,
                    precision: ratio(predicted),
                    recall: ratio(support),
                    support,
                }
            })
            .collect();
        Metrics {
            n,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            per_class,
            confusion,
        }
    }

    /// Share of the most frequent gold class.
    pub fn majority_baseline(&self) -> f64 {
        let top = self.per_class.iter().map(|c| c.support).max().unwrap_or(0);
        if self.n == 0 {
            0.0
        } else {
            top as f64 / self.n as f64
        }
    }
}

/// Predictions at inference for every example, in order.
pub fn predict_all<T: Real>(model: &EntailModel, params: &ParameterSet<T>, examples: &[EncodedExample]) -> Result<Vec<Label>> {
    examples
        .par_iter()
        .map(|e| {
            let z = model.logits(params, e.view())?;
            Ok(Label::from_index(argmax(&z)).expect("three classes"))
        })
        .collect()
}

pub fn evaluate<T: Real>(model: &EntailModel, params: &ParameterSet<T>, examples: &[EncodedExample]) -> Result<Metrics> {
    let preds = predict_all(model, params, examples)?;
    Ok(Metrics::from_pairs(examples.iter().map(|e| e.label).zip(preds)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    /// Hypothesis tokens with a planted premise position.
    pub aligned: usize,
    /// Of those, tokens whose attention row peaks at the planted position.
    pub hits: usize,
    /// Worst simplex violation over all emitted rows.
    pub max_simplex_violation: f64,
}

impl AlignmentScore {
    pub fn accuracy(&self) -> f64 {
        if self.aligned == 0 {
            0.0
        } else {
            self.hits as f64 / self.aligned as f64
        }
    }
}

/// Compares each word-by-word attention row's argmax with the planted alignment.
pub fn alignment_accuracy<T: Real>(
    model: &EntailModel,
    params: &ParameterSet<T>,
    examples: &[Example],
    alignments: &[Vec<Option<usize>>],
) -> Result<AlignmentScore> {
    if model.config().architecture != Architecture::Wordbyword {
        return Err(Error::Config("alignment scoring needs a word-by-word model".into()));
    }
    if examples.len() != alignments.len() {
        return Err(Error::Input("one alignment per example is required".into()));
    }
    let per: Vec<(usize, usize, f64)> = examples
        .par_iter()
        .zip(alignments)
        .map(|(e, align)| {
            let p = model.predict(params, &e.premise, &e.hypothesis, Some(e.label))?;
            let rec = p.attention.expect("word-by-word models emit attention");
            let mut aligned = 0;
            let mut hits = 0;
            for (row, planted) in rec.weights.iter().zip(align) {
                if let Some(pos) = planted {
                    aligned += 1;
                    hits += usize::from(argmax(row) == *pos);
                }
            }
            Ok((aligned, hits, rec.simplex_violation()))
        })
        .collect::<Result<_>>()?;
    Ok(AlignmentScore {
        aligned: per.iter().map(|p| p.0).sum(),
        hits: per.iter().map(|p| p.1).sum(),
        max_simplex_violation: per.iter().map(|p| p.2).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rows_are_supports() {
        use Label::*;
        let pairs = [
            (Entailment, Entailment),
            (Entailment, Neutral),
            (Neutral, Neutral),
            (Contradiction, Entailment),
            (Contradiction, Contradiction),
            (Contradiction, Contradiction),
        ];
        let m = Metrics::from_pairs(pairs);
        assert_eq!(m.n, 6);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-12);
        for c in &m.per_class {
            assert_eq!(m.confusion[c.label.index()].iter().sum::<usize>(), c.support);
        }
        assert_eq!(m.per_class[0].precision, Some(0.5));
        assert_eq!(m.per_class[2].recall, Some(2.0 / 3.0));
        assert!((m.majority_baseline() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_ratios_are_none() {
        let m = Metrics::from_pairs([(Label::Neutral, Label::Neutral)]);
        assert_eq!(m.per_class[0].precision, None);
        assert_eq!(m.per_class[0].recall, None);
        assert_eq!(m.per_class[1].precision, Some(1.0));
    }
}
