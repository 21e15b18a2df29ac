use std::fmt;

use serde::Serialize;

use super::config::{Architecture, ModelConfig};

/// Reference model-parameter counts (excluding word vectors) by variant and `k`.
const REFERENCE: [(Architecture, bool, usize, usize); 7] = [
    (Architecture::ConditionalShared, false, 100, 111_000),
    (Architecture::ConditionalShared, false, 159, 252_000),
    (Architecture::Conditional, false, 116, 252_000),
    (Architecture::Attention, false, 100, 242_000),
    (Architecture::Attention, true, 100, 242_000),
    (Architecture::Wordbyword, false, 100, 252_000),
    (Architecture::Wordbyword, true, 100, 252_000),
];

/// Relative deviation beyond which a count is flagged.
pub const TOLERANCE: f64 = 0.05;

pub fn reference_count(config: &ModelConfig) -> Option<usize> {
    REFERENCE
        .iter()
        .find(|(a, t, k, _)| *a == config.architecture && *t == config.two_way && *k == config.hidden)
        .map(|r| r.3)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupCount {
    pub group: String,
    pub formula: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub variant: String,
    pub k: usize,
    pub d: usize,
    pub groups: Vec<GroupCount>,
    /// Parameters excluding word vectors.
    pub model: usize,
    /// Tunable word-vector scalars, when the vocabulary is known.
    pub words: Option<usize>,
    pub reference: Option<usize>,
    pub assumptions: Vec<String>,
}

impl CountReport {
    pub fn with_words(&self) -> Option<usize> {
        self.words.map(|w| w + self.model)
    }

    /// `(computed − reference) / reference`.
    pub fn deviation(&self) -> Option<f64> {
        self.reference
            .map(|r| (self.model as f64 - r as f64) / r as f64)
    }

    pub fn flagged(&self) -> bool {
        self.deviation().is_some_and(|d| d.abs() > TOLERANCE)
    }
}

impl fmt::Display for CountReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {} (k = {}, d = {})", self.variant, self.k, self.d)?;
        for g in &self.groups {
            writeln!(f, "  {:<12} {:>10}   {}", g.group, g.count, g.formula)?;
        }
        writeln!(f, "  {:<12} {:>10}", "|θ|_M", self.model)?;
        if let Some(total) = self.with_words() {
            writeln!(f, "  {:<12} {:>10}   ({} tunable word-vector scalars)", "|θ|_W+M", total, self.words.unwrap_or(0))?;
        }
        match (self.reference, self.deviation()) {
            (Some(r), Some(dev)) => {
                let status = if self.flagged() { "DEVIATES" } else { "ok" };
                writeln!(f, "  reference    {r:>10}   {:+.1}% [{status}]", dev * 100.0)?;
            }
            _ => writeln!(f, "  reference    {:>10}", "none")?,
        }
        writeln!(f, "assumptions:")?;
        for a in &self.assumptions {
            writeln!(f, "  - {a}")?;
        }
        Ok(())
    }
}

/// Closed-form parameter count of a configuration. `tunable_rows` is the number of
/// trainable word-vector rows, if known.
pub fn count_params(config: &ModelConfig, tunable_rows: Option<usize>) -> CountReport {
    let (k, d) = (config.hidden, config.embed_dim);
    let lstm_one = 4 * (2 * k * k + k);
    let lstms = if config.architecture.shares_lstm() { 1 } else { 2 };
    let mut groups = vec![
        GroupCount {
            group: "projection".into(),
            formula: "k·d + k".into(),
            count: k * d + k,
        },
        GroupCount {
            group: "lstm".into(),
            formula: format!("{lstms} × 4(2k·k + k)"),
            count: lstms * lstm_one,
        },
    ];
    match config.architecture {
        Architecture::Attention => groups.push(GroupCount {
            group: "attention".into(),
            formula: "4k·k + k".into(),
            count: 4 * k * k + k,
        }),
        Architecture::Wordbyword => groups.push(GroupCount {
            group: "attention".into(),
            formula: "6k·k + k".into(),
            count: 6 * k * k + k,
        }),
        _ => {}
    }
    let width = config.representation_width();
    let w = if config.two_way { "2k" } else { "k" };
    let classifier = if config.classifier_hidden {
        GroupCount {
            group: "classifier".into(),
            formula: format!("k·{w} + k + 3k + 3"),
            count: k * width + k + 3 * k + 3,
        }
    } else {
        GroupCount {
            group: "classifier".into(),
            formula: format!("3·{w} + 3"),
            count: 3 * width + 3,
        }
    };
    groups.push(classifier);
    let model = groups.iter().map(|g| g.count).sum();

    let mut assumptions = vec![
        "projection carries a bias".to_string(),
        "LSTM gates act on [x; h] with one bias each".to_string(),
        "attention maps carry no biases; w is a k-vector".to_string(),
    ];
    if config.classifier_hidden {
        assumptions.push(format!("classifier: tanh layer {w}→k, then softmax layer k→3"));
    } else {
        assumptions.push(format!("classifier: softmax layer {w}→3 over the tanh-bounded representation"));
    }
    if config.two_way {
        assumptions.push("two-way reuses every weight; only the classifier input widens to 2k".into());
    }
    assumptions.push("frozen pretrained vectors are excluded; <delim>, <unk>, and words without one are tunable".into());

    CountReport {
        variant: config.variant_name(),
        k,
        d,
        groups,
        model,
        words: tunable_rows.map(|n| n * d),
        reference: reference_count(config),
        assumptions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakdown_sums_to_total() {
        for arch in Architecture::ALL {
            for hidden in [false, true] {
                let c = ModelConfig::new(arch, 7, 5).classifier_hidden(hidden);
                let r = count_params(&c, Some(10));
                assert_eq!(r.groups.iter().map(|g| g.count).sum::<usize>(), r.model);
                assert_eq!(r.with_words(), Some(r.model + 50));
            }
        }
    }

    #[test]
    fn shared_k100_example() {
        let r = count_params(&ModelConfig::new(Architecture::ConditionalShared, 100, 300), None);
        let by = |g: &str| r.groups.iter().find(|x| x.group == g).unwrap().count;
        assert_eq!(by("lstm"), 80_400);
        assert_eq!(by("projection"), 30_100);
        assert_eq!(by("classifier"), 303);
        assert_eq!(r.model, 110_803);
        assert!(!r.flagged());
    }
}
