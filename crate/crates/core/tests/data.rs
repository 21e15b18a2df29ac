//! Corpus ingestion end to end.

mod common;

use common::*;
use entail_core::data::{gen_synth, parse_snli, synth_label, tokenize, write_snli, Label, SynthDataset, SynthSpec};
use proptest::prelude::*;

#[test]
fn bundled_fixture_is_balanced_snli() {
    let corpus = parse_snli(&fixture_path("snli_128.jsonl")).unwrap();
    assert_eq!(corpus.examples.len(), 128);
    assert_eq!(corpus.skipped, 0);
    let counts = corpus.label_counts();
    assert!(counts.iter().all(|&c| (42..=43).contains(&c)), "{counts:?}");
    assert_eq!(corpus.examples[0].premise.last().map(String::as_str), Some("."));
}

#[test]
fn synthetic_set_round_trips_through_snli_shape() {
    let spec = SynthSpec { size: 60, seed: 3, ..SynthSpec::default() };
    let data = gen_synth(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.jsonl");
    write_snli(&path, &data.examples).unwrap();
    let back = parse_snli(&path).unwrap();
    assert_eq!(back.examples, data.examples);

    let sidecar = serde_json::to_string(&data).unwrap();
    let restored: SynthDataset = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(restored.alignments, data.alignments);
    for (e, align) in data.examples.iter().zip(&data.alignments) {
        assert_eq!(synth_label(&spec, &e.premise, &e.hypothesis), e.label);
        assert_eq!(align.len(), e.hypothesis.len());
        if e.label == Label::Entailment {
            assert!(e.hypothesis.iter().all(|w| e.premise.contains(w)));
        }
    }
}

#[test]
fn tokenizer_cases() {
    assert_eq!(tokenize("A man rides."), ["a", "man", "rides", "."]);
    assert!(tokenize("").is_empty());
}

proptest! {
    #[test]
    fn tokenizing_joined_tokens_is_idempotent(
        words in prop::collection::vec("[a-z0-9]{1,8}", 1..10),
        period in any::<bool>(),
    ) {
        let mut sentence = words.join(" ");
        if period {
            sentence.push('.');
        }
        let once = tokenize(&sentence);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }
}
