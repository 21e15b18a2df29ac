use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use entail_core::autodiff::Tape;
use entail_core::data::{gen_synth, make_batches, EncodedExample, SynthSpec};
use entail_core::embed::{EmbeddingTable, Stage, Vocabulary};
use entail_core::model::{Architecture, EntailModel, ModelConfig};
use entail_core::train::{batch_gradient, Phase};

fn setup(arch: Architecture, k: usize) -> (EntailModel, Vec<EncodedExample>) {
    let data = gen_synth(&SynthSpec { size: 64, seed: 3, ..SynthSpec::default() }).unwrap();
    let vocab = Vocabulary::build(&data.examples);
    let table = EmbeddingTable::new(&vocab, None, k, 1).unwrap();
    let model = EntailModel::new(ModelConfig::new(arch, k, k), vocab, table).unwrap();
    let encoded = data.examples.iter().map(|e| EncodedExample::encode(e, model.vocab(), Stage::Train)).collect();
    (model, encoded)
}

fn per_example(c: &mut Criterion) {
    let mut group = c.benchmark_group("example");
    for arch in [Architecture::Conditional, Architecture::Attention, Architecture::Wordbyword] {
        let (model, data) = setup(arch, 100);
        let params = model.init_params::<f32>(0);
        let view = data[0].view();
        group.bench_function(BenchmarkId::new("forward", arch), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                black_box(model.example_loss(&mut tape, &params, view, &mut Phase::Inference).unwrap())
            })
        });
        group.bench_function(BenchmarkId::new("forward_backward", arch), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let (loss, _) = model.example_loss(&mut tape, &params, view, &mut Phase::Inference).unwrap();
                black_box(tape.backward(loss).unwrap())
            })
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let (model, data) = setup(Architecture::Wordbyword, 100);
    let params = model.init_params::<f32>(0);
    let batches = make_batches(&data, 32, None);
    c.bench_function("batch_gradient/wordbyword/32", |b| {
        b.iter(|| black_box(batch_gradient(&model, &params, &batches[0], None).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = per_example, batch
}
criterion_main!(benches);
