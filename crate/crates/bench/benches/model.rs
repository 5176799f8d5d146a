use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nlu_bench::{prepared_corpus, toy_resources};
use nlu_core::context::context_vocabulary;
use nlu_core::corpus::{generate_turns, TemplateSet};
use nlu_core::parser_core::{batch_gradients, corpus_examples, parse_prepared, ParserModel, TrainConfig};

fn model(c: &mut Criterion) {
    let res = toy_resources();
    let o = &res.ontology;
    let cfg = TrainConfig::default();
    let m = ParserModel::new(cfg.clone(), o.symbol_vocabulary(), context_vocabulary(o));
    let turns = prepared_corpus(&res, 20, 5);
    c.bench_function("encode and decode 20 turns", |b| {
        b.iter(|| {
            for (_, p) in &turns {
                black_box(parse_prepared(p, &m, &res).unwrap());
            }
        })
    });
    let (records, _) = generate_turns(o, &TemplateSet::default_set(), cfg.batch_size, 5).unwrap();
    let examples = corpus_examples(&records, &res, &o.symbol_vocabulary(), cfg.max_width).unwrap();
    let batch: Vec<_> = examples.iter().collect();
    c.bench_function("gradients for one batch", |b| b.iter(|| black_box(batch_gradients(&m, &batch))));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = model
}
criterion_main!(benches);
