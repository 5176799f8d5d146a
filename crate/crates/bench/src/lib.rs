//! Shared inputs for the benchmarks under `benches/`.

use nlu_core::context::DialogContext;
use nlu_core::corpus::{enter_turn, generate_turns, leave_turn, TemplateSet};
use nlu_core::parser_core::{prepare, ParserResources, PreparedInput, TrainConfig};
use nlu_core::{resources, MrTree};

/// Gold trees paired with their prepared inputs for `turns` generated turns.
pub fn prepared_corpus(res: &ParserResources, turns: usize, seed: u64) -> Vec<(MrTree, PreparedInput)> {
    let (records, _) = generate_turns(&res.ontology, &TemplateSet::default_set(), turns, seed).expect("bundled templates");
    let width = TrainConfig::default().max_width;
    let mut out = Vec::with_capacity(turns);
    for rec in &records {
        let mut ctx = DialogContext::default();
        for t in &rec.turns {
            enter_turn(&mut ctx, t);
            out.push((t.gold_tree.clone(), prepare(&t.utterance, &ctx, res, width)));
            leave_turn(&mut ctx, t);
        }
    }
    out
}

pub fn toy_resources() -> ParserResources {
    ParserResources::new(resources::toy_ontology())
}
