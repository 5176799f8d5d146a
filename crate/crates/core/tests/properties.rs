use proptest::prelude::*;
use proptest::sample::select;

use nlu_core::context::{context_vocabulary, rewrite_query, DialogContext, QrRules};
use nlu_core::corpus::{enter_turn, generate_turns, leave_turn, ConversationRecord, TemplateSet};
use nlu_core::evaluation::{replay, triage, Injection, ResponseTemplates, Variant};
use nlu_core::federation::{route, FederationResources, ParserKind};
use nlu_core::mr_tree::{leaf_paths, MrNode, SubTree};
use nlu_core::parser_core::{prepare, ParserModel, ParserResources, PreparedInput, TrainConfig};
use nlu_core::span::{match_spans, EntityRecord, EntitySource, EntityStore, MatchConfig};
use nlu_core::text::tokenize;
use nlu_core::tree_codec::{assemble, tree_to_instructions, Instruction};
use nlu_core::{exact_match, resources, MrTree, Ontology};

fn corpus(turns: usize, seed: u64) -> Vec<ConversationRecord> {
    let o = resources::toy_ontology();
    generate_turns(&o, &TemplateSet::default_set(), turns, seed).unwrap().0
}

fn prepared(records: &[ConversationRecord], res: &ParserResources) -> Vec<(MrTree, PreparedInput)> {
    let mut out = Vec::new();
    for rec in records {
        let mut ctx = DialogContext::default();
        for t in &rec.turns {
            enter_turn(&mut ctx, t);
            out.push((t.gold_tree.clone(), prepare(&t.utterance, &ctx, res, TrainConfig::default().max_width)));
            leave_turn(&mut ctx, t);
        }
    }
    out
}

fn map_strings(children: &mut nlu_core::mr_tree::Children, f: &dyn Fn(&str) -> String) {
    for nodes in children.values_mut() {
        for n in nodes {
            match n {
                MrNode::String(s) => *s = f(s),
                MrNode::Tree(SubTree { children, .. }) => map_strings(children, f),
                MrNode::Enum(_) => {}
            }
        }
    }
}

fn reverse_repeats(children: &mut nlu_core::mr_tree::Children) {
    for nodes in children.values_mut() {
        nodes.reverse();
        for n in nodes {
            if let MrNode::Tree(SubTree { children, .. }) = n {
                reverse_repeats(children);
            }
        }
    }
}

fn small_model(o: &Ontology, seed: u64) -> ParserModel {
    let cfg = TrainConfig {
        embed_dim: 8,
        span_dim: 4,
        hidden_dim: 8,
        layers: 1,
        seed,
        ..TrainConfig::default()
    };
    ParserModel::new(cfg, o.symbol_vocabulary(), context_vocabulary(o))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_turns_round_trip(seed in any::<u64>()) {
        let o = resources::toy_ontology();
        let res = ParserResources::new(o.clone());
        for (gold, p) in prepared(&corpus(40, seed), &res) {
            let seq = tree_to_instructions(&o, &gold, &p.tokens, &p.spans, &p.donations).unwrap();
            prop_assert_eq!(seq.last(), Some(&Instruction::End));
            let back = assemble(&o, &seq, &p.tokens, &p.spans, &p.donations).unwrap();
            prop_assert!(exact_match(&back, &gold), "{} vs {}", back, gold);
        }
    }

    #[test]
    fn assembled_strings_are_token_windows(
        words in prop::collection::vec(select(vec!["set", "alarm", "eugene", "mark", "paris", "at", "7", "on", "fishing"]), 1..9),
        picks in prop::collection::vec(0usize..10_000, 1..24),
    ) {
        let o = resources::toy_ontology();
        let vocab = o.symbol_vocabulary();
        let tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let seq: Vec<Instruction> = picks.iter().map(|i| vocab.symbol(i % vocab.len()).clone()).collect();
        if let Ok(t) = assemble(&o, &seq, &tokens, &[], &[]) {
            for leaf in leaf_paths(&t) {
                if let MrNode::String(v) = leaf.leaf {
                    let w = tokenize(v);
                    prop_assert!(!w.is_empty() && tokens.windows(w.len()).any(|x| x == w.as_slice()), "`{}`", v);
                }
            }
        }
    }

    #[test]
    fn exact_match_is_reflexive_and_ignores_order_and_case(seed in any::<u64>()) {
        for rec in corpus(20, seed) {
            for t in &rec.turns {
                let g = &t.gold_tree;
                prop_assert!(exact_match(g, g));
                let mut shuffled = g.clone();
                reverse_repeats(&mut shuffled.children);
                prop_assert!(exact_match(g, &shuffled));
                let mut upper = g.clone();
                map_strings(&mut upper.children, &|s| s.to_uppercase());
                prop_assert!(exact_match(g, &upper));
                let mut changed = g.clone();
                map_strings(&mut changed.children, &|s| format!("{s} x"));
                prop_assert_eq!(exact_match(g, &changed), !leaf_paths(g).iter().any(|l| matches!(l.leaf, MrNode::String(_))));
            }
        }
    }

    #[test]
    fn spans_are_in_bounds_disjoint_and_above_threshold(
        words in prop::collection::vec(select(vec!["call", "my", "morning", "routine", "al", "albert", "papa", "the", "lights", "kitchen"]), 0..10),
    ) {
        let tokens: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let mut store = EntityStore::new("p");
        store.insert(EntityRecord::new("c1", "person", "Albert", EntitySource::Contact));
        store.insert(EntityRecord::new("r1", "shortcut", "My Morning Routine", EntitySource::AppDonation));
        store.insert(EntityRecord::new("d1", "device", "kitchen lights", EntitySource::Device));
        let cfg = MatchConfig::default();
        let spans = match_spans(&tokens, &store, &cfg);
        for (i, s) in spans.iter().enumerate() {
            prop_assert!(s.start <= s.end && s.end < tokens.len());
            prop_assert!(s.len() <= cfg.max_window);
            prop_assert!(s.score >= cfg.threshold && s.score <= 1.0);
            for other in &spans[i + 1..] {
                prop_assert!(!s.overlaps(other));
            }
        }
    }

    #[test]
    fn rewriting_is_idempotent(seed in any::<u64>()) {
        let rules = QrRules::default();
        for rec in corpus(30, seed) {
            let mut ctx = DialogContext::default();
            for t in &rec.turns {
                enter_turn(&mut ctx, t);
                let once = rewrite_query(&t.utterance, &ctx, &rules);
                let twice = rewrite_query(&once.text, &ctx, &rules);
                prop_assert_eq!(&twice.text, &once.text, "rule {:?}", twice.rule);
                leave_turn(&mut ctx, t);
            }
        }
    }

    #[test]
    fn route_priority(
        head in select(vec!["good night", "how old is", "who wrote", "set an alarm", "wake me up tomorrow", "play"]),
        tail in prop::collection::vec(select(vec!["the", "moon", "hamlet", "jazz", "now"]), 0..3),
    ) {
        let o = resources::toy_ontology();
        let res = FederationResources::new(ParserResources::new(o.clone())).unwrap();
        let model = small_model(&o, 1);
        let utt = std::iter::once(head).chain(tail.iter().copied()).collect::<Vec<_>>().join(" ");
        let ctx = DialogContext::default();
        let d = route(&utt, &ctx, &model, &res).unwrap();
        let expected = if res.overrides.find(&utt).is_some() {
            ParserKind::Overrides
        } else if res.gate.matches(&d.rewrite.text).is_some() {
            ParserKind::Knowledge
        } else {
            ParserKind::General
        };
        prop_assert_eq!(d.parser, expected);
        prop_assert_eq!(d.general.is_some(), expected == ParserKind::General);
    }

    #[test]
    fn triage_fractions_are_bounded(seed in any::<u64>(), rate in 0.0f64..=1.0, harmful in 0.0f64..=1.0) {
        let o = resources::toy_ontology();
        let res = FederationResources::new(ParserResources::new(o)).unwrap();
        let inj = Injection { rate, harmful_fraction: harmful, seed };
        let s = triage(&replay(&corpus(60, seed), Variant::Gold, Some(&inj), &res, &ResponseTemplates::default()));
        for f in [s.component_error_rate, s.user_facing_rate, s.user_facing_fraction] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        prop_assert!(s.user_facing_errors <= s.component_errors && s.component_errors <= s.turns);
    }

    #[test]
    fn equal_trees_render_equal_responses(seed in any::<u64>()) {
        let responses = ResponseTemplates::default();
        for rec in corpus(30, seed) {
            for t in &rec.turns {
                let mut other = t.gold_tree.clone();
                reverse_repeats(&mut other.children);
                map_strings(&mut other.children, &|s| s.to_uppercase());
                prop_assert!(exact_match(&t.gold_tree, &other));
                prop_assert_eq!(responses.render(&t.gold_tree), responses.render(&other));
            }
        }
    }
}

#[test]
fn generated_corpora_are_fully_linearizable() {
    let o = resources::toy_ontology();
    let res = ParserResources::new(o.clone());
    for seed in 0..10 {
        for (gold, p) in prepared(&corpus(300, seed), &res) {
            assert!(
                tree_to_instructions(&o, &gold, &p.tokens, &p.spans, &p.donations).is_ok(),
                "seed {seed}: {gold} over `{}`",
                p.text
            );
        }
    }
}
