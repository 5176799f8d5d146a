//! Replay-based evaluation: responses under a model variant are compared
//! with a gold baseline so user-facing errors can be separated from benign
//! divergences.

mod compare;
mod replay;
mod response;
mod triage;

pub use compare::{
    compare_representations, CompareConfig, CompareError, CompareReport, RepresentationScore, REFERENCE_FOOTER,
};
pub use replay::{replay, Corruption, Injection, ReplayResult, Variant};
pub use response::{normalize_value, ResponseSketch, ResponseTemplateError, ResponseTemplates};
pub use triage::{signature, triage, ErrorSignature, ReviewItem, TriageSummary, TRIAGE_FOOTER};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_turns, ConversationRecord, TemplateSet, Turn};
    use crate::federation::FederationResources;
    use crate::mr_tree::{parse_tree, MrNode, MrTree, SubTree, SystemAction};
    use crate::parser_core::ParserResources;
    use crate::resources;

    fn corpus(turns: usize) -> Vec<ConversationRecord> {
        generate_turns(&resources::toy_ontology(), &TemplateSet::default_set(), turns, 3)
            .unwrap()
            .0
    }

    fn fed() -> FederationResources {
        FederationResources::new(ParserResources::toy()).unwrap()
    }

    fn result(gold: MrTree, predicted: Option<MrTree>) -> ReplayResult {
        let r = ResponseTemplates::default();
        let baseline = r.render(&gold);
        let response = predicted.as_ref().map(|p| r.render(p)).unwrap_or(ResponseSketch::failure("x"));
        ReplayResult {
            record_id: "r".into(),
            turn: 0,
            component_error: !predicted.as_ref().is_some_and(|p| crate::mr_tree::exact_match(p, &gold)),
            user_facing_error: response != baseline,
            predicted,
            gold,
            route: None,
            error: None,
            injected: None,
            baseline,
            response,
        }
    }

    #[test]
    fn baseline_self_replay_is_clean() {
        let c = corpus(300);
        let rs = replay(&c, Variant::Gold, None, &fed(), &ResponseTemplates::default());
        assert_eq!(rs.len(), 300);
        let s = triage(&rs);
        assert_eq!((s.component_errors, s.user_facing_errors), (0, 0));
        assert!(s.review.is_empty());
        assert_eq!(s.user_facing_fraction, 0.0);
    }

    #[test]
    fn injected_mix_is_recovered() {
        let c = corpus(1000);
        let inj = Injection {
            rate: 1.0,
            harmful_fraction: 0.3,
            seed: 11,
        };
        let rs = replay(&c, Variant::Gold, Some(&inj), &fed(), &ResponseTemplates::default());
        let injected: Vec<&ReplayResult> = rs.iter().filter(|r| r.injected.is_some()).collect();
        assert!(injected.len() > 500);
        for r in &rs {
            assert_eq!(r.component_error, r.injected.is_some());
            assert_eq!(r.user_facing_error, r.injected == Some(Corruption::Harmful));
        }
        let harmful = injected.iter().filter(|r| r.injected == Some(Corruption::Harmful)).count();
        let s = triage(&rs);
        assert!((s.user_facing_fraction - harmful as f64 / injected.len() as f64).abs() < 1e-12);
        assert!((s.user_facing_fraction - 0.3).abs() <= 0.05);
        let covered: usize = s.review.iter().filter(|i| i.user_facing).map(|i| i.count).sum();
        assert_eq!(covered, s.user_facing_errors);
        assert!(s.review.first().is_some_and(|i| i.user_facing));
    }

    #[test]
    fn injection_is_deterministic_and_rate_bounded() {
        let c = corpus(200);
        let inj = Injection {
            rate: 0.1,
            harmful_fraction: 0.5,
            seed: 5,
        };
        let a = replay(&c, Variant::Gold, Some(&inj), &fed(), &ResponseTemplates::default());
        let b = replay(&c, Variant::Gold, Some(&inj), &fed(), &ResponseTemplates::default());
        assert_eq!(a, b);
        let eligible = a
            .iter()
            .filter(|r| crate::mr_tree::leaf_paths(&r.gold).iter().any(|l| matches!(l.leaf, MrNode::String(_))))
            .count();
        let injected = a.iter().filter(|r| r.injected.is_some()).count();
        assert_eq!(injected, (eligible as f64 * 0.1).round() as usize);
    }

    #[test]
    fn reversed_recipients_are_not_errors() {
        let p = |n: &str| MrNode::from(SubTree::new("Person").with("Person.name", MrNode::string(n)));
        let gold = MrTree::new("Message.send")
            .with("Message.recipient", p("Eugene"))
            .with("Message.recipient", p("Mark"));
        let pred = MrTree::new("Message.send")
            .with("Message.recipient", p("Mark"))
            .with("Message.recipient", p("Eugene"));
        let r = result(gold, Some(pred));
        assert!(!r.component_error);
        assert!(!r.user_facing_error);
    }

    #[test]
    fn signatures_and_ordering() {
        let o = resources::toy_ontology();
        let t = |s: &str| parse_tree(&o, s).unwrap();
        let gold = t(r#"Alarm.create(name="gym", recurrence=DateTime(dayOfWeek=Monday))"#);
        let rs = vec![
            result(gold.clone(), Some(t(r#"Alarm.create(name="the gym", recurrence=DateTime(dayOfWeek=Monday))"#))),
            result(gold.clone(), Some(t(r#"Alarm.create(name="gym", recurrence=DateTime(dayOfWeek=Friday))"#))),
            result(gold.clone(), Some(t(r#"Alarm.create(name="gym", recurrence=DateTime(dayOfWeek=Friday))"#))),
            result(gold.clone(), Some(MrTree::new("Unsupported"))),
            result(gold.clone(), None),
        ];
        let s = triage(&rs);
        assert_eq!(s.component_errors, 5);
        assert_eq!(s.user_facing_errors, 4);
        assert_eq!(s.benign_divergences, 1);
        assert!((s.user_facing_fraction - 0.8).abs() < 1e-12);
        assert_eq!(s.review.len(), 4);
        assert_eq!(s.review[0].count, 2);
        assert_eq!(s.review[0].signature.path, "recurrence.dayOfWeek");
        assert!(!s.review[3].user_facing);
        assert_eq!(s.review[3].signature.path, "name");
        assert!(s.review.iter().any(|i| i.signature.predicted_verb == "<error>"));
        let all: usize = s.review.iter().map(|i| i.count).sum();
        assert_eq!(all, 5);
        assert!(s.to_string().contains("validates the triage mechanism"));
    }

    #[test]
    fn pipeline_errors_do_not_abort() {
        let rec = ConversationRecord {
            id: "e".into(),
            template: None,
            turns: vec![Turn {
                utterance: "".into(),
                system_action: SystemAction::none(),
                gold_tree: MrTree::new("Unsupported"),
                entity_fixtures: Vec::new(),
                gold_spans: None,
            }],
        };
        let o = resources::toy_ontology();
        let m = crate::parser_core::ParserModel::new(
            crate::parser_core::TrainConfig::default(),
            o.symbol_vocabulary(),
            crate::context::context_vocabulary(&o),
        );
        let rs = replay(&[rec], Variant::Pipeline(&m), None, &fed(), &ResponseTemplates::default());
        assert_eq!(rs.len(), 1);
        assert!(!rs[0].component_error);
    }
}
