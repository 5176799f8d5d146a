use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::record::{ConversationRecord, Turn};
use crate::mr_tree::{flatten, FlatFrame, MrNode, MrTree, SystemAction};
use crate::ontology::{AttrDef, Ontology, OntologyError, Owner, ValueType, VerbDef};
use crate::span::{EntityRecord, Span};
use crate::text::{short_name, split_qualified};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTurn {
    pub utterance: String,
    pub system_action: SystemAction,
    pub gold_frame: FlatFrame,
    #[serde(default)]
    pub entity_fixtures: Vec<EntityRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_spans: Option<Vec<Span>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatConversation {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub turns: Vec<FlatTurn>,
}

/// Replaces every gold tree by its flat frame.
pub fn flatten_corpus(c: &[ConversationRecord]) -> Vec<FlatConversation> {
    c.iter()
        .map(|r| FlatConversation {
            id: r.id.clone(),
            template: r.template.clone(),
            turns: r
                .turns
                .iter()
                .map(|t| FlatTurn {
                    utterance: t.utterance.clone(),
                    system_action: t.system_action.clone(),
                    gold_frame: flatten(&t.gold_tree),
                    entity_fixtures: t.entity_fixtures.clone(),
                    gold_spans: t.gold_spans.clone(),
                })
                .collect(),
        })
        .collect()
}

/// Separator between attribute names inside a flat slot attribute.
const JOIN: &str = "_";

fn flat_attrs(
    o: &Ontology,
    owner: Owner<'_>,
    domain: &str,
    prefix: &[String],
    repeatable: bool,
    depth: usize,
    out: &mut BTreeMap<String, AttrDef>,
) {
    if depth > 8 {
        return;
    }
    for a in owner.attributes().values() {
        let mut path = prefix.to_vec();
        path.push(short_name(&a.name).to_string());
        let rep = repeatable || a.repeatable;
        match &a.value_type {
            ValueType::Type(t) => {
                let def = o.value_type(t).expect("validated ontology");
                flat_attrs(o, Owner::Type(def), domain, &path, rep, depth + 1, out);
            }
            vt => {
                let name = format!("{domain}.{}", path.join(JOIN));
                out.insert(
                    name.clone(),
                    AttrDef {
                        name,
                        value_type: vt.clone(),
                        repeatable: rep,
                        required: false,
                    },
                );
            }
        }
    }
}

/// The same verbs with one string or enum attribute per leaf path and no
/// value types.
pub fn flat_ontology(o: &Ontology) -> Result<Ontology, OntologyError> {
    let verbs = o
        .verbs()
        .map(|v| {
            let mut attributes = BTreeMap::new();
            let domain = split_qualified(&v.name).0;
            flat_attrs(o, Owner::Verb(v), domain, &[], false, 0, &mut attributes);
            VerbDef {
                name: v.name.clone(),
                attributes,
            }
        })
        .collect();
    let triggers = o
        .enums()
        .flat_map(|e| e.members.iter())
        .map(|m| (m.clone(), o.triggers(m).to_vec()))
        .filter(|(_, t)| !t.is_empty())
        .collect();
    Ontology::from_parts(verbs, Vec::new(), o.enums().cloned().collect(), triggers)
}

/// The flat ontology's tree for a frame; `None` if a slot has no attribute.
pub fn frame_to_tree(frame: &FlatFrame, flat: &Ontology) -> Option<MrTree> {
    let verb = flat.verb(&frame.intent)?;
    let domain = split_qualified(&verb.name).0;
    let mut t = MrTree::new(&frame.intent);
    for (slot, value) in &frame.slots {
        let base = slot.split('#').next().unwrap_or(slot);
        let attr = verb.attributes.get(&format!("{domain}.{}", base.replace('.', JOIN)))?;
        let node = match &attr.value_type {
            ValueType::Enum(e) => MrNode::Enum(format!("{e}.{value}")),
            _ => MrNode::String(value.clone()),
        };
        t = t.with(attr.name.clone(), node);
    }
    Some(t)
}

/// Inverse of [`frame_to_tree`] up to the numbering of repeated slots.
pub fn tree_to_frame(t: &MrTree) -> FlatFrame {
    let mut slots = std::collections::BTreeSet::new();
    for (attr, nodes) in &t.children {
        let base = short_name(attr).replace(JOIN, ".");
        for (i, n) in nodes.iter().enumerate() {
            let name = if nodes.len() > 1 { format!("{base}#{i}") } else { base.clone() };
            let value = match n {
                MrNode::String(s) => s.clone(),
                MrNode::Enum(m) => short_name(m).to_string(),
                MrNode::Tree(_) => continue,
            };
            slots.insert((name, value));
        }
    }
    FlatFrame {
        intent: t.verb.clone(),
        slots,
    }
}

/// Flat frames compare as multisets of normalized (slot, value) pairs.
pub fn frames_match(a: &FlatFrame, b: &FlatFrame) -> bool {
    a.intent == b.intent && a.unindexed() == b.unindexed()
}

/// Hierarchical-shaped records whose gold trees are the flat ontology's
/// rendering of each frame, for training a flat-target parser.
pub fn flat_training_records(flat: &[FlatConversation], flat_o: &Ontology) -> Vec<ConversationRecord> {
    flat.iter()
        .map(|r| ConversationRecord {
            id: r.id.clone(),
            template: r.template.clone(),
            turns: r
                .turns
                .iter()
                .map(|t| Turn {
                    utterance: t.utterance.clone(),
                    system_action: t.system_action.clone(),
                    gold_tree: frame_to_tree(&t.gold_frame, flat_o)
                        .unwrap_or_else(|| MrTree::new(t.gold_frame.intent.clone())),
                    entity_fixtures: t.entity_fixtures.clone(),
                    gold_spans: t.gold_spans.clone(),
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::{leaf_paths, validate_tree, SubTree};
    use crate::resources;

    fn alarm() -> MrTree {
        MrTree::new("Alarm.create")
            .with("Alarm.name", MrNode::string("Fishing trip"))
            .with(
                "Alarm.recurrence",
                SubTree::new("DateTime")
                    .with("DateTime.dayOfWeek", MrNode::member("DayOfWeek.Sunday"))
                    .into(),
            )
    }

    #[test]
    fn flat_round_trip() {
        let o = resources::toy_ontology();
        let flat = flat_ontology(&o).unwrap();
        let frame = flatten(&alarm());
        let t = frame_to_tree(&frame, &flat).unwrap();
        assert!(validate_tree(&flat, &t).is_empty());
        assert_eq!(
            t.to_string(),
            r#"Alarm.create(name="Fishing trip", recurrence_dayOfWeek=Sunday)"#
        );
        assert!(frames_match(&tree_to_frame(&t), &frame));
    }

    #[test]
    fn repeated_slots_survive() {
        let o = resources::toy_ontology();
        let flat = flat_ontology(&o).unwrap();
        let p = |n: &str| SubTree::new("Person").with("Person.name", MrNode::string(n)).into();
        let t = MrTree::new("Message.send")
            .with("Message.recipient", p("eugene"))
            .with("Message.recipient", p("mark"));
        let frame = flatten(&t);
        let ft = frame_to_tree(&frame, &flat).unwrap();
        assert_eq!(ft.children["Message.recipient_name"].len(), 2);
        assert!(flat.attribute("Message.recipient_name").unwrap().repeatable);
        assert!(frames_match(&tree_to_frame(&ft), &frame));
    }

    #[test]
    fn slot_count_equals_leaf_count() {
        let t = alarm();
        // Independent count: walk the tree by hand.
        fn leaves(c: &crate::mr_tree::Children) -> usize {
            c.values()
                .flatten()
                .map(|n| match n {
                    MrNode::Tree(s) => leaves(&s.children),
                    _ => 1,
                })
                .sum()
        }
        assert_eq!(flatten(&t).slots.len(), leaves(&t.children));
        assert_eq!(leaf_paths(&t).len(), 2);
        assert!(flatten(&MrTree::new("Unsupported")).slots.is_empty());
    }
}
