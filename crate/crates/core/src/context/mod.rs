//! Dialog context: previous-action featurization, span-based reference
//! resolution (mention detection) and rule-based query rewriting.

mod mentions;
mod rewrite;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::mr_tree::{ActionKind, MrNode, SubTree, SystemAction};
use crate::ontology::Ontology;
use crate::span::{EntityRecord, EntitySource, EntityStore};
use crate::tree_codec::Donation;

pub use mentions::{detect_mentions, mention_spans, ordinal_value, Mention, MentionRules, RuleError};
pub use rewrite::{rewrite_query, words, QrRules, Rewrite};

pub const DEFAULT_HISTORY: usize = 2;
pub const CARRYOVER_PREFIX: &str = "carryover:";

/// What the parser may know about the conversation so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogContext {
    /// Earlier user utterances, oldest first.
    pub history: VecDeque<String>,
    pub max_history: usize,
    pub system_action: SystemAction,
    pub store: EntityStore,
    /// Length of the list currently on screen, if any.
    pub screen_len: Option<usize>,
}

impl Default for DialogContext {
    fn default() -> Self {
        DialogContext::new(EntityStore::default())
    }
}

impl DialogContext {
    pub fn new(store: EntityStore) -> Self {
        DialogContext {
            history: VecDeque::new(),
            max_history: DEFAULT_HISTORY,
            system_action: SystemAction::none(),
            store,
            screen_len: None,
        }
    }

    pub fn push_user(&mut self, utterance: impl Into<String>) {
        self.history.push_back(utterance.into());
        while self.history.len() > self.max_history {
            self.history.pop_front();
        }
    }

    pub fn previous(&self) -> Option<&str> {
        self.history.back().map(String::as_str)
    }

    /// Records the assistant's next action, pulling any filled prompt
    /// attributes into the store as carryover entities.
    pub fn set_system_action(&mut self, action: SystemAction) {
        let stale: Vec<String> = self
            .store
            .records()
            .iter()
            .filter(|r| r.id.starts_with(CARRYOVER_PREFIX))
            .map(|r| r.id.clone())
            .collect();
        for id in stale {
            self.store.remove(&id);
        }
        self.store.extend(carryover_records(&action));
        self.system_action = action;
    }

    /// Subtrees the current turn may attach with a bare path.
    pub fn donations(&self) -> Vec<Donation> {
        let Some(verb) = self.system_action.payload.as_ref().map(|t| t.verb.as_str()) else {
            return Vec::new();
        };
        if self.system_action.kind != ActionKind::Prompt {
            return Vec::new();
        }
        let domain = crate::text::split_qualified(verb).0;
        let mut out: Vec<Donation> = self
            .store
            .records()
            .iter()
            .filter(|r| r.id.starts_with(CARRYOVER_PREFIX))
            .filter(|r| crate::text::split_qualified(&r.label).0 == domain)
            .filter_map(|r| {
                r.payload.clone().map(|payload| Donation {
                    attribute: r.label.clone(),
                    payload,
                })
            })
            .collect();
        out.sort_by(|a, b| a.attribute.cmp(&b.attribute));
        out
    }
}

fn first_string(t: &SubTree) -> Option<&str> {
    t.children.values().flatten().find_map(|n| match n {
        MrNode::String(s) => Some(s.as_str()),
        MrNode::Tree(sub) => first_string(sub),
        MrNode::Enum(_) => None,
    })
}

/// Filled subtree attributes of a prompt, as linguistic store records.
pub fn carryover_records(action: &SystemAction) -> Vec<EntityRecord> {
    let Some(tree) = action.payload.as_ref().filter(|_| action.kind == ActionKind::Prompt) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (attr, nodes) in &tree.children {
        if let Some(MrNode::Tree(sub)) = nodes.first() {
            let canonical = first_string(sub).unwrap_or(attr).to_string();
            out.push(
                EntityRecord::new(format!("{CARRYOVER_PREFIX}{attr}"), attr.clone(), canonical, EntitySource::Linguistic)
                    .with_payload(sub.clone()),
            );
        }
    }
    out
}

pub const SYS_TOKENS: [&str; 4] = ["SYS:PROMPT", "SYS:INFORM", "SYS:CONFIRM", "SYS:NONE"];

fn kind_token(kind: ActionKind) -> &'static str {
    match kind {
        ActionKind::Prompt => SYS_TOKENS[0],
        ActionKind::Inform => SYS_TOKENS[1],
        ActionKind::Confirm => SYS_TOKENS[2],
        ActionKind::None => SYS_TOKENS[3],
    }
}

pub fn slot_token(attr: &str) -> String {
    format!("SLOT:{attr}?")
}

/// Kind token followed by one `SLOT:` token per unfilled prompt attribute.
pub fn featurize_system_action(action: &SystemAction, _o: &Ontology) -> Vec<String> {
    let mut out = vec![kind_token(action.kind).to_string()];
    if action.kind == ActionKind::Prompt {
        let mut slots = action.unfilled.clone();
        slots.sort();
        slots.dedup();
        out.extend(slots.iter().map(|s| slot_token(s)));
    }
    out
}

/// Every context token the ontology can produce, in a fixed order.
pub fn context_vocabulary(o: &Ontology) -> Vec<String> {
    let mut out: Vec<String> = SYS_TOKENS.iter().map(|s| s.to_string()).collect();
    let mut slots: Vec<String> = o
        .verbs()
        .flat_map(|v| v.attributes.keys().map(|a| slot_token(a)))
        .collect();
    slots.sort();
    out.extend(slots);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::MrTree;
    use crate::resources;

    fn paris() -> SubTree {
        SubTree::new("Location").with("Location.name", MrNode::string("Paris"))
    }

    fn flight_prompt() -> SystemAction {
        SystemAction::prompt(
            MrTree::new("Flight.book").with("Flight.to", paris().into()),
            vec!["Flight.from".into(), "Flight.departingAt".into()],
        )
    }

    #[test]
    fn featurize_examples() {
        let o = resources::toy_ontology();
        assert_eq!(
            featurize_system_action(&flight_prompt(), &o),
            vec!["SYS:PROMPT", "SLOT:Flight.departingAt?", "SLOT:Flight.from?"]
        );
        assert_eq!(featurize_system_action(&SystemAction::none(), &o), vec!["SYS:NONE"]);
        let inform = SystemAction::inform(MrTree::new("Alarm.create"));
        assert_eq!(featurize_system_action(&inform, &o), vec!["SYS:INFORM"]);
        let vocab = context_vocabulary(&o);
        for t in featurize_system_action(&flight_prompt(), &o) {
            assert!(vocab.contains(&t));
        }
    }

    #[test]
    fn prompt_donates_filled_attributes() {
        let mut ctx = DialogContext::default();
        ctx.set_system_action(flight_prompt());
        let d = ctx.donations();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].attribute, "Flight.to");
        assert_eq!(d[0].payload, paris());
        ctx.set_system_action(SystemAction::none());
        assert!(ctx.donations().is_empty());
        assert!(ctx.store.is_empty());
    }

    #[test]
    fn history_is_bounded() {
        let mut ctx = DialogContext::default();
        for u in ["a", "b", "c"] {
            ctx.push_user(u);
        }
        assert_eq!(ctx.history, VecDeque::from(vec!["b".to_string(), "c".to_string()]));
    }
}
