//! Bundled data files.

use crate::ontology::Ontology;

pub const TOY_ONTOLOGY: &str = include_str!("../data/toy.ont");
pub const MENTION_RULES: &str = include_str!("../data/mention.rules");
pub const QR_RULES: &str = include_str!("../data/qr.rules");
pub const TEMPLATES: &str = include_str!("../data/templates.txt");

/// The bundled toy assistant ontology.
pub fn toy_ontology() -> Ontology {
    Ontology::parse(TOY_ONTOLOGY).expect("bundled ontology is valid")
}

pub const KNOWLEDGE_GATE: &str = include_str!("../data/knowledge.gate");
pub const OVERRIDES: &str = include_str!("../data/overrides.txt");
pub const RESPONSES: &str = include_str!("../data/responses.txt");
