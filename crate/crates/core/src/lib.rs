//! Ontology-grounded contextual semantic parsing for task-oriented assistants.

pub mod context;
pub mod corpus;
pub mod evaluation;
pub mod federation;
pub mod mr_tree;
pub mod ontology;
pub mod parser_core;
pub mod resources;
pub mod span;
pub mod text;
pub mod tree_codec;

pub use mr_tree::{exact_match, flatten, FlatFrame, MrNode, MrTree, SubTree, SystemAction};
pub use ontology::{Ontology, OntologyError, Path};
pub use span::{EntityRecord, EntityStore, Span};
pub use tree_codec::{assemble, linearize, Alignment, Instruction, Vocabulary};
