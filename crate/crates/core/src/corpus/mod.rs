//! Conversation records, synthetic generation and flat conversion.

mod flat;
mod generate;
mod record;
mod template;

pub use flat::{
    flat_ontology, flat_training_records, flatten_corpus, frame_to_tree, frames_match, tree_to_frame,
    FlatConversation, FlatTurn,
};
pub use generate::{
    fixture_spans, generate_synthetic, generate_turns, split_holdout, GenerateError, GenerationReport,
};
pub use record::{enter_turn, leave_turn, read_jsonl, write_jsonl, ConversationRecord, CorpusIoError, Turn};
pub use template::{
    choose, materialize, parse_fixture, LexItem, MaterializedTurn, Template, TemplateError, TemplateSet, TurnTemplate,
    TurnText,
};
