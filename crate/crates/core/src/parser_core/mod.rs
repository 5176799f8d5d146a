//! The trainable contextual parser: encoder, constrained decoder, training
//! and checkpoints.

pub mod checkpoint;
mod model;
mod pipeline;
pub mod tape;
mod train;

pub use model::{
    span_bags, span_bucket, token_buckets, DecodeError, Encoded, ParserModel, Precision, TrainConfig,
};
pub use pipeline::{
    exact_match_rate, parse, parse_prepared, prepare, replay_prepared, ParseError, ParseOutput,
    ParserResources, PreparedInput, FALLBACK_VERB, PARSER_REWRITE_RULES,
};
pub use train::{
    batch_gradients, corpus_examples, example_from_instructions, example_from_tree, example_loss,
    gradient_check, learning_rate_at, train, train_examples, GradientProbe, TrainError, TrainExample,
};
