use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::context_vocabulary;
use crate::corpus::{
    flat_ontology, flat_training_records, frames_match, split_holdout, tree_to_frame, ConversationRecord,
    FlatConversation,
};
use crate::mr_tree::exact_match;
use crate::ontology::{Ontology, OntologyError};
use crate::parser_core::{
    example_from_tree, parse_prepared, replay_prepared, train_examples, ParserModel, ParserResources, TrainConfig,
    TrainError, TrainExample,
};

/// Figures from a much larger annotated corpus, printed for orientation only.
pub const REFERENCE_FOOTER: &str = "Reference only, different corpus and not reproduced here: \
hierarchical 62.2%, flattened 53.5%.";

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("hierarchical and flat corpora do not describe the same conversations")]
    Mismatch,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub train: TrainConfig,
    /// Share of conversations, taken from the end, held out for testing.
    pub holdout: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            train: TrainConfig::default(),
            holdout: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationScore {
    pub exact_match: f64,
    pub train_turns: usize,
    /// Training turns whose gold target cannot be produced from the input.
    pub unlinearizable: usize,
    pub held_turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config: CompareConfig,
    pub hierarchical: RepresentationScore,
    pub flat: RepresentationScore,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>11} {:>7} {:>15} {:>6}", "representation", "exact match", "train", "unlinearizable", "held")?;
        for (name, s) in [("hierarchical", &self.hierarchical), ("flat", &self.flat)] {
            writeln!(
                f,
                "{:<14} {:>10.1}% {:>7} {:>15} {:>6}",
                name,
                100.0 * s.exact_match,
                s.train_turns,
                s.unlinearizable,
                s.held_turns
            )?;
        }
        let c = &self.config.train;
        writeln!(
            f,
            "config: seed {} epochs {} lr {} dims {}/{}/{} layers {} holdout {}",
            c.seed, c.epochs, c.learning_rate, c.embed_dim, c.span_dim, c.hidden_dim, c.layers, self.config.holdout
        )?;
        write!(f, "{REFERENCE_FOOTER}")
    }
}

/// Examples for every turn that linearizes, and the number that do not.
fn linearizable_examples(
    records: &[ConversationRecord],
    res: &ParserResources,
    cfg: &TrainConfig,
) -> (Vec<TrainExample>, usize) {
    let vocab = res.ontology.symbol_vocabulary();
    let mut skipped = 0;
    let examples = replay_prepared(records, res, cfg.max_width)
        .into_iter()
        .filter(|(_, p, _)| !p.tokens.is_empty())
        .filter_map(|(id, p, gold)| match example_from_tree(&id, &p, &gold, &vocab, res) {
            Ok(ex) => Some(ex),
            Err(_) => {
                skipped += 1;
                None
            }
        })
        .collect();
    (examples, skipped)
}

fn fit(records: &[ConversationRecord], res: &ParserResources, cfg: &TrainConfig) -> Result<(ParserModel, usize, usize), TrainError> {
    let (examples, skipped) = linearizable_examples(records, res, cfg);
    let n = examples.len() + skipped;
    let (model, _) = train_examples(
        &examples,
        res.ontology.symbol_vocabulary(),
        context_vocabulary(&res.ontology),
        cfg,
    )?;
    Ok((model, n, skipped))
}

/// Trains one parser on hierarchical targets and one on flat targets from
/// the same conversations and reports held-out exact match for both. Flat
/// predictions are compared as frames; unlinearizable flat training turns are
/// skipped.
pub fn compare_representations(
    o: &Ontology,
    hier: &[ConversationRecord],
    flat: &[FlatConversation],
    cfg: &CompareConfig,
) -> Result<CompareReport, CompareError> {
    let same = hier.len() == flat.len()
        && hier
            .iter()
            .zip(flat)
            .all(|(h, f)| h.id == f.id && h.turns.len() == f.turns.len());
    if !same {
        return Err(CompareError::Mismatch);
    }
    let (h_train, h_held) = split_holdout(hier, cfg.holdout);
    let (_, f_held) = split_holdout(flat, cfg.holdout);

    let h_res = ParserResources::new(o.clone());
    let (h_model, h_n, h_skip) = fit(&h_train, &h_res, &cfg.train)?;
    let h_turns = replay_prepared(&h_held, &h_res, cfg.train.max_width);
    let h_hits = h_turns
        .iter()
        .filter(|(_, p, gold)| parse_prepared(p, &h_model, &h_res).is_ok_and(|(_, t)| exact_match(&t, gold)))
        .count();

    let flat_o = flat_ontology(o)?;
    let f_res = ParserResources::new(flat_o.clone());
    let flat_records = flat_training_records(flat, &flat_o);
    let (f_train, f_held_records) = split_holdout(&flat_records, cfg.holdout);
    let (f_model, f_n, f_skip) = fit(&f_train, &f_res, &cfg.train)?;
    let f_turns = replay_prepared(&f_held_records, &f_res, cfg.train.max_width);
    let gold_frames = f_held.iter().flat_map(|c| c.turns.iter().map(|t| &t.gold_frame));
    let f_hits = f_turns
        .iter()
        .zip(gold_frames)
        .filter(|((_, p, _), gold)| {
            parse_prepared(p, &f_model, &f_res).is_ok_and(|(_, t)| frames_match(&tree_to_frame(&t), gold))
        })
        .count();

    let rate = |hits: usize, n: usize| if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    Ok(CompareReport {
        config: cfg.clone(),
        hierarchical: RepresentationScore {
            exact_match: rate(h_hits, h_turns.len()),
            train_turns: h_n,
            unlinearizable: h_skip,
            held_turns: h_turns.len(),
        },
        flat: RepresentationScore {
            exact_match: rate(f_hits, f_turns.len()),
            train_turns: f_n,
            unlinearizable: f_skip,
            held_turns: f_turns.len(),
        },
    })
}

