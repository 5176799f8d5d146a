use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::DialogContext;
use crate::mr_tree::{MrTree, SystemAction};
use crate::span::{EntityRecord, EntitySource, Span};

/// One user turn with the state the assistant was in before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub utterance: String,
    pub system_action: SystemAction,
    pub gold_tree: MrTree,
    #[serde(default)]
    pub entity_fixtures: Vec<EntityRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_spans: Option<Vec<Span>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub id: String,
    /// Template family that produced the record, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {0}: conversation has no turns")]
    Empty(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes one conversation per line.
pub fn write_jsonl<W: Write>(mut w: W, records: &[ConversationRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ConversationRecord>, CorpusIoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ConversationRecord =
            serde_json::from_str(&line).map_err(|source| CorpusIoError::Json { line: i + 1, source })?;
        if rec.turns.is_empty() {
            return Err(CorpusIoError::Empty(i + 1));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Brings a context up to the moment just before `turn` is spoken.
pub fn enter_turn(ctx: &mut DialogContext, turn: &Turn) {
    ctx.set_system_action(turn.system_action.clone());
    ctx.store.extend(turn.entity_fixtures.iter().cloned());
    let screen = ctx
        .store
        .records()
        .iter()
        .filter(|r| r.source == EntitySource::Screen)
        .count();
    ctx.screen_len = (screen > 0).then_some(screen);
}

/// Records a completed turn in the history.
pub fn leave_turn(ctx: &mut DialogContext, turn: &Turn) {
    ctx.push_user(turn.utterance.clone());
}
