use std::io::{BufRead, Write};

use anyhow::Result;
use nlu_core::context::DialogContext;
use nlu_core::corpus::{enter_turn, leave_turn, parse_fixture, write_jsonl, ConversationRecord, Turn};
use nlu_core::federation::{route, FederationResources};
use nlu_core::mr_tree::parse_action;
use nlu_core::parser_core::ParserModel;
use nlu_core::{EntityRecord, MrTree, SystemAction};

use crate::trace::trace_rows;

const HELP: &str = "\
commands:
  :system <action>   system action before the next turn, e.g. Prompt(Flight.book(from=?))
  :fixture <line>    entity for the next turn: source | id | label | canonical | alternates | payload
  :save <file>       write the transcript as a one-conversation JSONL corpus
  :reset             start a new conversation
  :help              this text
  :quit              leave
anything else is a user utterance";

/// One interactive conversation and its transcript.
pub struct Session<'a> {
    pub model: &'a ParserModel,
    pub res: &'a FederationResources,
    pub ctx: DialogContext,
    pub transcript: Vec<Turn>,
    pending_action: SystemAction,
    pending_fixtures: Vec<EntityRecord>,
}

impl<'a> Session<'a> {
    pub fn new(model: &'a ParserModel, res: &'a FederationResources) -> Self {
        Session {
            model,
            res,
            ctx: DialogContext::default(),
            transcript: Vec::new(),
            pending_action: SystemAction::none(),
            pending_fixtures: Vec::new(),
        }
    }

    pub fn record(&self, id: &str) -> ConversationRecord {
        ConversationRecord {
            id: id.to_string(),
            template: None,
            turns: self.transcript.clone(),
        }
    }

    /// Runs one user turn and describes every intermediate artifact.
    pub fn turn(&mut self, utterance: &str, out: &mut impl Write) -> Result<()> {
        let mut turn = Turn {
            utterance: utterance.to_string(),
            system_action: std::mem::replace(&mut self.pending_action, SystemAction::none()),
            gold_tree: MrTree::new("Unsupported"),
            entity_fixtures: std::mem::take(&mut self.pending_fixtures),
            gold_spans: None,
        };
        enter_turn(&mut self.ctx, &turn);
        let decision = route(utterance, &self.ctx, self.model, self.res);
        match decision {
            Ok(d) => {
                if let Some(rule) = &d.rewrite.rule {
                    writeln!(out, "rewrite  [{rule}] {}", d.rewrite.text)?;
                }
                if let Some(g) = &d.general {
                    writeln!(out, "context  {}", g.prepared.context.join(" "))?;
                    for s in &g.prepared.spans {
                        let words = g.prepared.tokens[s.start..=s.end].join(" ");
                        let id = s.canonical_id.as_deref().unwrap_or("-");
                        writeln!(out, "span     {}..{} \"{words}\" {} {id} {:.2}", s.start, s.end, s.label, s.score)?;
                    }
                    for row in trace_rows(&self.res.parser.ontology, &g.prepared, &g.instructions) {
                        writeln!(out, "  {row}")?;
                    }
                }
                writeln!(out, "route    {} ({})", d.parser, d.rationale)?;
                writeln!(out, "tree     {}", d.tree)?;
                turn.gold_tree = d.tree;
            }
            Err(e) => writeln!(out, "error    {e}")?,
        }
        leave_turn(&mut self.ctx, &turn);
        self.transcript.push(turn);
        Ok(())
    }

    /// Handles one input line; `false` means quit.
    pub fn line(&mut self, line: &str, out: &mut impl Write) -> Result<bool> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(true);
        }
        let Some(cmd) = line.strip_prefix(':') else {
            self.turn(line, out)?;
            return Ok(true);
        };
        let (name, arg) = cmd.split_once(' ').map_or((cmd, ""), |(a, b)| (a, b.trim()));
        let o = &self.res.parser.ontology;
        match name {
            "quit" | "q" => return Ok(false),
            "help" => writeln!(out, "{HELP}")?,
            "reset" => {
                self.ctx = DialogContext::default();
                self.transcript.clear();
                writeln!(out, "new conversation")?;
            }
            "system" => match parse_action(o, arg) {
                Ok(a) => {
                    writeln!(out, "system   {a}")?;
                    self.pending_action = a;
                }
                Err(e) => writeln!(out, "error    {e}")?,
            },
            "fixture" => match parse_fixture(o, arg) {
                Ok(r) => {
                    writeln!(out, "fixture  {} ({})", r.canonical, r.id)?;
                    self.pending_fixtures.push(r);
                }
                Err(e) => writeln!(out, "error    {e}")?,
            },
            "save" => {
                let f = std::fs::File::create(arg)?;
                write_jsonl(std::io::BufWriter::new(f), &[self.record("repl")])?;
                writeln!(out, "saved {} turns to {arg}", self.transcript.len())?;
            }
            other => writeln!(out, "unknown command `:{other}`; try :help")?,
        }
        Ok(true)
    }
}

pub fn run(model: &ParserModel, res: &FederationResources, input: impl BufRead, mut out: impl Write) -> Result<()> {
    let mut s = Session::new(model, res);
    writeln!(out, "type :help for commands")?;
    for line in input.lines() {
        if !s.line(&line?, &mut out)? {
            break;
        }
        out.flush()?;
    }
    Ok(())
}
