use thiserror::Error;

use crate::context::{
    detect_mentions, featurize_system_action, mention_spans, rewrite_query, DialogContext, Mention,
    MentionRules, QrRules, Rewrite,
};
use crate::corpus::{enter_turn, leave_turn, ConversationRecord};
use crate::mr_tree::{exact_match, validate_tree, MrTree};
use crate::ontology::Ontology;
use crate::parser_core::model::{DecodeError, ParserModel};
use crate::span::{match_spans, MatchConfig, Span};
use crate::text::surface_tokens;
use crate::tree_codec::{Donation, Instruction, OntologyConstraints};

/// Verb produced for inputs with nothing to parse.
pub const FALLBACK_VERB: &str = "Unsupported";

/// Rewrite rules whose output replaces the utterance for the general parser.
/// Pronoun substitution is left to span-based resolution.
pub const PARSER_REWRITE_RULES: [&str; 2] = ["what-about", "i-meant"];

/// Everything except the model that parsing needs.
#[derive(Debug, Clone)]
pub struct ParserResources {
    pub ontology: Ontology,
    pub mention_rules: MentionRules,
    pub qr_rules: QrRules,
    pub match_config: MatchConfig,
    pub constraints: OntologyConstraints,
}

impl ParserResources {
    pub fn new(ontology: Ontology) -> Self {
        ParserResources {
            constraints: OntologyConstraints::new(&ontology),
            ontology,
            mention_rules: MentionRules::default(),
            qr_rules: QrRules::default(),
            match_config: MatchConfig::default(),
        }
    }

    pub fn toy() -> Self {
        Self::new(crate::resources::toy_ontology())
    }
}

/// A turn after rewriting, tokenization, span detection and featurization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInput {
    pub rewrite: Rewrite,
    /// Text handed to the general parser.
    pub text: String,
    /// Lower-cased tokens the model and span matchers see.
    pub tokens: Vec<String>,
    /// The same tokens in their original casing, used for copied strings.
    pub surface: Vec<String>,
    pub mentions: Vec<Mention>,
    pub spans: Vec<Span>,
    pub context: Vec<String>,
    pub donations: Vec<Donation>,
}

pub fn prepare(utterance: &str, ctx: &DialogContext, res: &ParserResources, max_width: usize) -> PreparedInput {
    let rewrite = rewrite_query(utterance, ctx, &res.qr_rules);
    let text = match rewrite.rule.as_deref() {
        Some(r) if PARSER_REWRITE_RULES.contains(&r) => rewrite.text.clone(),
        _ => utterance.to_string(),
    };
    let mut surface = surface_tokens(&text);
    let cut = surface.len().saturating_sub(max_width);
    surface.drain(..cut);
    let tokens: Vec<String> = surface.iter().map(|t| t.to_lowercase()).collect();
    let mentions = detect_mentions(&tokens, ctx, &res.mention_rules);
    let mut spans = mention_spans(&mentions, ctx);
    for s in match_spans(&tokens, &ctx.store, &res.match_config) {
        if !spans.iter().any(|m| m.overlaps(&s)) {
            spans.push(s);
        }
    }
    spans.sort_by_key(|s| (s.start, s.end));
    PreparedInput {
        rewrite,
        text,
        tokens,
        surface,
        mentions,
        spans,
        context: featurize_system_action(&ctx.system_action, &res.ontology),
        donations: ctx.donations(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("decoded tree violates the ontology: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutput {
    pub prepared: PreparedInput,
    pub instructions: Vec<Instruction>,
    pub tree: MrTree,
}

/// Decodes a prepared input; an empty utterance yields the fallback verb.
pub fn parse_prepared(
    prepared: &PreparedInput,
    model: &ParserModel,
    res: &ParserResources,
) -> Result<(Vec<Instruction>, MrTree), ParseError> {
    if prepared.tokens.is_empty() {
        return Ok((
            vec![Instruction::Path(FALLBACK_VERB.into()), Instruction::End],
            MrTree::new(FALLBACK_VERB),
        ));
    }
    let asm = crate::tree_codec::Assembler::new(
        &res.ontology,
        &prepared.surface,
        &prepared.spans,
        &prepared.donations,
    );
    let mut tape = model.tape();
    let enc = model.encode(&mut tape, &prepared.tokens, &prepared.spans, &prepared.context);
    let (instrs, state) = model.decode(&mut tape, &enc, &asm, &res.constraints)?;
    let tree = state
        .tree()
        .ok_or_else(|| ParseError::Invalid("decoder stopped without a tree".into()))?;
    let violations = validate_tree(&res.ontology, &tree);
    if let Some(v) = violations.first() {
        return Err(ParseError::Invalid(format!("{v:?}")));
    }
    Ok((instrs, tree))
}

pub fn parse(
    utterance: &str,
    ctx: &DialogContext,
    model: &ParserModel,
    res: &ParserResources,
) -> Result<ParseOutput, ParseError> {
    let prepared = prepare(utterance, ctx, res, model.config.max_width);
    let (instructions, tree) = parse_prepared(&prepared, model, res)?;
    Ok(ParseOutput {
        prepared,
        instructions,
        tree,
    })
}

/// Replays every conversation, preparing each turn in its context.
pub fn replay_prepared(
    records: &[ConversationRecord],
    res: &ParserResources,
    max_width: usize,
) -> Vec<(String, PreparedInput, MrTree)> {
    let mut out = Vec::new();
    for rec in records {
        let mut ctx = DialogContext::default();
        for (i, turn) in rec.turns.iter().enumerate() {
            enter_turn(&mut ctx, turn);
            out.push((
                format!("{}#{i}", rec.id),
                prepare(&turn.utterance, &ctx, res, max_width),
                turn.gold_tree.clone(),
            ));
            leave_turn(&mut ctx, turn);
        }
    }
    out
}

/// Turn-level exact match of the general parser over `records`.
pub fn exact_match_rate(records: &[ConversationRecord], model: &ParserModel, res: &ParserResources) -> f64 {
    let turns = replay_prepared(records, res, model.config.max_width);
    if turns.is_empty() {
        return 0.0;
    }
    let hits = turns
        .iter()
        .filter(|(_, p, gold)| {
            parse_prepared(p, model, res).is_ok_and(|(_, t)| exact_match(&t, gold))
        })
        .count();
    hits as f64 / turns.len() as f64
}
