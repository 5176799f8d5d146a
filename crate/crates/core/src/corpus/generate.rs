use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::DialogContext;
use crate::corpus::record::{enter_turn, leave_turn, ConversationRecord, Turn};
use crate::corpus::template::{materialize, Template, TemplateError, TemplateSet};
use crate::mr_tree::validate_tree;
use crate::ontology::Ontology;
use crate::parser_core::{prepare, ParserResources, TrainConfig};
use crate::span::{is_stop_word, EntityRecord, EntitySource, Span};
use crate::text::tokenize;
use crate::tree_codec::tree_to_instructions;

/// Attempts per conversation before a template is declared broken.
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("template `{template}` produced no usable conversation in {attempts} attempts; last problem: {last}")]
    Unusable {
        template: String,
        attempts: usize,
        last: String,
    },
    #[error("no templates to generate from")]
    NoTemplates,
}

/// Coverage counters for one generation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub conversations: usize,
    pub turns: usize,
    pub per_family: BTreeMap<String, usize>,
    pub per_template: BTreeMap<String, usize>,
    /// Sampled conversations discarded because a turn failed a check.
    pub rejected: usize,
    pub rejected_per_template: BTreeMap<String, usize>,
    /// One example problem per template with rejections.
    pub rejection_reasons: BTreeMap<String, String>,
}

/// Spans where a personal-vocabulary fixture's name occurs verbatim.
pub fn fixture_spans(tokens: &[String], fixtures: &[EntityRecord]) -> Vec<Span> {
    let mut out = Vec::new();
    for r in fixtures {
        if !matches!(r.source, EntitySource::Contact | EntitySource::AppDonation | EntitySource::Device) {
            continue;
        }
        let mut form = tokenize(&r.canonical);
        while form.first().is_some_and(|w| is_stop_word(w)) {
            form.remove(0);
        }
        while form.last().is_some_and(|w| is_stop_word(w)) {
            form.pop();
        }
        if form.is_empty() || form.len() > tokens.len() {
            continue;
        }
        if let Some(s) = (0..=tokens.len() - form.len()).find(|&s| tokens[s..s + form.len()] == form[..]) {
            out.push(Span {
                start: s,
                end: s + form.len() - 1,
                label: r.label.clone(),
                canonical_id: Some(r.id.clone()),
                payload: r.payload.clone(),
                score: 1.0,
            });
        }
    }
    out.sort_by_key(|s| (s.start, s.end));
    out
}

struct Generator<'a> {
    ontology: &'a Ontology,
    templates: &'a TemplateSet,
    res: ParserResources,
    max_width: usize,
}

impl Generator<'_> {
    fn sample(&self, t: &Template, rng: &mut ChaCha8Rng) -> Result<Vec<Turn>, String> {
        let texts = self.templates.instantiate(t, rng);
        let mut turns = Vec::new();
        let mut ctx = DialogContext::default();
        for text in &texts {
            let m = materialize(self.ontology, &t.name, text).map_err(|e| e.to_string())?;
            if let Some(v) = validate_tree(self.ontology, &m.tree).first() {
                return Err(format!("invalid gold tree: {v}"));
            }
            let tokens = tokenize(&m.say);
            let spans = fixture_spans(&tokens, &m.fixtures);
            let turn = Turn {
                utterance: m.say.clone(),
                system_action: m.action,
                gold_tree: m.tree,
                entity_fixtures: m.fixtures,
                gold_spans: (!spans.is_empty()).then_some(spans),
            };
            enter_turn(&mut ctx, &turn);
            let p = prepare(&turn.utterance, &ctx, &self.res, self.max_width);
            if let Some(expected) = &m.rewrite {
                if tokenize(&p.text) != tokenize(expected) {
                    return Err(format!("rewrite `{}` differs from `{expected}`", p.text));
                }
            }
            tree_to_instructions(self.ontology, &turn.gold_tree, &p.tokens, &p.spans, &p.donations)
                .map_err(|e| format!("`{}`: {e}", turn.utterance))?;
            leave_turn(&mut ctx, &turn);
            turns.push(turn);
        }
        Ok(turns)
    }

    fn conversation(
        &self,
        id: String,
        rng: &mut ChaCha8Rng,
        report: &mut GenerationReport,
    ) -> Result<ConversationRecord, GenerateError> {
        let total: u32 = self.templates.templates.iter().map(|t| t.weight).sum();
        let mut x = rng.gen_range(0..total);
        let t = self
            .templates
            .templates
            .iter()
            .find(|t| {
                if x < t.weight {
                    true
                } else {
                    x -= t.weight;
                    false
                }
            })
            .expect("weights sum to total");
        let mut last = String::new();
        for _ in 0..MAX_ATTEMPTS {
            match self.sample(t, rng) {
                Ok(turns) => {
                    *report.per_family.entry(t.family.clone()).or_default() += 1;
                    *report.per_template.entry(t.name.clone()).or_default() += 1;
                    report.conversations += 1;
                    report.turns += turns.len();
                    return Ok(ConversationRecord {
                        id,
                        template: Some(format!("{}/{}", t.family, t.name)),
                        turns,
                    });
                }
                Err(e) => {
                    report.rejected += 1;
                    *report.rejected_per_template.entry(t.name.clone()).or_default() += 1;
                    report.rejection_reasons.entry(t.name.clone()).or_insert_with(|| e.clone());
                    last = e;
                }
            }
        }
        Err(GenerateError::Unusable {
            template: t.name.clone(),
            attempts: MAX_ATTEMPTS,
            last,
        })
    }
}

fn generator<'a>(o: &'a Ontology, templates: &'a TemplateSet) -> Result<Generator<'a>, GenerateError> {
    if templates.templates.iter().all(|t| t.weight == 0) {
        return Err(GenerateError::NoTemplates);
    }
    Ok(Generator {
        ontology: o,
        templates,
        res: ParserResources::new(o.clone()),
        max_width: TrainConfig::default().max_width,
    })
}

/// `n` conversations, deterministic in `seed`. Every turn's gold tree
/// validates and linearizes in its replayed context.
pub fn generate_synthetic(
    o: &Ontology,
    templates: &TemplateSet,
    n: usize,
    seed: u64,
) -> Result<(Vec<ConversationRecord>, GenerationReport), GenerateError> {
    let mut report = GenerationReport::default();
    if n == 0 {
        return Ok((Vec::new(), report));
    }
    let g = generator(o, templates)?;
    templates.check(o, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| g.conversation(format!("syn{seed}-{i:05}"), &mut rng, &mut report))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((records, report))
}

/// Conversations until exactly `turns` turns exist; the last conversation may
/// be cut short.
pub fn generate_turns(
    o: &Ontology,
    templates: &TemplateSet,
    turns: usize,
    seed: u64,
) -> Result<(Vec<ConversationRecord>, GenerationReport), GenerateError> {
    let mut report = GenerationReport::default();
    if turns == 0 {
        return Ok((Vec::new(), report));
    }
    let g = generator(o, templates)?;
    templates.check(o, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut count = 0;
    while count < turns {
        let mut rec = g.conversation(format!("syn{seed}-{:05}", records.len()), &mut rng, &mut report)?;
        if count + rec.turns.len() > turns {
            report.turns -= count + rec.turns.len() - turns;
            rec.turns.truncate(turns - count);
        }
        count += rec.turns.len();
        records.push(rec);
    }
    Ok((records, report))
}

/// Splits off the last `fraction` of records as a held-out set.
pub fn split_holdout<T: Clone>(records: &[T], fraction: f64) -> (Vec<T>, Vec<T>) {
    let held = ((records.len() as f64) * fraction).round() as usize;
    let cut = records.len() - held.min(records.len());
    (records[..cut].to_vec(), records[cut..].to_vec())
}
