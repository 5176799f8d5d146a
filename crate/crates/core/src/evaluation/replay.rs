use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::DialogContext;
use crate::corpus::{enter_turn, leave_turn, ConversationRecord};
use crate::evaluation::response::{ResponseSketch, ResponseTemplates};
use crate::federation::{route, FederationResources, ParserKind};
use crate::mr_tree::{exact_match, leaf_paths, Children, MrNode, MrTree};
use crate::ontology::Ontology;
use crate::parser_core::{ParserModel, FALLBACK_VERB};
use crate::text::short_name;

/// Where predictions come from.
#[derive(Debug, Clone, Copy)]
pub enum Variant<'a> {
    /// The gold tree of every turn.
    Gold,
    /// The full federated pipeline with this general model.
    Pipeline(&'a ParserModel),
}

/// Controlled corruption of predictions with a known harmful share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    /// Share of eligible turns to corrupt.
    pub rate: f64,
    /// Share of corrupted turns that get a user-visible corruption.
    pub harmful_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    /// An enum member or the verb changes.
    Harmful,
    /// A filler word is added to or dropped from a string leaf.
    Benign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub record_id: String,
    pub turn: usize,
    pub predicted: Option<MrTree>,
    pub gold: MrTree,
    pub route: Option<ParserKind>,
    pub error: Option<String>,
    pub injected: Option<Corruption>,
    pub component_error: bool,
    pub baseline: ResponseSketch,
    pub response: ResponseSketch,
    pub user_facing_error: bool,
}

fn predict(
    rec: &ConversationRecord,
    variant: Variant<'_>,
    res: &FederationResources,
) -> Vec<(Result<MrTree, String>, Option<ParserKind>)> {
    match variant {
        Variant::Gold => rec.turns.iter().map(|t| (Ok(t.gold_tree.clone()), None)).collect(),
        Variant::Pipeline(model) => {
            let mut ctx = DialogContext::default();
            rec.turns
                .iter()
                .map(|turn| {
                    enter_turn(&mut ctx, turn);
                    let out = match route(&turn.utterance, &ctx, model, res) {
                        Ok(d) => (Ok(d.tree), Some(d.parser)),
                        Err(e) => (Err(e.to_string()), None),
                    };
                    leave_turn(&mut ctx, turn);
                    out
                })
                .collect()
        }
    }
}

fn has_string_leaf(t: &MrTree) -> bool {
    leaf_paths(t).iter().any(|l| matches!(l.leaf, MrNode::String(_)))
}

/// Adds or drops a leading filler word on the first string leaf.
fn benign(t: &MrTree) -> MrTree {
    fn go(children: &mut Children) -> bool {
        for nodes in children.values_mut() {
            for n in nodes.iter_mut() {
                match n {
                    MrNode::String(s) => {
                        let lower = s.to_lowercase();
                        *s = match ["the ", "my "].iter().find(|p| lower.starts_with(*p)) {
                            Some(p) => s[p.len()..].to_string(),
                            None => format!("the {s}"),
                        };
                        return true;
                    }
                    MrNode::Tree(sub) => {
                        if go(&mut sub.children) {
                            return true;
                        }
                    }
                    MrNode::Enum(_) => {}
                }
            }
        }
        false
    }
    let mut out = t.clone();
    go(&mut out.children);
    out
}

/// Swaps a rendered enum leaf to another member, or replaces the verb.
fn harmful(t: &MrTree, o: &Ontology, responses: &ResponseTemplates, rng: &mut ChaCha8Rng) -> MrTree {
    let target = leaf_paths(t)
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l.leaf, MrNode::Enum(_)) && responses.renders(&t.verb, &l.slot_name()))
        .map(|(i, _)| i)
        .collect::<Vec<_>>()
        .choose(rng)
        .copied();
    let Some(target) = target else {
        return MrTree::new(FALLBACK_VERB);
    };
    fn go(children: &mut Children, o: &Ontology, target: usize, seen: &mut usize, rng: &mut ChaCha8Rng) {
        for nodes in children.values_mut() {
            for n in nodes.iter_mut() {
                match n {
                    MrNode::Tree(sub) => go(&mut sub.children, o, target, seen, rng),
                    MrNode::Enum(m) => {
                        if *seen == target {
                            let others: Vec<&String> = o
                                .member_enum(m)
                                .map(|e| e.members.iter().filter(|x| short_name(x) != short_name(m)).collect())
                                .unwrap_or_default();
                            if let Some(x) = others.choose(rng) {
                                *m = (*x).clone();
                            }
                        }
                        *seen += 1;
                    }
                    MrNode::String(_) => *seen += 1,
                }
            }
        }
    }
    let mut out = t.clone();
    go(&mut out.children, o, target, &mut 0, rng);
    out
}

/// Turns picked for corruption: an exact `rate` share of the eligible turns
/// (those whose prediction has a string leaf), an exact `harmful_fraction` of
/// them harmful.
fn plan(eligible: Vec<usize>, inj: &Injection, rng: &mut ChaCha8Rng) -> Vec<(usize, Corruption)> {
    let mut picked = eligible;
    picked.shuffle(rng);
    picked.truncate((picked.len() as f64 * inj.rate.clamp(0.0, 1.0)).round() as usize);
    let harmful_n = (picked.len() as f64 * inj.harmful_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut out: Vec<(usize, Corruption)> = picked
        .into_iter()
        .enumerate()
        .map(|(k, i)| (i, if k < harmful_n { Corruption::Harmful } else { Corruption::Benign }))
        .collect();
    out.sort_by_key(|(i, _)| *i);
    out
}

/// Replays every conversation under `variant` and compares each turn's
/// response with the gold baseline. Pipeline failures become component
/// errors; they never stop the run.
pub fn replay(
    records: &[ConversationRecord],
    variant: Variant<'_>,
    injection: Option<&Injection>,
    res: &FederationResources,
    responses: &ResponseTemplates,
) -> Vec<ReplayResult> {
    let mut rows: Vec<(String, usize, MrTree, Result<MrTree, String>, Option<ParserKind>)> = Vec::new();
    for rec in records {
        for (i, (pred, kind)) in predict(rec, variant, res).into_iter().enumerate() {
            rows.push((rec.id.clone(), i, rec.turns[i].gold_tree.clone(), pred, kind));
        }
    }
    let mut injected = vec![None; rows.len()];
    if let Some(inj) = injection {
        let mut rng = ChaCha8Rng::seed_from_u64(inj.seed);
        let eligible = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.3.as_ref().is_ok_and(has_string_leaf))
            .map(|(i, _)| i)
            .collect();
        for (i, kind) in plan(eligible, inj, &mut rng) {
            let Ok(t) = &rows[i].3 else { continue };
            let corrupted = match kind {
                Corruption::Harmful => harmful(t, &res.parser.ontology, responses, &mut rng),
                Corruption::Benign => benign(t),
            };
            rows[i].3 = Ok(corrupted);
            injected[i] = Some(kind);
        }
    }
    rows.into_iter()
        .zip(injected)
        .map(|((record_id, turn, gold, pred, route), injected)| {
            let baseline = responses.render(&gold);
            let (predicted, error, response) = match pred {
                Ok(t) => {
                    let r = responses.render(&t);
                    (Some(t), None, r)
                }
                Err(e) => {
                    let r = ResponseSketch::failure(&e);
                    (None, Some(e), r)
                }
            };
            let component_error = !predicted.as_ref().is_some_and(|p| exact_match(p, &gold));
            let user_facing_error = response != baseline;
            ReplayResult {
                record_id,
                turn,
                predicted,
                gold,
                route,
                error,
                injected,
                component_error,
                baseline,
                response,
                user_facing_error,
            }
        })
        .collect()
}
