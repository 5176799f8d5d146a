use serde::{Deserialize, Serialize};

use crate::context::{DialogContext, RuleError, CARRYOVER_PREFIX};
use crate::span::{fuzzy_score, EntitySource};

/// Result of query rewriting; `rule` is `None` when the text is unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub text: String,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    FocusReplace,
    Correct,
    PronounSubstitute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    name: String,
    /// Lowercase words; `None` for the match-anything pattern.
    prefix: Option<Vec<String>>,
    capture: bool,
    action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrRules {
    rules: Vec<Rule>,
}

impl QrRules {
    pub fn parse(src: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| RuleError { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected three tab-separated columns".into()));
            }
            let action = match cols[2] {
                "focus-replace" => Action::FocusReplace,
                "correct" => Action::Correct,
                "pronoun-substitute" => Action::PronounSubstitute,
                other => return Err(err(format!("unknown action `{other}`"))),
            };
            let (prefix, capture) = if cols[1].trim() == "*" {
                (None, false)
            } else {
                let mut ws: Vec<String> = cols[1].split_whitespace().map(str::to_lowercase).collect();
                let capture = ws.last().is_some_and(|w| w == "{x}");
                if capture {
                    ws.pop();
                }
                if ws.iter().any(|w| w.contains('{')) {
                    return Err(err("`{x}` may only end a pattern".into()));
                }
                (Some(ws), capture)
            };
            if action != Action::PronounSubstitute && !capture {
                return Err(err("this action needs a `{x}` capture".into()));
            }
            rules.push(Rule {
                name: cols[0].to_string(),
                prefix,
                capture,
                action,
            });
        }
        Ok(QrRules { rules })
    }
}

impl Default for QrRules {
    fn default() -> Self {
        QrRules::parse(crate::resources::QR_RULES).expect("bundled rules are valid")
    }
}

/// Whitespace-separated words with surrounding punctuation removed; case kept.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'').trim_matches('\''))
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

fn lower(ws: &[String]) -> Vec<String> {
    ws.iter().map(|w| w.to_lowercase()).collect()
}

fn find_run(hay: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    let (h, n) = (lower(hay), lower(needle));
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()] == n[..])
}

fn capitalized_runs(ws: &[String]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 1;
    while i < ws.len() {
        if ws[i].chars().next().is_some_and(char::is_uppercase) {
            let s = i;
            while i < ws.len() && ws[i].chars().next().is_some_and(char::is_uppercase) {
                i += 1;
            }
            out.push((s, i - 1));
        } else {
            i += 1;
        }
    }
    out
}

fn conversational_records(ctx: &DialogContext) -> impl Iterator<Item = &crate::span::EntityRecord> {
    ctx.store
        .records()
        .iter()
        .filter(|r| r.source == EntitySource::Linguistic && !r.id.starts_with(CARRYOVER_PREFIX))
}

/// Word range of the entity the previous utterance was about.
fn focus(prev: &[String], ctx: &DialogContext) -> Option<(usize, usize)> {
    for r in conversational_records(ctx) {
        let form = words(&r.canonical);
        if let Some(i) = find_run(prev, &form) {
            return Some((i, i + form.len() - 1));
        }
    }
    capitalized_runs(prev).into_iter().max_by(|a, b| (a.1 - a.0).cmp(&(b.1 - b.0)).then(b.0.cmp(&a.0)))
}

fn splice(ws: &[String], (s, e): (usize, usize), with: &[String]) -> String {
    ws[..s].iter().chain(with).chain(&ws[e + 1..]).cloned().collect::<Vec<_>>().join(" ")
}

const POSSESSIVE: [&str; 4] = ["his", "her", "their", "its"];

fn focus_replace(x: &[String], ctx: &DialogContext) -> Option<String> {
    let prev = words(ctx.previous()?);
    let range = focus(&prev, ctx)?;
    let name = prev[range.0..=range.1].join(" ");
    let with: Vec<String> = x
        .iter()
        .map(|w| {
            if POSSESSIVE.contains(&w.to_lowercase().as_str()) {
                format!("{name}'s")
            } else {
                w.clone()
            }
        })
        .collect();
    Some(splice(&prev, range, &with))
}

fn correct(x: &[String], ctx: &DialogContext) -> Option<String> {
    let prev = words(ctx.previous()?);
    let mut candidates: Vec<(usize, usize)> = capitalized_runs(&prev);
    for r in ctx.store.records() {
        let form = words(&r.canonical);
        if let Some(i) = find_run(&prev, &form) {
            candidates.push((i, i + form.len() - 1));
        }
    }
    let named = !candidates.is_empty();
    if !named && x.len() <= prev.len() {
        candidates.extend((0..=prev.len() - x.len()).map(|i| (i, i + x.len() - 1)));
    }
    let target = x.join(" ");
    let (score, range) = candidates
        .into_iter()
        .map(|(s, e)| (fuzzy_score(&prev[s..=e].join(" "), &target), (s, e)))
        .max_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then((a.1 .1 - a.1 .0).cmp(&(b.1 .1 - b.1 .0)))
                .then(a.1 .0.cmp(&b.1 .0))
        })?;
    (named || score > 0.0).then(|| splice(&prev, range, x))
}

fn pronoun_substitute(current: &[String], ctx: &DialogContext) -> Option<String> {
    let name = conversational_records(ctx).find(|r| r.label == "person")?.canonical.clone();
    let mut fired = false;
    let out: Vec<String> = current
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let lw = w.to_lowercase();
            let has_next = i + 1 < current.len();
            let replacement = match lw.as_str() {
                "he" | "she" | "him" | "they" | "them" => Some(name.clone()),
                "his" | "their" => Some(format!("{name}'s")),
                "her" if has_next => Some(format!("{name}'s")),
                "her" => Some(name.clone()),
                _ => None,
            };
            match replacement {
                Some(r) => {
                    fired = true;
                    r
                }
                None => w.clone(),
            }
        })
        .collect();
    fired.then(|| out.join(" "))
}

/// Rewrites a contextual utterance into a self-contained one; at most one
/// rule fires.
pub fn rewrite_query(current: &str, ctx: &DialogContext, rules: &QrRules) -> Rewrite {
    let ws = words(current);
    let lw = lower(&ws);
    for rule in &rules.rules {
        let capture: Vec<String> = match &rule.prefix {
            None => ws.clone(),
            Some(prefix) => {
                if lw.len() < prefix.len() || lw[..prefix.len()] != prefix[..] {
                    continue;
                }
                ws[prefix.len()..].to_vec()
            }
        };
        if rule.capture && capture.is_empty() {
            continue;
        }
        let text = match rule.action {
            Action::FocusReplace => focus_replace(&capture, ctx),
            Action::Correct => correct(&capture, ctx),
            Action::PronounSubstitute => pronoun_substitute(&capture, ctx),
        };
        if let Some(text) = text {
            return Rewrite {
                text,
                rule: Some(rule.name.clone()),
            };
        }
    }
    Rewrite {
        text: current.to_string(),
        rule: None,
    }
}
