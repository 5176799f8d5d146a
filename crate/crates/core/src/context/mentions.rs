use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{DialogContext, CARRYOVER_PREFIX};
use crate::span::{fuzzy_score, EntitySource, Span};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule file line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

/// A grounded referring expression over tokens `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    FromBottom,
    FromTop,
    Recent,
    Owner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatTok {
    Word(String),
    Ordinal,
    Possessive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    name: String,
    pattern: Vec<PatTok>,
    action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionRules {
    rules: Vec<Rule>,
    cues: Vec<(String, Vec<String>)>,
}

const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

/// `second` / `2nd` -> 2.
pub fn ordinal_value(word: &str) -> Option<usize> {
    if let Some(i) = ORDINALS.iter().position(|o| *o == word) {
        return Some(i + 1);
    }
    let digits = word.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &word[digits.len()..];
    match (digits.parse::<usize>(), suffix) {
        (Ok(n), "st" | "nd" | "rd" | "th") if n > 0 => Some(n),
        _ => None,
    }
}

impl MentionRules {
    pub fn parse(src: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        let mut cues = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: &str| RuleError {
                line: i + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected three tab-separated columns"));
            }
            if cols[0] == "cue" {
                cues.push((cols[1].to_string(), cols[2].split_whitespace().map(String::from).collect()));
                continue;
            }
            let pattern = cols[1]
                .split_whitespace()
                .map(|w| match w {
                    "{ord}" => PatTok::Ordinal,
                    "{x}'s" => PatTok::Possessive,
                    w => PatTok::Word(w.to_lowercase()),
                })
                .collect::<Vec<_>>();
            if pattern.is_empty() {
                return Err(err("empty pattern"));
            }
            let action = match cols[2] {
                "from-bottom" => Action::FromBottom,
                "from-top" => Action::FromTop,
                "recent" => Action::Recent,
                "owner" => Action::Owner,
                other => return Err(err(&format!("unknown action `{other}`"))),
            };
            rules.push(Rule {
                name: cols[0].to_string(),
                pattern,
                action,
            });
        }
        Ok(MentionRules { rules, cues })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl Default for MentionRules {
    fn default() -> Self {
        MentionRules::parse(crate::resources::MENTION_RULES).expect("bundled rules are valid")
    }
}

struct Capture {
    end: usize,
    ordinal: Option<usize>,
    owner: Option<String>,
}

fn match_at(pattern: &[PatTok], tokens: &[String], start: usize) -> Option<Capture> {
    let mut cap = Capture {
        end: start,
        ordinal: None,
        owner: None,
    };
    for (k, p) in pattern.iter().enumerate() {
        let tok = tokens.get(start + k)?;
        match p {
            PatTok::Word(w) => {
                if tok != w {
                    return None;
                }
            }
            PatTok::Ordinal => cap.ordinal = Some(ordinal_value(tok)?),
            PatTok::Possessive => {
                let stem = tok.strip_suffix("'s")?;
                if stem.is_empty() {
                    return None;
                }
                cap.owner = Some(stem.to_string());
            }
        }
        cap.end = start + k;
    }
    Some(cap)
}

impl MentionRules {
    fn cued_labels(&self, tokens: &[String]) -> Vec<&str> {
        self.cues
            .iter()
            .filter(|(_, words)| words.iter().any(|w| tokens.contains(w)))
            .map(|(label, _)| label.as_str())
            .collect()
    }

    fn resolve(&self, rule: &Rule, cap: &Capture, tokens: &[String], ctx: &DialogContext) -> Option<(usize, Option<String>, Option<usize>)> {
        let store = &ctx.store;
        match rule.action {
            Action::FromBottom | Action::FromTop => {
                let n = ctx.screen_len?;
                let k = cap.ordinal?;
                if k > n {
                    return None;
                }
                let idx = if rule.action == Action::FromBottom { n - k } else { k - 1 };
                let id = format!("screen:{idx}");
                let id = store.get(&id).map(|r| r.id.clone());
                Some((cap.end, id, Some(idx)))
            }
            Action::Recent => {
                let cued = self.cued_labels(tokens);
                let rec = store
                    .records()
                    .iter()
                    .filter(|r| matches!(r.source, EntitySource::Linguistic | EntitySource::Screen))
                    .filter(|r| !r.id.starts_with(CARRYOVER_PREFIX))
                    .find(|r| cued.is_empty() || cued.contains(&r.label.as_str()))?;
                Some((cap.end, Some(rec.id.clone()), None))
            }
            Action::Owner => {
                let owner = cap.owner.as_deref()?;
                let (score, rec) = store
                    .records()
                    .iter()
                    .map(|r| (r.forms().map(|f| fuzzy_score(owner, f)).fold(0.0, f64::max), r))
                    .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.recency.cmp(&a.1.recency)))?;
                if score < 0.8 {
                    return None;
                }
                let end = (cap.end + 1).min(tokens.len() - 1);
                Some((end, Some(rec.id.clone()), None))
            }
        }
    }
}

/// Applies the rules in order; a later rule never claims tokens an earlier
/// mention already covers.
pub fn detect_mentions(tokens: &[String], ctx: &DialogContext, rules: &MentionRules) -> Vec<Mention> {
    let mut out: Vec<Mention> = Vec::new();
    for rule in &rules.rules {
        for start in 0..tokens.len() {
            let Some(cap) = match_at(&rule.pattern, tokens, start) else { continue };
            let Some((end, entity_id, list_index)) = rules.resolve(rule, &cap, tokens, ctx) else {
                continue;
            };
            if out.iter().any(|m| m.start <= end && start <= m.end) {
                continue;
            }
            out.push(Mention {
                start,
                end,
                rule: rule.name.clone(),
                entity_id,
                list_index,
            });
        }
    }
    out.sort_by_key(|m| m.start);
    out
}

/// Spans carrying the resolved records' labels and payloads.
pub fn mention_spans(mentions: &[Mention], ctx: &DialogContext) -> Vec<Span> {
    mentions
        .iter()
        .filter_map(|m| {
            let rec = ctx.store.get(m.entity_id.as_deref()?)?;
            Some(Span {
                start: m.start,
                end: m.end,
                label: rec.label.clone(),
                canonical_id: Some(rec.id.clone()),
                payload: rec.payload.clone(),
                score: 1.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::{MrNode, SubTree};
    use crate::span::EntityRecord;
    use crate::text::tokenize;

    fn screen_ctx(n: usize) -> DialogContext {
        let mut ctx = DialogContext::default();
        ctx.screen_len = Some(n);
        for i in 0..n {
            ctx.store
                .insert(EntityRecord::new(format!("screen:{i}"), "item", format!("item {i}"), EntitySource::Screen));
        }
        ctx
    }

    #[test]
    fn second_from_the_bottom() {
        let ctx = screen_ctx(5);
        let m = detect_mentions(&tokenize("call the second from the bottom"), &ctx, &MentionRules::default());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].list_index, Some(3));
        assert_eq!(m[0].entity_id.as_deref(), Some("screen:3"));
        assert_eq!((m[0].start, m[0].end), (2, 5));
    }

    #[test]
    fn ordinal_grounding_brute_force() {
        let rules = MentionRules::default();
        for n in 1..=10 {
            let ctx = screen_ctx(n);
            for k in 1..=n {
                let u = format!("the {} from the bottom", ORDINALS[k - 1]);
                let m = detect_mentions(&tokenize(&u), &ctx, &rules);
                assert_eq!(m[0].list_index, Some(n - k), "k={k} n={n}");
                let u = format!("the {} from the top", ORDINALS[k - 1]);
                let m = detect_mentions(&tokenize(&u), &ctx, &rules);
                assert_eq!(m[0].list_index, Some(k - 1));
            }
        }
    }

    #[test]
    fn it_resolves_to_the_alarm() {
        let mut ctx = DialogContext::default();
        ctx.store.insert(
            EntityRecord::new("alarm:1", "Alarm", "2 pm alarm", EntitySource::Linguistic)
                .with_payload(SubTree::new("AlarmRef").with("AlarmRef.id", MrNode::string("alarm:1"))),
        );
        let tokens = tokenize("call it study time");
        let m = detect_mentions(&tokens, &ctx, &MentionRules::default());
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].start, m[0].entity_id.as_deref()), (1, Some("alarm:1")));
        let spans = mention_spans(&m, &ctx);
        assert_eq!(spans[0].payload.as_ref().unwrap().type_name, "AlarmRef");
    }

    #[test]
    fn nothing_fires_without_references() {
        let ctx = screen_ctx(3);
        assert!(detect_mentions(&tokenize("set an alarm for 7 am"), &ctx, &MentionRules::default()).is_empty());
    }

    #[test]
    fn possessor() {
        let mut ctx = DialogContext::default();
        ctx.store.insert(EntityRecord::new("d1", "business", "Dentist", EntitySource::Screen));
        let m = detect_mentions(&tokenize("call the dentist's office"), &ctx, &MentionRules::default());
        assert_eq!((m[0].start, m[0].end, m[0].rule.as_str()), (1, 3, "possessor"));
        assert_eq!(m[0].entity_id.as_deref(), Some("d1"));
    }

    #[test]
    fn rule_file_errors() {
        assert_eq!(MentionRules::parse("a\tb").unwrap_err().line, 1);
        assert!(MentionRules::parse("x\tit\tjump").is_err());
        assert_eq!(ordinal_value("2nd"), Some(2));
        assert_eq!(ordinal_value("nd"), None);
    }
}
