//! Span featurization: lemmatization, constrained fuzzy matching and the
//! session entity store.

mod lemma;
mod store;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mr_tree::SubTree;
use crate::text::tokenize;

pub use lemma::{lemmatize, Lemmatizer, RuleLemmatizer, SuffixRule};
pub use store::{EntityRecord, EntitySource, EntityStore};

/// Metadata attached to tokens `start..=end` of an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<SubTree>,
    pub score: f64,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Closed list of function words ignored by fuzzy comparison.
pub const STOP_WORDS: &[&str] = &["a", "an", "the", "my", "our", "your", "his", "her", "their", "of"];

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

fn comparable(text: &str, lang: &str) -> String {
    tokenize(text)
        .iter()
        .filter(|t| !is_stop_word(t))
        .map(|t| lemmatize(t, lang))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `1 - levenshtein / max_len` over lemmatized, case-folded text with stop
/// words removed from both sides.
pub fn fuzzy_score_lang(mention: &str, candidate: &str, lang: &str) -> f64 {
    let a = comparable(mention, lang);
    let b = comparable(candidate, lang);
    if a.is_empty() || b.is_empty() {
        return if a == b && !mention.trim().is_empty() { 1.0 } else { 0.0 };
    }
    strsim::normalized_levenshtein(&a, &b)
}

pub fn fuzzy_score(mention: &str, candidate: &str) -> f64 {
    fuzzy_score_lang(mention, candidate, "en")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub threshold: f64,
    /// Windows with fewer characters only match exactly.
    pub min_fuzzy_chars: usize,
    pub max_window: usize,
    pub lang: String,
    pub sources: BTreeSet<EntitySource>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold: 0.8,
            min_fuzzy_chars: 3,
            max_window: 4,
            lang: "en".into(),
            sources: [EntitySource::Contact, EntitySource::AppDonation, EntitySource::Device]
                .into_iter()
                .collect(),
        }
    }
}

fn exact(window: &str, form: &str, lang: &str) -> bool {
    let w = tokenize(window);
    let f = tokenize(form);
    w == f
        || (w.len() == f.len()
            && w.iter().zip(&f).all(|(a, b)| lemmatize(a, lang) == lemmatize(b, lang)))
}

/// Score of `window` against one record: exact forms score 1, short windows
/// score 0 unless exact, otherwise the best fuzzy score over its forms.
pub fn record_score(window: &str, record: &EntityRecord, cfg: &MatchConfig) -> f64 {
    let mut best = 0.0f64;
    for form in record.forms() {
        if exact(window, form, &cfg.lang) {
            return 1.0;
        }
        if window.chars().filter(|c| !c.is_whitespace()).count() >= cfg.min_fuzzy_chars {
            best = best.max(fuzzy_score_lang(window, form, &cfg.lang));
        }
    }
    best
}

/// Non-overlapping spans for the best-matching entity of each window.
///
/// Windows never begin or end on a stop word. Overlaps are resolved greedily
/// by length, then score, then recency.
pub fn match_spans(tokens: &[String], store: &EntityStore, cfg: &MatchConfig) -> Vec<Span> {
    let mut candidates: Vec<(Span, usize)> = Vec::new();
    for i in 0..tokens.len() {
        for j in i..tokens.len().min(i + cfg.max_window) {
            if is_stop_word(&tokens[i]) || is_stop_word(&tokens[j]) {
                continue;
            }
            let window = tokens[i..=j].join(" ");
            let best = store
                .records()
                .iter()
                .filter(|r| cfg.sources.contains(&r.source))
                .map(|r| (record_score(&window, r, cfg), r))
                .filter(|(s, _)| *s >= cfg.threshold)
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.recency.cmp(&a.1.recency)));
            if let Some((score, r)) = best {
                candidates.push((
                    Span {
                        start: i,
                        end: j,
                        label: r.label.clone(),
                        canonical_id: Some(r.id.clone()),
                        payload: r.payload.clone(),
                        score,
                    },
                    r.recency,
                ));
            }
        }
    }
    candidates.sort_by(|(a, ra), (b, rb)| {
        b.len()
            .cmp(&a.len())
            .then(b.score.total_cmp(&a.score))
            .then(ra.cmp(rb))
            .then(a.start.cmp(&b.start))
    });
    let mut chosen: Vec<Span> = Vec::new();
    for (s, _) in candidates {
        if chosen.iter().all(|c| !c.overlaps(&s)) {
            chosen.push(s);
        }
    }
    chosen.sort_by_key(|s| s.start);
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn fuzzy_examples() {
        assert_eq!(fuzzy_score("morning routine", "My Morning Routine"), 1.0);
        assert_eq!(fuzzy_score("same", "same"), 1.0);
        assert!((fuzzy_score("al", "albert") - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(fuzzy_score_lang("pape", "papa", "ru"), 1.0);
        assert!(fuzzy_score_lang("pape", "papa", "en") < 0.8);
    }

    #[test]
    fn levenshtein_oracle_agrees() {
        fn lev(a: &[char], b: &[char]) -> usize {
            let mut d: Vec<Vec<usize>> = (0..=a.len()).map(|i| {
                let mut row = vec![0; b.len() + 1];
                row[0] = i;
                row
            }).collect();
            for j in 0..=b.len() {
                d[0][j] = j;
            }
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                    d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
                }
            }
            d[a.len()][b.len()]
        }
        for (x, y) in [("emma watson", "emily watson"), ("kitten", "sitting"), ("al", "albert")] {
            let (a, b): (Vec<char>, Vec<char>) = (x.chars().collect(), y.chars().collect());
            let want = 1.0 - lev(&a, &b) as f64 / a.len().max(b.len()) as f64;
            assert!((fuzzy_score(x, y) - want).abs() < 1e-12, "{x} {y}");
        }
    }

    fn contact(id: &str, label: &str, forms: &[&str]) -> EntityRecord {
        EntityRecord::new(id, label, forms[0], EntitySource::Contact).with_alternates(forms[1..].iter().copied())
    }

    #[test]
    fn call_mom() {
        let mut store = EntityStore::new("t");
        store.insert(contact("c1", "personRelation", &["mom"]));
        let spans = match_spans(&toks("call mom"), &store, &MatchConfig::default());
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (1, 1));
        assert_eq!(spans[0].label, "personRelation");
        assert_eq!(spans[0].canonical_id.as_deref(), Some("c1"));
        assert_eq!(spans[0].score, 1.0);
    }

    #[test]
    fn empty_store_and_short_strings() {
        let store = EntityStore::new("t");
        assert!(match_spans(&toks("call mom"), &store, &MatchConfig::default()).is_empty());
        let mut store = EntityStore::new("t");
        store.insert(contact("c2", "person", &["Albert"]));
        assert!(match_spans(&toks("call al"), &store, &MatchConfig::default()).is_empty());
        // Short but exact still matches.
        store.insert(contact("c3", "person", &["Al"]));
        let spans = match_spans(&toks("call al"), &store, &MatchConfig::default());
        assert_eq!(spans[0].canonical_id.as_deref(), Some("c3"));
    }

    #[test]
    fn routine_with_possessive_form() {
        let mut store = EntityStore::new("t");
        store.insert(EntityRecord::new("r1", "shortcut", "My Morning Routine", EntitySource::AppDonation));
        let spans = match_spans(&toks("run morning routine"), &store, &MatchConfig::default());
        assert_eq!((spans[0].start, spans[0].end, spans[0].score), (1, 2, 1.0));
    }

    #[test]
    fn screen_entities_are_not_matched_by_default() {
        let mut store = EntityStore::new("t");
        store.insert(EntityRecord::new("s1", "alarm", "study time", EntitySource::Screen));
        assert!(match_spans(&toks("delete study time"), &store, &MatchConfig::default()).is_empty());
    }
}
