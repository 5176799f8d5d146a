use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::evaluation::replay::ReplayResult;
use crate::mr_tree::flatten;

/// Shown under every triage report.
pub const TRIAGE_FOOTER: &str = "Fault injection validates the triage mechanism only. \
The share of component errors that reach users depends on the ontology and on traffic, \
so no particular share is claimed.";

/// What kind of mistake a component error is.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorSignature {
    pub gold_verb: String,
    pub predicted_verb: String,
    /// First flat slot whose values differ, or `-` when only the verb does.
    pub path: String,
}

impl fmt::Display for ErrorSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} @ {}", self.gold_verb, self.predicted_verb, self.path)
    }
}

pub fn signature(r: &ReplayResult) -> ErrorSignature {
    let gold = flatten(&r.gold).unindexed();
    let Some(pred) = &r.predicted else {
        return ErrorSignature {
            gold_verb: r.gold.verb.clone(),
            predicted_verb: "<error>".into(),
            path: "-".into(),
        };
    };
    let pred_slots = flatten(pred).unindexed();
    let path = multiset_difference(&gold, &pred_slots)
        .chain(multiset_difference(&pred_slots, &gold))
        .min()
        .unwrap_or_else(|| "-".into());
    ErrorSignature {
        gold_verb: r.gold.verb.clone(),
        predicted_verb: pred.verb.clone(),
        path,
    }
}

/// Slot names of pairs in `a` not matched in `b`; both sorted.
fn multiset_difference<'a>(a: &'a [(String, String)], b: &'a [(String, String)]) -> impl Iterator<Item = String> + 'a {
    let mut rest = b.to_vec();
    a.iter().filter_map(move |x| match rest.iter().position(|y| y == x) {
        Some(i) => {
            rest.remove(i);
            None
        }
        None => Some(x.0.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub signature: ErrorSignature,
    pub user_facing: bool,
    pub count: usize,
    /// `record#turn` of every occurrence.
    pub turns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageSummary {
    pub turns: usize,
    pub component_errors: usize,
    pub user_facing_errors: usize,
    pub component_error_rate: f64,
    pub user_facing_rate: f64,
    /// User-facing errors over component errors; 0 without component errors.
    pub user_facing_fraction: f64,
    /// Component errors with an unchanged response.
    pub benign_divergences: usize,
    /// User-facing errors first, then by how often the signature occurs.
    pub review: Vec<ReviewItem>,
}

pub fn triage(results: &[ReplayResult]) -> TriageSummary {
    let n = results.len();
    let component = results.iter().filter(|r| r.component_error).count();
    let user = results.iter().filter(|r| r.user_facing_error).count();
    let mut groups: BTreeMap<(bool, ErrorSignature), Vec<String>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.component_error || r.user_facing_error) {
        groups
            .entry((r.user_facing_error, signature(r)))
            .or_default()
            .push(format!("{}#{}", r.record_id, r.turn));
    }
    let mut review: Vec<ReviewItem> = groups
        .into_iter()
        .map(|((user_facing, signature), turns)| ReviewItem {
            signature,
            user_facing,
            count: turns.len(),
            turns,
        })
        .collect();
    review.sort_by(|a, b| {
        b.user_facing
            .cmp(&a.user_facing)
            .then(b.count.cmp(&a.count))
            .then(a.signature.cmp(&b.signature))
    });
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    TriageSummary {
        turns: n,
        component_errors: component,
        user_facing_errors: user,
        component_error_rate: rate(component),
        user_facing_rate: rate(user),
        user_facing_fraction: if component == 0 {
            0.0
        } else {
            results.iter().filter(|r| r.component_error && r.user_facing_error).count() as f64 / component as f64
        },
        benign_divergences: results.iter().filter(|r| r.component_error && !r.user_facing_error).count(),
        review,
    }
}

impl fmt::Display for TriageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "turns                 {}", self.turns)?;
        writeln!(
            f,
            "component errors      {} ({:.1}%)",
            self.component_errors,
            100.0 * self.component_error_rate
        )?;
        writeln!(
            f,
            "user-facing errors    {} ({:.1}%)",
            self.user_facing_errors,
            100.0 * self.user_facing_rate
        )?;
        writeln!(f, "user-facing fraction  {:.3}", self.user_facing_fraction)?;
        writeln!(f, "benign divergences    {}", self.benign_divergences)?;
        if !self.review.is_empty() {
            writeln!(f, "\nreview queue:")?;
            for item in &self.review {
                let tag = if item.user_facing { "USER" } else { "benign" };
                writeln!(f, "  {:>5}  {:<6}  {}", item.count, tag, item.signature)?;
            }
        }
        write!(f, "\n{TRIAGE_FOOTER}")
    }
}
