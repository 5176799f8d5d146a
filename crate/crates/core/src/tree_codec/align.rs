use std::collections::{BTreeMap, BTreeSet};

use crate::mr_tree::{subtree_match, Children, MrNode, MrTree};
use crate::ontology::Ontology;
use crate::span::{lemmatize, Span};
use crate::text::tokenize;
use crate::tree_codec::Donation;

/// Address of a node: `(attribute, index among that attribute's values)` per level.
pub type NodePath = Vec<(String, usize)>;

/// Where each part of a tree is anchored in the utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    /// Copied string leaves and span-payload subtrees, inclusive token ranges.
    pub copy_ranges: BTreeMap<NodePath, (usize, usize)>,
    /// Enum leaves anchored at a trigger token.
    pub enum_tokens: BTreeMap<NodePath, usize>,
    /// Root-level subtrees supplied by a context donation.
    pub references: BTreeSet<NodePath>,
    /// Leaves with no anchor in the utterance.
    pub unaligned: BTreeSet<NodePath>,
}

struct Aligner<'a> {
    ontology: &'a Ontology,
    tokens: &'a [String],
    spans: &'a [Span],
    donations: &'a [Donation],
    used: Vec<bool>,
    strings: Vec<(NodePath, &'a str)>,
    enums: Vec<(NodePath, &'a str)>,
    out: Alignment,
}

impl<'a> Aligner<'a> {
    fn free(&self, s: usize, e: usize) -> bool {
        e < self.used.len() && self.used[s..=e].iter().all(|u| !u)
    }

    fn claim(&mut self, s: usize, e: usize) {
        self.used[s..=e].iter_mut().for_each(|u| *u = true);
    }

    fn walk(&mut self, children: &'a Children, prefix: &NodePath) {
        for (attr, nodes) in children {
            for (i, node) in nodes.iter().enumerate() {
                let mut path = prefix.clone();
                path.push((attr.clone(), i));
                match node {
                    MrNode::Tree(sub) => {
                        let span = self
                            .spans
                            .iter()
                            .filter(|sp| sp.payload.as_ref().is_some_and(|p| subtree_match(p, sub)))
                            .filter(|sp| self.free(sp.start, sp.end))
                            .min_by_key(|sp| (sp.start, sp.end));
                        if let Some(sp) = span {
                            let (s, e) = (sp.start, sp.end);
                            self.claim(s, e);
                            self.out.copy_ranges.insert(path, (s, e));
                            continue;
                        }
                        let donated = prefix.is_empty()
                            && self
                                .donations
                                .iter()
                                .find(|d| &d.attribute == attr)
                                .is_some_and(|d| subtree_match(&d.payload, sub));
                        if donated {
                            self.out.references.insert(path);
                        } else {
                            self.walk(&sub.children, &path);
                        }
                    }
                    MrNode::String(s) => self.strings.push((path, s)),
                    MrNode::Enum(m) => self.enums.push((path, m)),
                }
            }
        }
    }

    fn find_window(&self, leaf: &[String], eq: impl Fn(&str, &str) -> bool) -> Option<usize> {
        let n = leaf.len();
        if n == 0 || n > self.tokens.len() {
            return None;
        }
        (0..=self.tokens.len() - n).find(|&w| {
            self.free(w, w + n - 1) && leaf.iter().zip(&self.tokens[w..w + n]).all(|(a, b)| eq(a, b))
        })
    }

    fn align_strings(&mut self) {
        for (path, text) in std::mem::take(&mut self.strings) {
            let leaf = tokenize(text);
            let found = self
                .find_window(&leaf, |a, b| a == b)
                .or_else(|| self.find_window(&leaf, |a, b| lemmatize(a, "en") == lemmatize(b, "en")));
            match found {
                Some(w) => {
                    let e = w + leaf.len() - 1;
                    self.claim(w, e);
                    self.out.copy_ranges.insert(path, (w, e));
                }
                None => {
                    self.out.unaligned.insert(path);
                }
            }
        }
    }

    fn align_enums(&mut self) {
        let mut taken = self.used.clone();
        for (path, member) in std::mem::take(&mut self.enums) {
            let triggers = self.ontology.triggers(member);
            let hit = (0..self.tokens.len()).find(|&t| {
                !taken[t]
                    && triggers.iter().any(|tr| {
                        let tok = &self.tokens[t];
                        tok == tr || lemmatize(tok, "en") == lemmatize(tr, "en")
                    })
            });
            match hit {
                Some(t) => {
                    taken[t] = true;
                    self.out.enum_tokens.insert(path, t);
                }
                None => {
                    self.out.unaligned.insert(path);
                }
            }
        }
    }
}

/// Anchors a tree in a tokenized utterance.
///
/// Subtrees equal to a span payload take that span's range; root-level subtrees
/// equal to a donation become references; string leaves take the leftmost free
/// matching token window; enum leaves take the leftmost free trigger token.
pub fn align(
    ontology: &Ontology,
    tree: &MrTree,
    tokens: &[String],
    spans: &[Span],
    donations: &[Donation],
) -> Alignment {
    let mut a = Aligner {
        ontology,
        tokens,
        spans,
        donations,
        used: vec![false; tokens.len()],
        strings: Vec::new(),
        enums: Vec::new(),
        out: Alignment::default(),
    };
    a.walk(&tree.children, &Vec::new());
    a.align_strings();
    a.align_enums();
    a.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::SubTree;
    use crate::resources;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn p(parts: &[(&str, usize)]) -> NodePath {
        parts.iter().map(|(a, i)| (a.to_string(), *i)).collect()
    }

    #[test]
    fn fishing_trip_alarm_alignment() {
        let o = resources::toy_ontology();
        let t = MrTree::new("Alarm.create")
            .with("Alarm.name", MrNode::string("Fishing trip"))
            .with(
                "Alarm.recurrence",
                SubTree::new("DateTime")
                    .with("DateTime.dayOfWeek", MrNode::member("DayOfWeek.Sunday"))
                    .into(),
            );
        let a = align(&o, &t, &toks("please create fishing trip alarm on sundays"), &[], &[]);
        assert_eq!(a.copy_ranges[&p(&[("Alarm.name", 0)])], (2, 3));
        assert_eq!(
            a.enum_tokens[&p(&[("Alarm.recurrence", 0), ("DateTime.dayOfWeek", 0)])],
            6
        );
        assert!(a.unaligned.is_empty());
    }

    #[test]
    fn missing_leaf_is_unaligned() {
        let o = resources::toy_ontology();
        let t = MrTree::new("Music.play").with("Music.query", MrNode::string("jazz"));
        let a = align(&o, &t, &toks("play something"), &[], &[]);
        assert!(a.unaligned.contains(&p(&[("Music.query", 0)])));
    }

    fn person(name: &str) -> MrNode {
        SubTree::new("Person").with("Person.name", MrNode::string(name)).into()
    }

    #[test]
    fn identical_leaves_take_successive_windows() {
        let o = resources::toy_ontology();
        let tokens = toks("text home and home");
        let t = MrTree::new("Message.send")
            .with("Message.recipient", person("home"))
            .with("Message.recipient", person("home"));
        let a = align(&o, &t, &tokens, &[], &[]);
        let got: Vec<(usize, usize)> = (0..2)
            .map(|i| a.copy_ranges[&p(&[("Message.recipient", i), ("Person.name", 0)])])
            .collect();
        // Oracle: among all injective assignments of the two leaves to matching
        // tokens, the lexicographically smallest one.
        let positions: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i] == "home").collect();
        let mut best = None;
        for &x in &positions {
            for &y in &positions {
                if x != y {
                    let cand = vec![(x, x), (y, y)];
                    if best.as_ref().map_or(true, |b| cand < *b) {
                        best = Some(cand);
                    }
                }
            }
        }
        assert_eq!(Some(got), best);
    }

    #[test]
    fn enum_lemma_fallback() {
        let o = resources::toy_ontology();
        let t = MrTree::new("Alarm.create").with(
            "Alarm.recurrence",
            SubTree::new("DateTime")
                .with("DateTime.dayOfWeek", MrNode::member("DayOfWeek.Monday"))
                .into(),
        );
        let a = align(&o, &t, &toks("alarm on mondays"), &[], &[]);
        assert_eq!(a.enum_tokens.values().copied().collect::<Vec<_>>(), vec![2]);
    }
}
