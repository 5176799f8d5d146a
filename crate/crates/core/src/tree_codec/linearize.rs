use std::collections::BTreeMap;

use thiserror::Error;

use crate::mr_tree::{exact_match, Children, MrNode, MrTree};
use crate::ontology::Ontology;
use crate::span::Span;
use crate::tree_codec::{align, assemble, AssembleError, Alignment, Donation, Instruction, NodePath};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearizeError {
    #[error("string leaf at `{0}` has no anchor in the utterance")]
    UnalignedString(String),
    #[error("alignment does not describe this tree at `{0}`")]
    Inconsistent(String),
    #[error("copy ranges overlap or leave the utterance at `{0}`")]
    BadRange(String),
    #[error("instructions do not rebuild the tree: {0}")]
    RoundTrip(String),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
}

fn show(path: &NodePath) -> String {
    path.iter()
        .map(|(a, i)| format!("{a}[{i}]"))
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug)]
enum Place {
    Initial,
    Token(usize),
    Copy(usize, usize),
}

#[derive(Debug)]
struct Unit {
    path: NodePath,
    segments: Vec<String>,
    place: Place,
}

fn collect_units(
    children: &Children,
    prefix: &NodePath,
    a: &Alignment,
    seen: &mut usize,
    out: &mut Vec<Unit>,
) -> Result<(), LinearizeError> {
    for (attr, nodes) in children {
        for (i, node) in nodes.iter().enumerate() {
            let mut path = prefix.clone();
            path.push((attr.clone(), i));
            let mut segments: Vec<String> = path.iter().map(|(a, _)| a.clone()).collect();
            let place = if let Some(&(s, e)) = a.copy_ranges.get(&path) {
                if matches!(node, MrNode::Enum(_)) {
                    return Err(LinearizeError::Inconsistent(show(&path)));
                }
                Place::Copy(s, e)
            } else if a.references.contains(&path) {
                if !matches!(node, MrNode::Tree(_)) {
                    return Err(LinearizeError::Inconsistent(show(&path)));
                }
                Place::Initial
            } else {
                match node {
                    MrNode::Tree(sub) => {
                        collect_units(&sub.children, &path, a, seen, out)?;
                        continue;
                    }
                    MrNode::String(_) => return Err(LinearizeError::UnalignedString(show(&path))),
                    MrNode::Enum(m) => {
                        segments.push(m.clone());
                        match a.enum_tokens.get(&path) {
                            Some(&t) => Place::Token(t),
                            None if a.unaligned.contains(&path) => Place::Initial,
                            None => return Err(LinearizeError::Inconsistent(show(&path))),
                        }
                    }
                }
            };
            *seen += 1;
            out.push(Unit { path, segments, place });
        }
    }
    Ok(())
}

/// Tracks which child of each repeatable attribute the assembler would reuse.
struct FlushTracker<'a> {
    ontology: &'a Ontology,
    current: BTreeMap<(NodePath, String), usize>,
}

impl FlushTracker<'_> {
    fn repeatable_chain(&self, path: &NodePath) -> Vec<((NodePath, String), usize)> {
        (0..path.len())
            .filter(|&k| self.ontology.attribute(&path[k].0).is_some_and(|d| d.repeatable))
            .map(|k| ((path[..k].to_vec(), path[k].0.clone()), path[k].1))
            .collect()
    }

    /// Whether a FLUSH must precede this unit; updates the simulation.
    fn enter(&mut self, path: &NodePath) -> bool {
        let chain = self.repeatable_chain(path);
        let flush = chain
            .iter()
            .any(|(key, idx)| self.current.get(key).is_some_and(|c| c != idx));
        if flush {
            self.current.clear();
        }
        for (key, idx) in chain {
            self.current.insert(key, idx);
        }
        flush
    }
}

/// Emits the token-synchronous instruction sequence for an aligned tree and
/// checks that it assembles back to the same tree.
pub fn linearize(
    ontology: &Ontology,
    tree: &MrTree,
    tokens: &[String],
    alignment: &Alignment,
    spans: &[Span],
    donations: &[Donation],
) -> Result<Vec<Instruction>, LinearizeError> {
    let mut units = Vec::new();
    let mut seen = 0;
    collect_units(&tree.children, &Vec::new(), alignment, &mut seen, &mut units)?;
    let keys = alignment.copy_ranges.len()
        + alignment.references.len()
        + alignment.enum_tokens.len()
        + alignment.unaligned.len();
    if keys != seen {
        return Err(LinearizeError::Inconsistent("<extra alignment entries>".into()));
    }

    let n = tokens.len();
    let mut covered = vec![false; n];
    for u in &units {
        match u.place {
            Place::Copy(s, e) => {
                if s > e || e >= n || covered[s..=e].iter().any(|c| *c) {
                    return Err(LinearizeError::BadRange(show(&u.path)));
                }
                covered[s..=e].iter_mut().for_each(|c| *c = true);
            }
            Place::Token(t) if t >= n => return Err(LinearizeError::BadRange(show(&u.path))),
            _ => {}
        }
    }

    let mut tracker = FlushTracker {
        ontology,
        current: BTreeMap::new(),
    };
    let mut out = vec![Instruction::Path(tree.verb.clone())];
    let emit_path = |out: &mut Vec<Instruction>, u: &Unit| {
        out.extend(u.segments.iter().cloned().map(Instruction::Path));
    };
    for u in units.iter().filter(|u| matches!(u.place, Place::Initial)) {
        if tracker.enter(&u.path) {
            out.push(Instruction::Flush);
        }
        emit_path(&mut out, u);
    }
    for t in 0..n {
        for u in &units {
            if matches!(u.place, Place::Copy(s, e) if e == t && s < t) {
                emit_path(&mut out, u);
            }
        }
        for u in &units {
            if matches!(u.place, Place::Token(k) if k == t) {
                if tracker.enter(&u.path) {
                    out.push(Instruction::Flush);
                }
                emit_path(&mut out, u);
            }
        }
        for u in &units {
            if let Place::Copy(s, e) = u.place {
                if s == t {
                    if tracker.enter(&u.path) {
                        out.push(Instruction::Flush);
                    }
                    out.push(Instruction::Copy);
                    if e == t {
                        emit_path(&mut out, u);
                    }
                }
            }
        }
        out.push(if t + 1 < n { Instruction::Next } else { Instruction::End });
    }
    if n == 0 {
        out.push(Instruction::End);
    }

    let rebuilt = assemble(ontology, &out, tokens, spans, donations)?;
    if !exact_match(&rebuilt, tree) {
        return Err(LinearizeError::RoundTrip(format!("{rebuilt} != {tree}")));
    }
    Ok(out)
}

/// [`align`] followed by [`linearize`].
pub fn tree_to_instructions(
    ontology: &Ontology,
    tree: &MrTree,
    tokens: &[String],
    spans: &[Span],
    donations: &[Donation],
) -> Result<Vec<Instruction>, LinearizeError> {
    let a = align(ontology, tree, tokens, spans, donations);
    linearize(ontology, tree, tokens, &a, spans, donations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::SubTree;
    use crate::resources;
    use crate::tree_codec::{parse_sequence, render_sequence};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn reproduces_fishing_trip_trace() {
        let o = resources::toy_ontology();
        let t = MrTree::new("Alarm.create")
            .with("Alarm.name", MrNode::string("Fishing trip"))
            .with(
                "Alarm.recurrence",
                SubTree::new("DateTime")
                    .with("DateTime.dayOfWeek", MrNode::member("DayOfWeek.Sunday"))
                    .into(),
            );
        let tokens = toks("please create fishing trip alarm on sundays");
        let seq = tree_to_instructions(&o, &t, &tokens, &[], &[]).unwrap();
        assert_eq!(
            render_sequence(&seq),
            "Alarm.create NEXT NEXT COPY NEXT Alarm.name NEXT NEXT NEXT \
             Alarm.recurrence DateTime.dayOfWeek DayOfWeek.Sunday END"
        );
    }

    #[test]
    fn bare_verb_single_token() {
        let o = resources::toy_ontology();
        let seq = tree_to_instructions(&o, &MrTree::new("Unsupported"), &toks("hmm"), &[], &[]).unwrap();
        assert_eq!(seq, parse_sequence("Unsupported END"));
    }

    #[test]
    fn recipients_get_a_flush() {
        let o = resources::toy_ontology();
        let person = |n: &str| SubTree::new("Person").with("Person.name", MrNode::string(n)).into();
        let t = MrTree::new("Message.send")
            .with("Message.recipient", person("eugene"))
            .with("Message.recipient", person("mark"));
        let tokens = toks("send a message to eugene and mark");
        let seq = tree_to_instructions(&o, &t, &tokens, &[], &[]).unwrap();
        assert_eq!(
            render_sequence(&seq),
            "Message.send NEXT NEXT NEXT NEXT COPY Message.recipient Person.name \
             NEXT NEXT FLUSH COPY Message.recipient Person.name END"
        );
    }

    #[test]
    fn unaligned_enum_goes_to_first_token_and_string_fails() {
        let o = resources::toy_ontology();
        let t = MrTree::new("Call.make").with(
            "Call.callee",
            SubTree::new("Person")
                .with("Person.relation", MrNode::member("PersonRelation.Sister"))
                .into(),
        );
        let seq = tree_to_instructions(&o, &t, &toks("ring her"), &[], &[]).unwrap();
        assert_eq!(
            render_sequence(&seq),
            "Call.make Call.callee Person.relation PersonRelation.Sister NEXT END"
        );
        let t = MrTree::new("Music.play").with("Music.query", MrNode::string("jazz"));
        assert!(matches!(
            tree_to_instructions(&o, &t, &toks("play it"), &[], &[]),
            Err(LinearizeError::UnalignedString(_))
        ));
    }
}
