use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mr_tree::{flatten, MrTree};
use crate::text::normalize;

/// Words that never change what the assistant does.
const FILLER: [&str; 4] = ["the", "my", "a", "an"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("response templates line {line}: {message}")]
pub struct ResponseTemplateError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
    Optional(Vec<Piece>),
}

fn parse_pieces(src: &str, line: usize) -> Result<Vec<Piece>, ResponseTemplateError> {
    let err = |message: &str| ResponseTemplateError {
        line,
        message: message.to_string(),
    };
    let mut stack: Vec<Vec<Piece>> = vec![Vec::new()];
    let mut text = String::new();
    let mut chars = src.chars();
    while let Some(c) = chars.next() {
        match c {
            '[' | ']' | '{' => {
                if !text.is_empty() {
                    stack.last_mut().unwrap().push(Piece::Text(std::mem::take(&mut text)));
                }
                match c {
                    '[' => stack.push(Vec::new()),
                    ']' => {
                        let inner = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| err("unbalanced `]`"))?;
                        stack.last_mut().unwrap().push(Piece::Optional(inner));
                    }
                    _ => {
                        let name: String = chars.by_ref().take_while(|&c| c != '}').collect();
                        if name.is_empty() {
                            return Err(err("empty slot"));
                        }
                        stack.last_mut().unwrap().push(Piece::Slot(name));
                    }
                }
            }
            _ => text.push(c),
        }
    }
    if !text.is_empty() {
        stack.last_mut().unwrap().push(Piece::Text(text));
    }
    if stack.len() != 1 {
        return Err(err("unbalanced `[`"));
    }
    Ok(stack.pop().unwrap())
}

fn slots_of(pieces: &[Piece], out: &mut Vec<String>) {
    for p in pieces {
        match p {
            Piece::Slot(s) => out.push(s.clone()),
            Piece::Optional(inner) => slots_of(inner, out),
            Piece::Text(_) => {}
        }
    }
}

/// Case-folded value with filler words removed.
pub fn normalize_value(v: &str) -> String {
    normalize(v)
        .split(' ')
        .filter(|w| !FILLER.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A deterministic rendering of what the assistant would do for a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseSketch {
    pub verb: String,
    pub text: String,
}

impl ResponseSketch {
    /// The response when no tree was produced.
    pub fn failure(reason: &str) -> Self {
        ResponseSketch {
            verb: "<error>".into(),
            text: format!("error: {reason}"),
        }
    }
}

impl fmt::Display for ResponseSketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Per-verb response templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseTemplates {
    templates: BTreeMap<String, Vec<Piece>>,
}

impl ResponseTemplates {
    pub fn parse(src: &str) -> Result<Self, ResponseTemplateError> {
        let mut templates = BTreeMap::new();
        for (i, raw) in src.lines().enumerate() {
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (verb, body) = raw.split_once('\t').ok_or(ResponseTemplateError {
                line: i + 1,
                message: "expected `verb<TAB>template`".into(),
            })?;
            templates.insert(verb.trim().to_string(), parse_pieces(body.trim(), i + 1)?);
        }
        Ok(ResponseTemplates { templates })
    }

    /// Whether the response for `verb` depends on `slot` (unindexed name).
    pub fn renders(&self, verb: &str, slot: &str) -> bool {
        match self.templates.get(verb) {
            Some(pieces) => {
                let mut names = Vec::new();
                slots_of(pieces, &mut names);
                names.iter().any(|n| n == slot)
            }
            None => true,
        }
    }

    pub fn render(&self, t: &MrTree) -> ResponseSketch {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (slot, v) in flatten(t).unindexed() {
            values.entry(slot).or_default().push(normalize_value(&v));
        }
        for vs in values.values_mut() {
            vs.sort();
        }
        let text = match self.templates.get(&t.verb) {
            Some(pieces) => render_pieces(pieces, &values).unwrap_or_default(),
            None => {
                let args: Vec<String> = values.iter().map(|(k, v)| format!("{k}={}", v.join(" and "))).collect();
                format!("{}({})", t.verb, args.join(", "))
            }
        };
        ResponseSketch {
            verb: t.verb.clone(),
            text: text.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }
}

impl Default for ResponseTemplates {
    fn default() -> Self {
        Self::parse(crate::resources::RESPONSES).expect("bundled response templates parse")
    }
}

/// `None` if an optional group had no values.
fn render_pieces(pieces: &[Piece], values: &BTreeMap<String, Vec<String>>) -> Option<String> {
    let mut out = String::new();
    let mut any_slot = false;
    let mut any_value = false;
    for p in pieces {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(s) => {
                any_slot = true;
                if let Some(v) = values.get(s) {
                    any_value = true;
                    out.push_str(&v.join(" and "));
                }
            }
            Piece::Optional(inner) => {
                if let Some(r) = render_pieces(inner, values) {
                    out.push_str(&r);
                }
            }
        }
    }
    (!any_slot || any_value).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::{parse_tree, MrNode, SubTree};
    use crate::resources;

    fn person(n: &str) -> MrNode {
        SubTree::new("Person").with("Person.name", MrNode::string(n)).into()
    }

    #[test]
    fn renders_bundled_templates() {
        let o = resources::toy_ontology();
        let r = ResponseTemplates::default();
        let t = parse_tree(&o, r#"Alarm.create(name="Fishing trip", recurrence=DateTime(dayOfWeek=Sunday))"#).unwrap();
        assert_eq!(r.render(&t).text, "alarm set called fishing trip every sunday");
        let m = MrTree::new("Message.send")
            .with("Message.recipient", person("Mark"))
            .with("Message.recipient", person("Eugene"));
        assert_eq!(r.render(&m).text, "message to eugene and mark");
        assert_eq!(r.render(&MrTree::new("Unsupported")).text, "sorry, that is not supported");
    }

    #[test]
    fn filler_words_do_not_matter() {
        let r = ResponseTemplates::default();
        let a = MrTree::new("Music.play").with("Music.query", MrNode::string("the Beatles"));
        let b = MrTree::new("Music.play").with("Music.query", MrNode::string("beatles"));
        assert_eq!(r.render(&a), r.render(&b));
    }

    #[test]
    fn unknown_verb_lists_slots() {
        let r = ResponseTemplates::parse("").unwrap();
        let t = MrTree::new("X.y").with("X.a", MrNode::string("B"));
        assert_eq!(r.render(&t).text, "X.y(a=b)");
        assert!(r.renders("X.y", "anything"));
    }

    #[test]
    fn template_errors() {
        assert!(ResponseTemplates::parse("Music.play\tplaying [ {query}").is_err());
        assert!(ResponseTemplates::parse("Music.play\tplaying ]").is_err());
        assert!(ResponseTemplates::parse("no tab").is_err());
    }
}
