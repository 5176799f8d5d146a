//! Hierarchical meaning representations: construction, rendering, parsing,
//! validation, exact-match comparison and flattening.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Ontology, Owner, ValueType};
use crate::text::{normalize, short_name, split_qualified};

/// Attribute (qualified name) to its ordered values.
pub type Children = BTreeMap<String, Vec<MrNode>>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MrTree {
    pub verb: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub children: Children,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubTree {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub children: Children,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrNode {
    String(String),
    /// Qualified enum member, e.g. `DayOfWeek.Sunday`.
    Enum(String),
    Tree(SubTree),
}

impl MrNode {
    pub fn string(text: impl Into<String>) -> Self {
        MrNode::String(text.into())
    }

    pub fn member(member: impl Into<String>) -> Self {
        MrNode::Enum(member.into())
    }
}

impl MrTree {
    pub fn new(verb: impl Into<String>) -> Self {
        MrTree {
            verb: verb.into(),
            children: Children::new(),
        }
    }

    /// Appends a value under `attr`.
    pub fn with(mut self, attr: impl Into<String>, node: MrNode) -> Self {
        self.children.entry(attr.into()).or_default().push(node);
        self
    }

    /// Number of leaves (strings and enum members), payload subtrees included.
    pub fn leaf_count(&self) -> usize {
        leaf_paths(self).len()
    }
}

impl SubTree {
    pub fn new(type_name: impl Into<String>) -> Self {
        SubTree {
            type_name: type_name.into(),
            children: Children::new(),
        }
    }

    pub fn with(mut self, attr: impl Into<String>, node: MrNode) -> Self {
        self.children.entry(attr.into()).or_default().push(node);
        self
    }
}

impl From<SubTree> for MrNode {
    fn from(t: SubTree) -> Self {
        MrNode::Tree(t)
    }
}

fn write_string_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

fn write_children(f: &mut impl fmt::Write, children: &Children, holes: &[String]) -> fmt::Result {
    let mut entries: Vec<(&str, Option<&MrNode>)> = Vec::new();
    for (attr, nodes) in children {
        for n in nodes {
            entries.push((attr, Some(n)));
        }
    }
    for h in holes {
        entries.push((h, None));
    }
    entries.sort_by(|a, b| a.0.cmp(b.0));
    for (i, (attr, node)) in entries.into_iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}=", short_name(attr))?;
        match node {
            Some(n) => write_node(f, n)?,
            None => f.write_char('?')?,
        }
    }
    Ok(())
}

fn write_node(f: &mut impl fmt::Write, node: &MrNode) -> fmt::Result {
    match node {
        MrNode::String(s) => write_string_literal(f, s),
        MrNode::Enum(m) => f.write_str(short_name(m)),
        MrNode::Tree(t) => {
            write!(f, "{}(", t.type_name)?;
            write_children(f, &t.children, &[])?;
            f.write_char(')')
        }
    }
}

/// Renders as `Verb(attr=Type(sub=Leaf), name="text")`.
impl fmt::Display for MrTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.verb)?;
        write_children(f, &self.children, &[])?;
        f.write_char(')')
    }
}

impl fmt::Display for SubTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &MrNode::Tree(self.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Prompt,
    Inform,
    Confirm,
    None,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Prompt => "Prompt",
            ActionKind::Inform => "Inform",
            ActionKind::Confirm => "Confirm",
            ActionKind::None => "None",
        }
    }
}

/// What the assistant did on its previous turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemAction {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<MrTree>,
    /// Qualified verb attributes the assistant asked for (`from=?`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unfilled: Vec<String>,
}

impl Default for SystemAction {
    fn default() -> Self {
        SystemAction::none()
    }
}

impl SystemAction {
    pub fn none() -> Self {
        SystemAction {
            kind: ActionKind::None,
            payload: None,
            unfilled: Vec::new(),
        }
    }

    pub fn inform(tree: MrTree) -> Self {
        SystemAction {
            kind: ActionKind::Inform,
            payload: Some(tree),
            unfilled: Vec::new(),
        }
    }

    pub fn prompt(tree: MrTree, mut unfilled: Vec<String>) -> Self {
        unfilled.sort();
        unfilled.dedup();
        SystemAction {
            kind: ActionKind::Prompt,
            payload: Some(tree),
            unfilled,
        }
    }

    /// Unfilled markers only make sense on prompts.
    pub fn is_well_formed(&self) -> bool {
        (self.kind == ActionKind::Prompt || self.unfilled.is_empty())
            && (self.kind == ActionKind::None) == self.payload.is_none()
    }
}

impl fmt::Display for SystemAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            None => f.write_str(self.kind.as_str()),
            Some(t) => {
                write!(f, "{}({}(", self.kind.as_str(), t.verb)?;
                write_children(f, &t.children, &self.unfilled)?;
                f.write_str("))")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeParseError {
    #[error("at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("`{owner}` has no attribute `{attribute}`")]
    UnknownAttribute { owner: String, attribute: String },
    #[error("`{0}` is not a member of `{1}`")]
    UnknownMember(String, String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unfilled markers are only allowed at the top level of a prompt")]
    MisplacedHole,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Punct(char),
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, TreeParseError> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = input.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if "(),=?".contains(c) {
            out.push((off, Tok::Punct(c)));
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(&(_, c)) = bytes.get(i) else {
                    return Err(TreeParseError::Syntax {
                        offset: off,
                        message: "unterminated string".into(),
                    });
                };
                i += 1;
                match c {
                    '"' => break,
                    '\\' => {
                        let Some(&(_, e)) = bytes.get(i) else {
                            return Err(TreeParseError::Syntax {
                                offset: off,
                                message: "dangling escape".into(),
                            });
                        };
                        s.push(e);
                        i += 1;
                    }
                    c => s.push(c),
                }
            }
            out.push((off, Tok::Str(s)));
        } else if c.is_alphanumeric() || c == '_' || c == '#' {
            let start = i;
            while i < bytes.len() && {
                let c = bytes[i].1;
                c.is_alphanumeric() || c == '_' || c == '.' || c == '#'
            } {
                i += 1;
            }
            let s: String = bytes[start..i].iter().map(|(_, c)| c).collect();
            out.push((off, Tok::Ident(s)));
        } else {
            return Err(TreeParseError::Syntax {
                offset: off,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct TreeParser<'a> {
    o: &'a Ontology,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl<'a> TreeParser<'a> {
    fn new(o: &'a Ontology, input: &str) -> Result<Self, TreeParseError> {
        Ok(TreeParser {
            o,
            toks: lex(input)?,
            pos: 0,
            end: input.len(),
        })
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TreeParseError> {
        Err(TreeParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), TreeParseError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{c}`")),
        }
    }

    fn ident(&mut self) -> Result<String, TreeParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                self.err("expected identifier")
            }
        }
    }

    fn finish(&self) -> Result<(), TreeParseError> {
        if self.pos < self.toks.len() {
            return self.err("trailing input");
        }
        Ok(())
    }

    /// Parses `Verb(...)`; `holes` collects top-level `attr=?` markers.
    fn tree(&mut self, holes: Option<&mut Vec<String>>) -> Result<MrTree, TreeParseError> {
        let verb = self.ident()?;
        let def = self
            .o
            .verb(&verb)
            .ok_or_else(|| TreeParseError::UnknownVerb(verb.clone()))?;
        let children = self.args(Owner::Verb(def), holes)?;
        Ok(MrTree { verb, children })
    }

    fn args(
        &mut self,
        owner: Owner<'a>,
        mut holes: Option<&mut Vec<String>>,
    ) -> Result<Children, TreeParseError> {
        self.expect('(')?;
        let mut children = Children::new();
        if self.peek() == Some(&Tok::Punct(')')) {
            self.pos += 1;
            return Ok(children);
        }
        let qualifier = match owner {
            Owner::Verb(v) => split_qualified(&v.name).0.to_string(),
            Owner::Type(t) => t.name.clone(),
        };
        loop {
            let short = self.ident()?;
            let qualified = format!("{qualifier}.{short}");
            let attr = owner
                .attribute(&qualified)
                .ok_or_else(|| TreeParseError::UnknownAttribute {
                    owner: owner.name().to_string(),
                    attribute: short.clone(),
                })?;
            self.expect('=')?;
            if self.peek() == Some(&Tok::Punct('?')) {
                self.pos += 1;
                match holes.as_deref_mut() {
                    Some(h) => h.push(qualified),
                    None => return Err(TreeParseError::MisplacedHole),
                }
            } else {
                let node = self.value(&attr.value_type)?;
                children.entry(qualified).or_default().push(node);
            }
            match self.next() {
                Some(Tok::Punct(',')) => continue,
                Some(Tok::Punct(')')) => break,
                _ => {
                    self.pos -= 1;
                    return self.err("expected `,` or `)`");
                }
            }
        }
        Ok(children)
    }

    fn value(&mut self, ty: &ValueType) -> Result<MrNode, TreeParseError> {
        match (ty, self.next()) {
            (ValueType::String, Some(Tok::Str(s))) => Ok(MrNode::String(s)),
            (ValueType::Enum(e), Some(Tok::Ident(m))) => {
                let member = format!("{e}.{m}");
                let def = self.o.enum_def(e).expect("validated ontology");
                if def.members.contains(&member) {
                    Ok(MrNode::Enum(member))
                } else {
                    Err(TreeParseError::UnknownMember(m, e.clone()))
                }
            }
            (ValueType::Type(t), Some(Tok::Ident(name))) => {
                if &name != t {
                    return Err(TreeParseError::UnknownType(name));
                }
                let def = self
                    .o
                    .value_type(t)
                    .ok_or_else(|| TreeParseError::UnknownType(t.clone()))?;
                let children = self.args(Owner::Type(def), None)?;
                Ok(MrNode::Tree(SubTree {
                    type_name: name,
                    children,
                }))
            }
            _ => {
                self.pos -= 1;
                self.err(format!("expected a value of type `{ty}`"))
            }
        }
    }
}

/// Parses the textual rendering back into a tree.
pub fn parse_tree(o: &Ontology, text: &str) -> Result<MrTree, TreeParseError> {
    let mut p = TreeParser::new(o, text)?;
    let t = p.tree(None)?;
    p.finish()?;
    Ok(t)
}

/// Parses a bare value-type subtree such as `Person(name="eugene")`.
pub fn parse_subtree(o: &Ontology, text: &str) -> Result<SubTree, TreeParseError> {
    let mut p = TreeParser::new(o, text)?;
    let name = p.ident()?;
    if o.value_type(&name).is_none() {
        return Err(TreeParseError::UnknownType(name));
    }
    p.pos -= 1;
    let node = p.value(&ValueType::Type(name))?;
    p.finish()?;
    match node {
        MrNode::Tree(t) => Ok(t),
        _ => unreachable!("type values parse to subtrees"),
    }
}

/// Parses `Prompt(Flight.book(from=?, to=Location(name="paris")))`,
/// `Inform(...)`, `Confirm(...)` or `None`.
pub fn parse_action(o: &Ontology, text: &str) -> Result<SystemAction, TreeParseError> {
    let mut p = TreeParser::new(o, text)?;
    let kind = match p.ident()?.as_str() {
        "None" => {
            p.finish()?;
            return Ok(SystemAction::none());
        }
        "Prompt" => ActionKind::Prompt,
        "Inform" => ActionKind::Inform,
        "Confirm" => ActionKind::Confirm,
        other => return p.err(format!("unknown action kind `{other}`")),
    };
    p.expect('(')?;
    let mut holes = Vec::new();
    let tree = p.tree((kind == ActionKind::Prompt).then_some(&mut holes))?;
    p.expect(')')?;
    p.finish()?;
    let mut action = SystemAction {
        kind,
        payload: Some(tree),
        unfilled: Vec::new(),
    };
    if kind == ActionKind::Prompt {
        holes.sort();
        holes.dedup();
        action.unfilled = holes;
    }
    Ok(action)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownVerb(String),
    UnknownAttribute { owner: String, attribute: String },
    TooManyValues { attribute: String, count: usize },
    NoValues(String),
    EmptyString(String),
    WrongKind { attribute: String, expected: ValueType },
    NotAMember { attribute: String, member: String },
    EmptySubtree(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownVerb(v) => write!(f, "unknown verb `{v}`"),
            Violation::UnknownAttribute { owner, attribute } => {
                write!(f, "`{owner}` has no attribute `{attribute}`")
            }
            Violation::TooManyValues { attribute, count } => {
                write!(f, "non-repeatable `{attribute}` has {count} values")
            }
            Violation::NoValues(a) => write!(f, "`{a}` is present with no values"),
            Violation::EmptyString(a) => write!(f, "empty string under `{a}`"),
            Violation::WrongKind { attribute, expected } => {
                write!(f, "`{attribute}` expects a value of type `{expected}`")
            }
            Violation::NotAMember { attribute, member } => {
                write!(f, "`{member}` is not a valid value for `{attribute}`")
            }
            Violation::EmptySubtree(a) => write!(f, "empty subtree under `{a}`"),
        }
    }
}

/// All ways `t` fails to conform to `o`; empty means valid.
pub fn validate_tree(o: &Ontology, t: &MrTree) -> Vec<Violation> {
    let mut out = Vec::new();
    match o.verb(&t.verb) {
        None => out.push(Violation::UnknownVerb(t.verb.clone())),
        Some(v) => validate_children(o, Owner::Verb(v), &t.children, &mut out),
    }
    out
}

/// Validates a payload subtree as if it hung under an attribute of its type.
pub fn validate_subtree(o: &Ontology, t: &SubTree) -> Vec<Violation> {
    let mut out = Vec::new();
    match o.value_type(&t.type_name) {
        None => out.push(Violation::UnknownVerb(t.type_name.clone())),
        Some(def) => {
            if t.children.is_empty() {
                out.push(Violation::EmptySubtree(t.type_name.clone()));
            }
            validate_children(o, Owner::Type(def), &t.children, &mut out)
        }
    }
    out
}

fn validate_children(o: &Ontology, owner: Owner<'_>, children: &Children, out: &mut Vec<Violation>) {
    for (name, nodes) in children {
        let Some(attr) = owner.attribute(name) else {
            out.push(Violation::UnknownAttribute {
                owner: owner.name().to_string(),
                attribute: name.clone(),
            });
            continue;
        };
        if nodes.is_empty() {
            out.push(Violation::NoValues(name.clone()));
        }
        if !attr.repeatable && nodes.len() > 1 {
            out.push(Violation::TooManyValues {
                attribute: name.clone(),
                count: nodes.len(),
            });
        }
        for node in nodes {
            match (&attr.value_type, node) {
                (ValueType::String, MrNode::String(s)) => {
                    if s.trim().is_empty() {
                        out.push(Violation::EmptyString(name.clone()));
                    }
                }
                (ValueType::Enum(e), MrNode::Enum(m)) => {
                    let ok = o.enum_def(e).is_some_and(|d| d.members.contains(m));
                    if !ok {
                        out.push(Violation::NotAMember {
                            attribute: name.clone(),
                            member: m.clone(),
                        });
                    }
                }
                (ValueType::Type(ty), MrNode::Tree(sub)) if &sub.type_name == ty => {
                    if sub.children.is_empty() {
                        out.push(Violation::EmptySubtree(name.clone()));
                    }
                    let def = o.value_type(ty).expect("validated ontology");
                    validate_children(o, Owner::Type(def), &sub.children, out);
                }
                (expected, _) => out.push(Violation::WrongKind {
                    attribute: name.clone(),
                    expected: expected.clone(),
                }),
            }
        }
    }
}

fn canonical_children(children: &Children, out: &mut String) {
    for (attr, nodes) in children.iter().filter(|(_, n)| !n.is_empty()) {
        let mut rendered: Vec<String> = nodes.iter().map(canonical_node).collect();
        rendered.sort();
        let _ = write!(out, "{attr}=[{}];", rendered.join(","));
    }
}

fn canonical_node(node: &MrNode) -> String {
    match node {
        MrNode::String(s) => format!("s{:?}", normalize(s)),
        MrNode::Enum(m) => format!("e{m}"),
        MrNode::Tree(t) => {
            let mut s = format!("t{}(", t.type_name);
            canonical_children(&t.children, &mut s);
            s.push(')');
            s
        }
    }
}

/// Order-, case- and whitespace-insensitive rendering used for comparison.
/// Values of one attribute compare as a multiset.
pub fn canonical_form(t: &MrTree) -> String {
    let mut s = format!("{}(", t.verb);
    canonical_children(&t.children, &mut s);
    s.push(')');
    s
}

pub fn exact_match(a: &MrTree, b: &MrTree) -> bool {
    a.verb == b.verb && canonical_form(a) == canonical_form(b)
}

pub fn subtree_match(a: &SubTree, b: &SubTree) -> bool {
    canonical_node(&MrNode::Tree(a.clone())) == canonical_node(&MrNode::Tree(b.clone()))
}

/// A leaf reached by a chain of attributes from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafPath<'a> {
    /// Qualified attribute names from the verb down to the leaf.
    pub attributes: Vec<&'a str>,
    pub leaf: &'a MrNode,
}

impl LeafPath<'_> {
    /// Short attribute names joined with `.`, e.g. `recurrence.dayOfWeek`.
    pub fn slot_name(&self) -> String {
        self.attributes
            .iter()
            .map(|a| short_name(a))
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// Depth-first leaves in attribute-name order.
pub fn leaf_paths(t: &MrTree) -> Vec<LeafPath<'_>> {
    fn walk<'a>(children: &'a Children, prefix: &mut Vec<&'a str>, out: &mut Vec<LeafPath<'a>>) {
        for (attr, nodes) in children {
            prefix.push(attr);
            for n in nodes {
                match n {
                    MrNode::Tree(sub) => walk(&sub.children, prefix, out),
                    leaf => out.push(LeafPath {
                        attributes: prefix.clone(),
                        leaf,
                    }),
                }
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(&t.children, &mut Vec::new(), &mut out);
    out
}

/// Flat attribute/value rendering of a tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlatFrame {
    pub intent: String,
    pub slots: BTreeSet<(String, String)>,
}

impl FlatFrame {
    /// Values case-folded and whitespace-collapsed.
    pub fn normalized(&self) -> FlatFrame {
        FlatFrame {
            intent: self.intent.clone(),
            slots: self
                .slots
                .iter()
                .map(|(k, v)| (k.clone(), normalize(v)))
                .collect(),
        }
    }

    /// Multiset of (slot name without `#index`, value); equal for frames that
    /// differ only by a permutation of repeated values.
    pub fn unindexed(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = self
            .slots
            .iter()
            .map(|(k, val)| {
                let base = k.split('#').next().unwrap_or(k).to_string();
                (base, normalize(val))
            })
            .collect();
        v.sort();
        v
    }
}

impl fmt::Display for FlatFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.intent)?;
        for (i, (k, v)) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v:?}")?;
        }
        f.write_char('}')
    }
}

/// Slot names for each leaf of `t`, `#i`-indexed when a name repeats.
pub fn flat_slot_names(leaves: &[LeafPath<'_>]) -> Vec<String> {
    let names: Vec<String> = leaves.iter().map(LeafPath::slot_name).collect();
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for n in &names {
        *totals.entry(n).or_default() += 1;
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    names
        .iter()
        .map(|n| {
            if totals[n.as_str()] > 1 {
                let i = seen.entry(n).or_default();
                let out = format!("{n}#{i}");
                *i += 1;
                out
            } else {
                n.clone()
            }
        })
        .collect()
}

pub fn flatten(t: &MrTree) -> FlatFrame {
    let leaves = leaf_paths(t);
    let names = flat_slot_names(&leaves);
    let slots = leaves
        .iter()
        .zip(names)
        .map(|(leaf, name)| {
            let value = match leaf.leaf {
                MrNode::String(s) => s.clone(),
                MrNode::Enum(m) => short_name(m).to_string(),
                MrNode::Tree(_) => unreachable!("leaf_paths yields leaves only"),
            };
            (name, value)
        })
        .collect();
    FlatFrame {
        intent: t.verb.clone(),
        slots,
    }
}
