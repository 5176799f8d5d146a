//! The rooted schema of domains, verbs, attributes, value types and enums.
//!
//! Documents use a small line-oriented format:
//!
//! ```text
//! # comments run to end of line
//! verb Alarm.create
//!   name: string
//!   recurrence: DateTime
//! type DateTime
//!   dayOfWeek: DayOfWeek
//! enum DayOfWeek Monday Tuesday Sunday
//! trigger DayOfWeek.Sunday sunday sundays
//! ```
//!
//! Attribute lines are indented under the `verb` or `type` block they belong
//! to and may carry the flags `repeated` and `required`. Verb attributes are
//! qualified by the verb's domain (`Alarm.name`), type attributes by the type
//! name (`DateTime.dayOfWeek`), enum members by the enum (`DayOfWeek.Sunday`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::text::split_qualified;
use crate::tree_codec::{Instruction, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("attribute `{attribute}` references unknown type `{type_name}`")]
    UnknownType { attribute: String, type_name: String },
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("no verbs defined")]
    NoVerbs,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("illegal edge `{parent}` -> `{child}`")]
    IllegalEdge { parent: String, child: String },
    #[error("empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    String,
    Type(String),
    Enum(String),
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::String => f.write_str("string"),
            ValueType::Type(name) | ValueType::Enum(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrDef {
    /// Qualified name, e.g. `Alarm.name`.
    pub name: String,
    pub value_type: ValueType,
    pub repeatable: bool,
    /// Drives prompting for missing information; never checked by validation.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbDef {
    pub name: String,
    pub attributes: BTreeMap<String, AttrDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub attributes: BTreeMap<String, AttrDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    /// Qualified member names in declaration order.
    pub members: Vec<String>,
}

/// Anything that owns attributes: a verb at the root or a value type below it.
#[derive(Debug, Clone, Copy)]
pub enum Owner<'a> {
    Verb(&'a VerbDef),
    Type(&'a TypeDef),
}

impl<'a> Owner<'a> {
    pub fn name(&self) -> &'a str {
        match self {
            Owner::Verb(v) => &v.name,
            Owner::Type(t) => &t.name,
        }
    }

    pub fn attributes(&self) -> &'a BTreeMap<String, AttrDef> {
        match self {
            Owner::Verb(v) => &v.attributes,
            Owner::Type(t) => &t.attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&'a AttrDef> {
        self.attributes().get(name)
    }
}

/// A verb-to-leaf chain of qualified names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub segments: Vec<String>,
}

impl Path {
    pub fn new<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Path {
            segments: segments.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LintIssue {
    Unreachable(String),
}

impl fmt::Display for LintIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LintIssue::Unreachable(name) => write!(f, "`{name}` is not reachable from any verb"),
        }
    }
}

/// Where a walk through the ontology currently stands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkState<'a> {
    At(Owner<'a>),
    EnumSlot(&'a EnumDef),
    Leaf,
}

impl PartialEq for Owner<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}
impl Eq for Owner<'_> {}

#[derive(Debug, Clone, Default)]
pub struct Ontology {
    domains: BTreeSet<String>,
    verbs: BTreeMap<String, VerbDef>,
    value_types: BTreeMap<String, TypeDef>,
    enums: BTreeMap<String, EnumDef>,
    attributes: BTreeMap<String, AttrDef>,
    members: BTreeMap<String, String>,
    triggers: BTreeMap<String, Vec<String>>,
}

impl Ontology {
    pub fn parse(source: &str) -> Result<Self, OntologyError> {
        Parser::default().parse(source)
    }

    pub fn domains(&self) -> &BTreeSet<String> {
        &self.domains
    }

    pub fn verbs(&self) -> impl Iterator<Item = &VerbDef> {
        self.verbs.values()
    }

    pub fn verb(&self, name: &str) -> Option<&VerbDef> {
        self.verbs.get(name)
    }

    pub fn value_type(&self, name: &str) -> Option<&TypeDef> {
        self.value_types.get(name)
    }

    pub fn value_types(&self) -> impl Iterator<Item = &TypeDef> {
        self.value_types.values()
    }

    pub fn enum_def(&self, name: &str) -> Option<&EnumDef> {
        self.enums.get(name)
    }

    pub fn enums(&self) -> impl Iterator<Item = &EnumDef> {
        self.enums.values()
    }

    /// Looks up an attribute by qualified name, regardless of owner.
    pub fn attribute(&self, name: &str) -> Option<&AttrDef> {
        self.attributes.get(name)
    }

    /// The enum a qualified member belongs to.
    pub fn member_enum(&self, member: &str) -> Option<&EnumDef> {
        self.members.get(member).and_then(|e| self.enums.get(e))
    }

    /// A verb or value type by name.
    pub fn owner(&self, name: &str) -> Option<Owner<'_>> {
        self.verbs
            .get(name)
            .map(Owner::Verb)
            .or_else(|| self.value_types.get(name).map(Owner::Type))
    }

    /// Surface words that realize an enum member in an utterance.
    pub fn triggers(&self, member: &str) -> &[String] {
        self.triggers.get(member).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_verb(&self, name: &str) -> bool {
        self.verbs.contains_key(name)
    }

    /// Takes one step of a walk; `Err` names the offending edge.
    pub fn step<'a>(
        &'a self,
        state: &WalkState<'a>,
        segment: &str,
    ) -> Result<WalkState<'a>, OntologyError> {
        let illegal = |parent: &str| OntologyError::IllegalEdge {
            parent: parent.to_string(),
            child: segment.to_string(),
        };
        match state {
            WalkState::At(owner) => {
                let attr = owner.attribute(segment).ok_or_else(|| illegal(owner.name()))?;
                Ok(self.enter(attr))
            }
            WalkState::EnumSlot(e) => {
                if e.members.iter().any(|m| m == segment) {
                    Ok(WalkState::Leaf)
                } else {
                    Err(illegal(&e.name))
                }
            }
            WalkState::Leaf => Err(illegal("<leaf>")),
        }
    }

    /// The walk state below an attribute edge.
    pub fn enter<'a>(&'a self, attr: &AttrDef) -> WalkState<'a> {
        match &attr.value_type {
            ValueType::String => WalkState::Leaf,
            ValueType::Type(t) => WalkState::At(Owner::Type(&self.value_types[t])),
            ValueType::Enum(e) => WalkState::EnumSlot(&self.enums[e]),
        }
    }

    /// Checks a full path rooted at a verb.
    pub fn validate_path(&self, path: &Path) -> Result<Path, OntologyError> {
        let first = path.segments.first().ok_or(OntologyError::EmptyPath)?;
        let verb = self
            .verbs
            .get(first)
            .ok_or_else(|| OntologyError::UnknownSymbol(first.clone()))?;
        let mut state = WalkState::At(Owner::Verb(verb));
        for seg in &path.segments[1..] {
            state = self.step(&state, seg)?;
        }
        Ok(path.clone())
    }

    /// Checks a path that may either start at a verb or at an attribute of
    /// the current root verb.
    pub fn validate_path_under(&self, root: &str, path: &Path) -> Result<Path, OntologyError> {
        let first = path.segments.first().ok_or(OntologyError::EmptyPath)?;
        if self.verbs.contains_key(first) {
            return self.validate_path(path);
        }
        let verb = self
            .verbs
            .get(root)
            .ok_or_else(|| OntologyError::UnknownSymbol(root.to_string()))?;
        let mut state = WalkState::At(Owner::Verb(verb));
        for seg in &path.segments {
            state = self.step(&state, seg)?;
        }
        Ok(path.clone())
    }

    /// Every qualified name: verbs, attributes and enum members.
    pub fn qualified_names(&self) -> BTreeSet<String> {
        self.verbs
            .keys()
            .chain(self.attributes.keys())
            .chain(self.members.keys())
            .cloned()
            .collect()
    }

    /// The decoder's output alphabet: sorted qualified names followed by the
    /// control symbols.
    pub fn symbol_vocabulary(&self) -> Vocabulary {
        let mut symbols: Vec<Instruction> = self
            .qualified_names()
            .into_iter()
            .map(Instruction::Path)
            .collect();
        symbols.extend([
            Instruction::Next,
            Instruction::Copy,
            Instruction::Flush,
            Instruction::End,
        ]);
        Vocabulary::new(symbols)
    }

    /// Types and enums not reachable from any verb.
    pub fn lint(&self) -> Vec<LintIssue> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&AttrDef> = self
            .verbs
            .values()
            .flat_map(|v| v.attributes.values())
            .collect();
        while let Some(attr) = stack.pop() {
            match &attr.value_type {
                ValueType::String => {}
                ValueType::Enum(e) => {
                    seen.insert(e.clone());
                }
                ValueType::Type(t) => {
                    if seen.insert(t.clone()) {
                        stack.extend(self.value_types[t].attributes.values());
                    }
                }
            }
        }
        self.value_types
            .keys()
            .chain(self.enums.keys())
            .filter(|n| !seen.contains(*n))
            .map(|n| LintIssue::Unreachable(n.clone()))
            .collect()
    }

    /// Builds an ontology programmatically; used for derived ontologies such
    /// as the flat-slot variant.
    pub fn from_parts(
        verbs: Vec<VerbDef>,
        value_types: Vec<TypeDef>,
        enums: Vec<EnumDef>,
        triggers: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, OntologyError> {
        let mut o = Ontology::default();
        for e in enums {
            for m in &e.members {
                o.members.insert(m.clone(), e.name.clone());
            }
            if o.enums.insert(e.name.clone(), e.clone()).is_some() {
                return Err(OntologyError::Duplicate(e.name));
            }
        }
        for t in value_types {
            for a in t.attributes.values() {
                o.register_attribute(a)?;
            }
            if o.enums.contains_key(&t.name) || o.value_types.insert(t.name.clone(), t.clone()).is_some() {
                return Err(OntologyError::Duplicate(t.name));
            }
        }
        for v in verbs {
            o.domains.insert(split_qualified(&v.name).0.to_string());
            for a in v.attributes.values() {
                o.register_attribute(a)?;
            }
            if o.verbs.insert(v.name.clone(), v.clone()).is_some() {
                return Err(OntologyError::Duplicate(v.name));
            }
        }
        o.triggers = triggers;
        o.check()?;
        Ok(o)
    }

    fn register_attribute(&mut self, attr: &AttrDef) -> Result<(), OntologyError> {
        match self.attributes.get(&attr.name) {
            Some(existing) if existing != attr => Err(OntologyError::Duplicate(attr.name.clone())),
            _ => {
                self.attributes.insert(attr.name.clone(), attr.clone());
                Ok(())
            }
        }
    }

    fn check(&self) -> Result<(), OntologyError> {
        if self.verbs.is_empty() {
            return Err(OntologyError::NoVerbs);
        }
        for attr in self.attributes.values() {
            let known = match &attr.value_type {
                ValueType::String => true,
                ValueType::Type(t) => self.value_types.contains_key(t),
                ValueType::Enum(e) => self.enums.contains_key(e),
            };
            if !known {
                return Err(OntologyError::UnknownType {
                    attribute: attr.name.clone(),
                    type_name: attr.value_type.to_string(),
                });
            }
        }
        // Type names double as attribute qualifiers; a clash with a domain
        // would make path continuations ambiguous.
        for name in self.value_types.keys().chain(self.enums.keys()) {
            if self.domains.contains(name) {
                return Err(OntologyError::Duplicate(name.clone()));
            }
        }
        for member in self.triggers.keys() {
            if !self.members.contains_key(member) {
                return Err(OntologyError::UnknownSymbol(member.clone()));
            }
        }
        let names = self
            .verbs
            .keys()
            .chain(self.attributes.keys())
            .chain(self.members.keys());
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n) {
                return Err(OntologyError::Duplicate(n.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Parser {
    verbs: Vec<VerbDef>,
    types: Vec<TypeDef>,
    enums: Vec<EnumDef>,
    triggers: BTreeMap<String, Vec<String>>,
    /// Block currently receiving indented attribute lines.
    block: Option<Block>,
}

#[derive(Clone, Copy)]
enum Block {
    Verb(usize),
    Type(usize),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_qualified_ident(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_ident)
}

impl Parser {
    fn parse(mut self, source: &str) -> Result<Ontology, OntologyError> {
        // Attribute types are resolved after all blocks are read.
        let mut pending: Vec<(Block, String, String, bool, bool)> = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let indent = line.len() - line.trim_start().len();
            let syntax = |column: usize, message: String| OntologyError::Syntax {
                line: line_no,
                column,
                message,
            };
            if indent > 0 {
                let block = self
                    .block
                    .ok_or_else(|| syntax(indent + 1, "attribute outside a verb or type block".into()))?;
                let body = line.trim();
                let colon = body
                    .find(':')
                    .ok_or_else(|| syntax(indent + 1, "expected `name: type`".into()))?;
                let short = body[..colon].trim();
                if !is_ident(short) {
                    return Err(syntax(indent + 1, format!("invalid attribute name `{short}`")));
                }
                let mut words = body[colon + 1..].split_whitespace();
                let ty = words
                    .next()
                    .ok_or_else(|| syntax(indent + colon + 2, "missing attribute type".into()))?;
                let (mut repeated, mut required) = (false, false);
                for w in words {
                    match w {
                        "repeated" => repeated = true,
                        "required" => required = true,
                        other => {
                            let col = indent + body.find(other).unwrap_or(0) + 1;
                            return Err(syntax(col, format!("unknown flag `{other}`")));
                        }
                    }
                }
                pending.push((block, short.to_string(), ty.to_string(), repeated, required));
                continue;
            }
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let args: Vec<&str> = words.collect();
            let arg_col = |i: usize| line.find(args[i]).unwrap_or(0) + 1;
            match keyword {
                "verb" => {
                    if args.len() != 1 || !is_qualified_ident(args[0]) {
                        return Err(syntax(keyword.len() + 2, "expected `verb Domain.name`".into()));
                    }
                    self.verbs.push(VerbDef {
                        name: args[0].to_string(),
                        attributes: BTreeMap::new(),
                    });
                    self.block = Some(Block::Verb(self.verbs.len() - 1));
                }
                "type" => {
                    if args.len() != 1 || !is_ident(args[0]) {
                        return Err(syntax(keyword.len() + 2, "expected `type Name`".into()));
                    }
                    self.types.push(TypeDef {
                        name: args[0].to_string(),
                        attributes: BTreeMap::new(),
                    });
                    self.block = Some(Block::Type(self.types.len() - 1));
                }
                "enum" => {
                    if args.len() < 2 {
                        return Err(syntax(keyword.len() + 2, "expected `enum Name Member...`".into()));
                    }
                    for (i, a) in args.iter().enumerate() {
                        if !is_ident(a) {
                            return Err(syntax(arg_col(i), format!("invalid identifier `{a}`")));
                        }
                    }
                    let name = args[0];
                    let members = args[1..].iter().map(|m| format!("{name}.{m}")).collect();
                    self.enums.push(EnumDef {
                        name: name.to_string(),
                        members,
                    });
                    self.block = None;
                }
                "trigger" => {
                    if args.len() < 2 {
                        return Err(syntax(
                            keyword.len() + 2,
                            "expected `trigger Enum.Member word...`".into(),
                        ));
                    }
                    self.triggers
                        .entry(args[0].to_string())
                        .or_default()
                        .extend(args[1..].iter().map(|w| w.to_lowercase()));
                    self.block = None;
                }
                other => return Err(syntax(1, format!("unknown keyword `{other}`"))),
            }
        }

        let type_names: BTreeSet<&str> = self.types.iter().map(|t| t.name.as_str()).collect();
        let enum_names: BTreeSet<&str> = self.enums.iter().map(|e| e.name.as_str()).collect();
        let mut resolved = Vec::with_capacity(pending.len());
        for (block, short, ty, repeatable, required) in pending {
            let qualifier = match block {
                Block::Verb(i) => split_qualified(&self.verbs[i].name).0.to_string(),
                Block::Type(i) => self.types[i].name.clone(),
            };
            let name = format!("{qualifier}.{short}");
            let value_type = if ty == "string" {
                ValueType::String
            } else if type_names.contains(ty.as_str()) {
                ValueType::Type(ty)
            } else if enum_names.contains(ty.as_str()) {
                ValueType::Enum(ty)
            } else {
                return Err(OntologyError::UnknownType {
                    attribute: name,
                    type_name: ty,
                });
            };
            resolved.push((
                block,
                AttrDef {
                    name,
                    value_type,
                    repeatable,
                    required,
                },
            ));
        }
        for (block, attr) in resolved {
            let attrs = match block {
                Block::Verb(i) => &mut self.verbs[i].attributes,
                Block::Type(i) => &mut self.types[i].attributes,
            };
            if attrs.insert(attr.name.clone(), attr.clone()).is_some() {
                return Err(OntologyError::Duplicate(attr.name));
            }
        }
        Ontology::from_parts(self.verbs, self.types, self.enums, self.triggers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources;

    fn toy() -> Ontology {
        resources::toy_ontology()
    }

    #[test]
    fn toy_ontology_has_expected_verbs() {
        let o = toy();
        for v in ["Alarm.create", "Message.send", "Flight.book", "Knowledge.query"] {
            assert!(o.is_verb(v), "{v} missing");
        }
        assert!(o.lint().is_empty(), "{:?}", o.lint());
    }

    #[test]
    fn empty_document_has_no_verbs() {
        assert_eq!(Ontology::parse("").unwrap_err(), OntologyError::NoVerbs);
        assert_eq!(Ontology::parse("# nothing\n\n").unwrap_err(), OntologyError::NoVerbs);
    }

    #[test]
    fn misspelled_type_names_the_attribute() {
        let doc = "verb Alarm.create\n  recurrence: DateTme\ntype DateTime\n  date: string\n";
        assert_eq!(
            Ontology::parse(doc).unwrap_err(),
            OntologyError::UnknownType {
                attribute: "Alarm.recurrence".into(),
                type_name: "DateTme".into()
            }
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = Ontology::parse("verb Alarm.create\n  name string\n").unwrap_err();
        assert!(matches!(err, OntologyError::Syntax { line: 2, column: 3, .. }), "{err:?}");
        let err = Ontology::parse("verb A.b\nfrobnicate\n").unwrap_err();
        assert!(matches!(err, OntologyError::Syntax { line: 2, column: 1, .. }), "{err:?}");
        let err = Ontology::parse("verb A.b\n  x: string sometimes\n").unwrap_err();
        assert!(matches!(err, OntologyError::Syntax { line: 2, column: 13, .. }), "{err:?}");
    }

    #[test]
    fn duplicates_are_rejected() {
        let doc = "verb A.b\n  x: string\n  x: string\n";
        assert_eq!(Ontology::parse(doc).unwrap_err(), OntologyError::Duplicate("A.x".into()));
        let doc = "verb A.b\nverb A.b\n";
        assert_eq!(Ontology::parse(doc).unwrap_err(), OntologyError::Duplicate("A.b".into()));
        // Same qualified attribute on two verbs of one domain must agree.
        let doc = "verb A.b\n  x: string\nverb A.c\n  x: string repeated\n";
        assert_eq!(Ontology::parse(doc).unwrap_err(), OntologyError::Duplicate("A.x".into()));
        let doc = "verb A.b\n  x: string\nverb A.c\n  x: string\n";
        assert!(Ontology::parse(doc).is_ok());
    }

    #[test]
    fn alarm_path_is_valid() {
        let o = toy();
        let p = Path::new(["Alarm.create", "Alarm.recurrence", "DateTime.dayOfWeek", "DayOfWeek.Sunday"]);
        assert_eq!(o.validate_path(&p).unwrap(), p);
        assert!(o.validate_path(&Path::new(["Alarm.create"])).is_ok());
    }

    #[test]
    fn cross_verb_attribute_is_illegal() {
        let o = toy();
        let err = o.validate_path(&Path::new(["Alarm.create", "Flight.to"])).unwrap_err();
        assert_eq!(
            err,
            OntologyError::IllegalEdge {
                parent: "Alarm.create".into(),
                child: "Flight.to".into()
            }
        );
    }

    #[test]
    fn paths_under_root_may_start_at_an_attribute() {
        let o = toy();
        let p = Path::new(["Alarm.recurrence", "DateTime.dayOfWeek"]);
        assert!(o.validate_path_under("Alarm.create", &p).is_ok());
        assert!(o.validate_path_under("Flight.book", &p).is_err());
    }

    #[test]
    fn vocabulary_of_minimal_ontology() {
        let o = Ontology::parse("verb Ping.send\n").unwrap();
        let v = o.symbol_vocabulary();
        assert_eq!(v.len(), 5);
        assert_eq!(v.symbol(0), &Instruction::Path("Ping.send".into()));
        assert_eq!(v.symbol(4), &Instruction::End);
    }

    #[test]
    fn vocabulary_is_sorted_and_deterministic() {
        let o = toy();
        let a = o.symbol_vocabulary();
        let b = o.symbol_vocabulary();
        assert_eq!(a, b);
        let names: Vec<String> = a
            .symbols()
            .iter()
            .filter_map(|s| match s {
                Instruction::Path(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(names.contains(&"Alarm.create".to_string()));
        assert!(names.contains(&"Alarm.name".to_string()));
        let tail: Vec<_> = a.symbols()[a.len() - 4..].to_vec();
        assert_eq!(
            tail,
            vec![Instruction::Next, Instruction::Copy, Instruction::Flush, Instruction::End]
        );
    }

    #[test]
    fn lint_reports_orphans() {
        let doc = "verb A.b\n  x: string\ntype Orphan\n  y: string\nenum Lonely One\n";
        let o = Ontology::parse(doc).unwrap();
        let issues = o.lint();
        assert_eq!(issues.len(), 2);
    }
}
