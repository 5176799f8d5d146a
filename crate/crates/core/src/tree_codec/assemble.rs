//! Incremental tree assembly from decoder instructions.
//!
//! Nodes are inserted path by path. A path segment reuses the most recently
//! created, unflushed child of the same attribute; only when none exists is a
//! new node created. `FLUSH` marks every node under a repeatable attribute as
//! ineligible for reuse, which is how siblings of a repeatable slot arise.
//! A leaf that lands on an existing node is dropped (the first value wins).

use thiserror::Error;

use crate::mr_tree::{Children, MrNode, MrTree, SubTree};
use crate::ontology::{Ontology, Owner, ValueType};
use crate::span::Span;
use crate::tree_codec::{Donation, Instruction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssembleError {
    #[error("the first instruction must be a verb")]
    MissingVerb,
    #[error("verb `{0}` after the root was already set")]
    UnexpectedVerb(String),
    #[error("illegal edge `{parent}` -> `{child}`")]
    IllegalEdge { parent: String, child: String },
    #[error("COPY while a copy range is already open")]
    CopyWhileOpen,
    #[error("instruction after END")]
    AfterEnd,
    #[error("copy terminated by non-string path ending at `{0}`")]
    CopyNotString(String),
    #[error("string attribute `{0}` reached without a copied payload")]
    StringWithoutCopy(String),
    #[error("path ends at `{0}` without reaching a value")]
    IncompletePath(String),
    #[error("NEXT past the last token")]
    NextPastEnd,
    #[error("copy range still open at END")]
    UnterminatedCopy,
    #[error("instruction sequence does not end with END")]
    MissingEnd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Root(String),
    Tree(String),
    Str(String),
    Enum(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkNode {
    pub kind: NodeKind,
    /// Parent id and the attribute this node hangs under.
    pub parent: Option<(usize, String)>,
    pub children: Vec<(String, usize)>,
    pub flushed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyState {
    Idle,
    /// Opened at this token; extends with every NEXT.
    Open(usize),
    /// Range fixed by the first segment of the terminating path.
    Closing(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathPos {
    /// At a subtree node (or the root); further segments are its attributes.
    Node(usize),
    /// Under an enum attribute, awaiting the member.
    EnumSlot {
        parent: usize,
        attr: String,
        enum_name: String,
    },
    /// The path reached a leaf.
    Done,
}

/// Everything needed to resume assembly after a prefix of instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblerState {
    nodes: Vec<WorkNode>,
    cursor: usize,
    copy: CopyState,
    path: Option<PathPos>,
    finished: bool,
    symbols_at_cursor: usize,
}

impl Default for AssemblerState {
    fn default() -> Self {
        AssemblerState {
            nodes: Vec::new(),
            cursor: 0,
            copy: CopyState::Idle,
            path: None,
            finished: false,
            symbols_at_cursor: 0,
        }
    }
}

impl AssemblerState {
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn copy_state(&self) -> CopyState {
        self.copy
    }

    pub fn path(&self) -> Option<&PathPos> {
        self.path.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Symbols emitted since the cursor last moved.
    pub fn symbols_at_cursor(&self) -> usize {
        self.symbols_at_cursor
    }

    pub fn root_verb(&self) -> Option<&str> {
        match self.nodes.first().map(|n| &n.kind) {
            Some(NodeKind::Root(v)) => Some(v),
            _ => None,
        }
    }

    pub fn node(&self, id: usize) -> &WorkNode {
        &self.nodes[id]
    }

    pub fn flushed_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.flushed)
            .map(|(i, _)| i)
    }

    /// The most recently created unflushed child of `parent` under `attr`.
    pub fn reusable_child(&self, parent: usize, attr: &str) -> Option<usize> {
        self.nodes[parent]
            .children
            .iter()
            .rev()
            .find(|(a, id)| a == attr && !self.nodes[*id].flushed)
            .map(|(_, id)| *id)
    }

    /// The partial tree built so far.
    pub fn tree(&self) -> Option<MrTree> {
        let verb = self.root_verb()?.to_string();
        Some(MrTree {
            verb,
            children: self.children_of(0),
        })
    }

    fn children_of(&self, id: usize) -> Children {
        let mut out = Children::new();
        for (attr, child) in &self.nodes[id].children {
            let node = match &self.nodes[*child].kind {
                NodeKind::Str(s) => MrNode::String(s.clone()),
                NodeKind::Enum(m) => MrNode::Enum(m.clone()),
                NodeKind::Tree(t) => MrNode::Tree(SubTree {
                    type_name: t.clone(),
                    children: self.children_of(*child),
                }),
                NodeKind::Root(_) => unreachable!("root has no parent"),
            };
            out.entry(attr.clone()).or_default().push(node);
        }
        out
    }

    fn add(&mut self, parent: usize, attr: &str, kind: NodeKind) -> usize {
        let id = self.nodes.len();
        self.nodes.push(WorkNode {
            kind,
            parent: Some((parent, attr.to_string())),
            children: Vec::new(),
            flushed: false,
        });
        self.nodes[parent].children.push((attr.to_string(), id));
        id
    }

    fn graft(&mut self, parent: usize, children: &Children) {
        for (attr, nodes) in children {
            for n in nodes {
                match n {
                    MrNode::String(s) => {
                        self.add(parent, attr, NodeKind::Str(s.clone()));
                    }
                    MrNode::Enum(m) => {
                        self.add(parent, attr, NodeKind::Enum(m.clone()));
                    }
                    MrNode::Tree(t) => {
                        let id = self.add(parent, attr, NodeKind::Tree(t.type_name.clone()));
                        self.graft(id, &t.children);
                    }
                }
            }
        }
    }

    fn mark_flushed(&mut self, id: usize) {
        self.nodes[id].flushed = true;
        let kids: Vec<usize> = self.nodes[id].children.iter().map(|c| c.1).collect();
        for k in kids {
            self.mark_flushed(k);
        }
    }
}

/// Static inputs of one assembly: the ontology, the utterance tokens, spans
/// whose payloads may be copied, and subtrees donated by the context.
#[derive(Debug, Clone, Copy)]
pub struct Assembler<'a> {
    pub ontology: &'a Ontology,
    pub tokens: &'a [String],
    pub spans: &'a [Span],
    pub donations: &'a [Donation],
}

impl<'a> Assembler<'a> {
    pub fn new(
        ontology: &'a Ontology,
        tokens: &'a [String],
        spans: &'a [Span],
        donations: &'a [Donation],
    ) -> Self {
        Assembler {
            ontology,
            tokens,
            spans,
            donations,
        }
    }

    pub fn span_payload(&self, start: usize, end: usize, type_name: &str) -> Option<&'a SubTree> {
        self.spans
            .iter()
            .filter(|s| s.start == start && s.end == end)
            .filter_map(|s| s.payload.as_ref())
            .find(|p| p.type_name == type_name)
    }

    pub fn donation(&self, attr: &str) -> Option<&'a SubTree> {
        self.donations
            .iter()
            .find(|d| d.attribute == attr)
            .map(|d| &d.payload)
    }

    /// Owner (verb or value type) of a subtree or root node.
    pub fn owner_of(&self, state: &AssemblerState, id: usize) -> Option<Owner<'a>> {
        match &state.nodes[id].kind {
            NodeKind::Root(v) => self.ontology.verb(v).map(Owner::Verb),
            NodeKind::Tree(t) => self.ontology.value_type(t).map(Owner::Type),
            _ => None,
        }
    }

    /// Whether the open path (if any) may end here.
    pub fn can_finalize(&self, state: &AssemblerState) -> bool {
        match &state.path {
            None | Some(PathPos::Done) => true,
            Some(PathPos::EnumSlot { .. }) => false,
            Some(PathPos::Node(id)) => self.node_terminal_ok(state, *id),
        }
    }

    fn node_terminal_ok(&self, state: &AssemblerState, id: usize) -> bool {
        let node = &state.nodes[id];
        let NodeKind::Tree(ty) = &node.kind else {
            return false;
        };
        match state.copy {
            CopyState::Closing(s, e) => self.span_payload(s, e, ty).is_some(),
            _ => {
                let attr = node.parent.as_ref().map(|p| p.1.as_str()).unwrap_or("");
                !node.children.is_empty() || (node.parent.as_ref().map(|p| p.0) == Some(0) && self.donation(attr).is_some())
            }
        }
    }

    fn finalize(&self, state: &mut AssemblerState) -> Result<(), AssembleError> {
        let Some(pos) = state.path.take() else {
            return Ok(());
        };
        match pos {
            PathPos::Done => Ok(()),
            PathPos::EnumSlot { attr, .. } => Err(AssembleError::IncompletePath(attr)),
            PathPos::Node(id) => {
                let (parent, attr) = state.nodes[id].parent.clone().expect("paths start below the root");
                let NodeKind::Tree(ty) = state.nodes[id].kind.clone() else {
                    unreachable!("path positions are subtree nodes")
                };
                let empty = state.nodes[id].children.is_empty();
                if let CopyState::Closing(s, e) = state.copy {
                    let payload = self
                        .span_payload(s, e, &ty)
                        .ok_or_else(|| AssembleError::CopyNotString(attr.clone()))?;
                    if empty {
                        state.graft(id, &payload.children);
                    }
                    state.copy = CopyState::Idle;
                    return Ok(());
                }
                if empty {
                    match self.donation(&attr).filter(|_| parent == 0) {
                        Some(payload) => state.graft(id, &payload.children),
                        None => return Err(AssembleError::IncompletePath(attr)),
                    }
                }
                Ok(())
            }
        }
    }

    /// Pure transition: the state after applying `ins`.
    pub fn step(&self, state: &AssemblerState, ins: &Instruction) -> Result<AssemblerState, AssembleError> {
        let mut next = state.clone();
        self.apply(&mut next, ins)?;
        Ok(next)
    }

    /// In-place transition.
    pub fn apply(&self, state: &mut AssemblerState, ins: &Instruction) -> Result<(), AssembleError> {
        if state.finished {
            return Err(AssembleError::AfterEnd);
        }
        if state.nodes.is_empty() {
            return match ins {
                Instruction::Path(v) if self.ontology.is_verb(v) => {
                    state.nodes.push(WorkNode {
                        kind: NodeKind::Root(v.clone()),
                        parent: None,
                        children: Vec::new(),
                        flushed: false,
                    });
                    state.symbols_at_cursor += 1;
                    Ok(())
                }
                _ => Err(AssembleError::MissingVerb),
            };
        }
        state.symbols_at_cursor += 1;
        match ins {
            Instruction::Path(seg) => self.segment(state, seg),
            Instruction::Next => {
                self.finalize(state)?;
                if state.cursor + 1 >= self.tokens.len() {
                    return Err(AssembleError::NextPastEnd);
                }
                state.cursor += 1;
                state.symbols_at_cursor = 0;
                Ok(())
            }
            Instruction::Copy => {
                self.finalize(state)?;
                if state.copy != CopyState::Idle {
                    return Err(AssembleError::CopyWhileOpen);
                }
                state.copy = CopyState::Open(state.cursor);
                Ok(())
            }
            Instruction::Flush => {
                self.finalize(state)?;
                let mut targets = Vec::new();
                for (id, node) in state.nodes.iter().enumerate() {
                    let Some(owner) = self.owner_of(state, id) else { continue };
                    for (attr, child) in &node.children {
                        if owner.attribute(attr).is_some_and(|a| a.repeatable) {
                            targets.push(*child);
                        }
                    }
                }
                for t in targets {
                    state.mark_flushed(t);
                }
                Ok(())
            }
            Instruction::End => {
                self.finalize(state)?;
                if matches!(state.copy, CopyState::Open(_)) {
                    return Err(AssembleError::UnterminatedCopy);
                }
                state.finished = true;
                Ok(())
            }
        }
    }

    fn segment(&self, state: &mut AssemblerState, seg: &str) -> Result<(), AssembleError> {
        if self.ontology.is_verb(seg) {
            return Err(AssembleError::UnexpectedVerb(seg.to_string()));
        }
        // Continuation of the open path?
        let continues = match &state.path {
            Some(PathPos::Node(id)) => self
                .owner_of(state, *id)
                .is_some_and(|o| o.attribute(seg).is_some()),
            Some(PathPos::EnumSlot { enum_name, .. }) => self
                .ontology
                .enum_def(enum_name)
                .is_some_and(|e| e.members.iter().any(|m| m == seg)),
            _ => false,
        };
        if !continues {
            self.finalize(state)?;
            if let CopyState::Open(s) = state.copy {
                state.copy = CopyState::Closing(s, state.cursor);
            }
            state.path = Some(PathPos::Node(0));
        }
        match state.path.clone().expect("set above") {
            PathPos::Node(owner_id) => {
                let owner = self.owner_of(state, owner_id).expect("subtree or root");
                let attr = owner.attribute(seg).ok_or_else(|| AssembleError::IllegalEdge {
                    parent: owner.name().to_string(),
                    child: seg.to_string(),
                })?;
                let reuse = state.reusable_child(owner_id, seg);
                match &attr.value_type {
                    ValueType::String => {
                        let CopyState::Closing(s, e) = state.copy else {
                            return Err(AssembleError::StringWithoutCopy(seg.to_string()));
                        };
                        if reuse.is_none() {
                            let text = self.tokens[s..=e].join(" ");
                            state.add(owner_id, seg, NodeKind::Str(text));
                        }
                        state.copy = CopyState::Idle;
                        state.path = Some(PathPos::Done);
                    }
                    ValueType::Enum(e) => {
                        state.path = Some(PathPos::EnumSlot {
                            parent: owner_id,
                            attr: seg.to_string(),
                            enum_name: e.clone(),
                        });
                    }
                    ValueType::Type(t) => {
                        let id = match reuse {
                            Some(id) => id,
                            None => state.add(owner_id, seg, NodeKind::Tree(t.clone())),
                        };
                        state.path = Some(PathPos::Node(id));
                    }
                }
                Ok(())
            }
            PathPos::EnumSlot {
                parent,
                attr,
                enum_name,
            } => {
                let def = self.ontology.enum_def(&enum_name).expect("validated ontology");
                if !def.members.iter().any(|m| m == seg) {
                    return Err(AssembleError::IllegalEdge {
                        parent: attr,
                        child: seg.to_string(),
                    });
                }
                if matches!(state.copy, CopyState::Closing(..)) {
                    return Err(AssembleError::CopyNotString(attr));
                }
                if state.reusable_child(parent, &attr).is_none() {
                    state.add(parent, &attr, NodeKind::Enum(seg.to_string()));
                }
                state.path = Some(PathPos::Done);
                Ok(())
            }
            PathPos::Done => Err(AssembleError::IllegalEdge {
                parent: "<leaf>".into(),
                child: seg.to_string(),
            }),
        }
    }

    /// Runs a whole instruction sequence.
    pub fn assemble(&self, instrs: &[Instruction]) -> Result<MrTree, AssembleError> {
        let mut state = AssemblerState::default();
        for ins in instrs {
            self.apply(&mut state, ins)?;
        }
        if !state.finished {
            return Err(AssembleError::MissingEnd);
        }
        Ok(state.tree().expect("root set before END"))
    }
}

/// Convenience wrapper over [`Assembler::assemble`].
pub fn assemble(
    ontology: &Ontology,
    instrs: &[Instruction],
    tokens: &[String],
    spans: &[Span],
    donations: &[Donation],
) -> Result<MrTree, AssembleError> {
    Assembler::new(ontology, tokens, spans, donations).assemble(instrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr_tree::exact_match;
    use crate::resources;
    use crate::span::Span;
    use crate::tree_codec::instruction::parse_sequence;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn fishing_trip_alarm() -> MrTree {
        MrTree::new("Alarm.create")
            .with("Alarm.name", MrNode::string("Fishing trip"))
            .with(
                "Alarm.recurrence",
                SubTree::new("DateTime")
                    .with("DateTime.dayOfWeek", MrNode::member("DayOfWeek.Sunday"))
                    .into(),
            )
    }

    const FISHING_TRIP_TRACE: &str = "Alarm.create NEXT NEXT COPY NEXT Alarm.name NEXT NEXT NEXT \
                          Alarm.recurrence DateTime.dayOfWeek DayOfWeek.Sunday END";

    #[test]
    fn fishing_trip_trace_assembles_to_alarm_tree() {
        let o = resources::toy_ontology();
        let tokens = toks("please create fishing trip alarm on sundays");
        let t = assemble(&o, &parse_sequence(FISHING_TRIP_TRACE), &tokens, &[], &[]).unwrap();
        assert!(exact_match(&t, &fishing_trip_alarm()), "{t}");
        assert_eq!(t.children["Alarm.name"][0], MrNode::string("fishing trip"));
    }

    #[test]
    fn bare_verb() {
        let o = resources::toy_ontology();
        let t = assemble(&o, &parse_sequence("Alarm.create END"), &toks("hello"), &[], &[]).unwrap();
        assert_eq!(t, MrTree::new("Alarm.create"));
    }

    const RECIPIENTS: &str = "Message.send NEXT NEXT NEXT NEXT COPY Message.recipient Person.name \
                              NEXT NEXT FLUSH COPY Message.recipient Person.name END";

    #[test]
    fn flush_separates_recipients() {
        let o = resources::toy_ontology();
        let tokens = toks("send a message to eugene and mark");
        let with = assemble(&o, &parse_sequence(RECIPIENTS), &tokens, &[], &[]).unwrap();
        assert_eq!(with.children["Message.recipient"].len(), 2);
        let without_seq: Vec<Instruction> = parse_sequence(RECIPIENTS)
            .into_iter()
            .filter(|i| *i != Instruction::Flush)
            .collect();
        let without = assemble(&o, &without_seq, &tokens, &[], &[]).unwrap();
        let recipients = &without.children["Message.recipient"];
        assert_eq!(recipients.len(), 1);
        assert_eq!(
            recipients[0],
            MrNode::Tree(SubTree::new("Person").with("Person.name", MrNode::string("eugene")))
        );
    }

    #[test]
    fn single_token_copy() {
        let o = resources::toy_ontology();
        let tokens = toks("play jazz");
        let seq = parse_sequence("Music.play NEXT COPY Music.query END");
        let t = assemble(&o, &seq, &tokens, &[], &[]).unwrap();
        assert_eq!(t.children["Music.query"][0], MrNode::string("jazz"));
    }

    #[test]
    fn span_payload_replaces_copied_string() {
        let o = resources::toy_ontology();
        let tokens = toks("text eugene smith now");
        let payload = SubTree::new("Person")
            .with("Person.name", MrNode::string("Eugene Smith"))
            .with("Person.contactId", MrNode::string("c-17"));
        let span = Span {
            start: 1,
            end: 2,
            label: "contact".into(),
            canonical_id: Some("c-17".into()),
            payload: Some(payload.clone()),
            score: 1.0,
        };
        let seq = parse_sequence("Message.send NEXT COPY NEXT Message.recipient NEXT END");
        let t = assemble(&o, &seq, &tokens, &[span], &[]).unwrap();
        assert_eq!(t.children["Message.recipient"], vec![MrNode::Tree(payload)]);
        // Without the span the same sequence is a non-string copy terminator.
        let err = assemble(&o, &seq, &tokens, &[], &[]).unwrap_err();
        assert_eq!(err, AssembleError::CopyNotString("Message.recipient".into()));
    }

    #[test]
    fn donated_subtree_fills_bare_reference() {
        let o = resources::toy_ontology();
        let paris = SubTree::new("Location").with("Location.name", MrNode::string("paris"));
        let donations = vec![Donation {
            attribute: "Flight.to".into(),
            payload: paris.clone(),
        }];
        let tokens = toks("tomorrow from london");
        let seq = parse_sequence(
            "Flight.book Flight.to Flight.departingAt DateTime.date RelativeDate.Tomorrow NEXT NEXT \
             COPY Flight.from Location.name END",
        );
        let t = assemble(&o, &seq, &tokens, &[], &donations).unwrap();
        assert_eq!(t.children["Flight.to"], vec![MrNode::Tree(paris)]);
        assert_eq!(t.children.len(), 3);
        let err = assemble(&o, &seq, &tokens, &[], &[]).unwrap_err();
        assert_eq!(err, AssembleError::IncompletePath("Flight.to".into()));
    }

    #[test]
    fn error_paths() {
        let o = resources::toy_ontology();
        let tokens = toks("a b c");
        let run = |s: &str| assemble(&o, &parse_sequence(s), &tokens, &[], &[]);
        assert_eq!(run("NEXT END"), Err(AssembleError::MissingVerb));
        assert_eq!(run("END"), Err(AssembleError::MissingVerb));
        assert_eq!(run("Alarm.create Message.send END"), Err(AssembleError::UnexpectedVerb("Message.send".into())));
        assert!(matches!(run("Alarm.create Flight.to END"), Err(AssembleError::IllegalEdge { .. })));
        assert_eq!(run("Alarm.create COPY COPY Alarm.name END"), Err(AssembleError::CopyWhileOpen));
        assert_eq!(run("Alarm.create END NEXT"), Err(AssembleError::AfterEnd));
        assert_eq!(run("Alarm.create NEXT NEXT NEXT END"), Err(AssembleError::NextPastEnd));
        assert_eq!(run("Alarm.create COPY END"), Err(AssembleError::UnterminatedCopy));
        assert_eq!(run("Alarm.create NEXT"), Err(AssembleError::MissingEnd));
        assert_eq!(run("Alarm.create Alarm.name END"), Err(AssembleError::StringWithoutCopy("Alarm.name".into())));
        assert_eq!(
            run("Alarm.create COPY Alarm.recurrence DateTime.dayOfWeek DayOfWeek.Sunday END"),
            Err(AssembleError::CopyNotString("DateTime.dayOfWeek".into()))
        );
        assert_eq!(
            run("Alarm.create Alarm.recurrence END"),
            Err(AssembleError::IncompletePath("Alarm.recurrence".into()))
        );
    }

    #[test]
    fn first_value_wins_on_non_repeatable_leaf() {
        let o = resources::toy_ontology();
        let tokens = toks("a b");
        let seq = parse_sequence("Alarm.create COPY Alarm.name NEXT COPY Alarm.name END");
        let t = assemble(&o, &seq, &tokens, &[], &[]).unwrap();
        assert_eq!(t.children["Alarm.name"], vec![MrNode::string("a")]);
    }

    #[test]
    fn step_is_deterministic_over_prefixes() {
        let o = resources::toy_ontology();
        let tokens = toks("please create fishing trip alarm on sundays");
        let asm = Assembler::new(&o, &tokens, &[], &[]);
        let seq = parse_sequence(FISHING_TRIP_TRACE);
        for k in 0..=seq.len() {
            let run = || {
                seq[..k]
                    .iter()
                    .try_fold(AssemblerState::default(), |s, i| asm.step(&s, i))
                    .unwrap()
            };
            assert_eq!(run(), run());
        }
    }
}
