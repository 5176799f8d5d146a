//! Legality masks that keep greedy decoding inside the set of instruction
//! sequences the assembler accepts.

use std::collections::HashMap;

use crate::ontology::{AttrDef, Ontology, ValueType};
use crate::tree_codec::{Assembler, AssemblerState, CopyState, Instruction, PathPos, Vocabulary};

pub const DEFAULT_SYMBOL_BUDGET: usize = 8;

const INF: usize = usize::MAX / 4;

/// Computes which vocabulary entries may be emitted next.
pub trait DecodeConstraints {
    fn mask(&self, asm: &Assembler<'_>, state: &AssemblerState, vocab: &Vocabulary) -> Vec<bool>;

    /// Symbols allowed per token position, counting NEXT and END.
    fn budget(&self) -> usize {
        DEFAULT_SYMBOL_BUDGET
    }
}

impl<F> DecodeConstraints for F
where
    F: Fn(&Assembler<'_>, &AssemblerState, &Vocabulary) -> Vec<bool>,
{
    fn mask(&self, asm: &Assembler<'_>, state: &AssemblerState, vocab: &Vocabulary) -> Vec<bool> {
        self(asm, state, vocab)
    }
}

/// Minimum number of path segments from an owner (verb or type) to a legal
/// path end.
#[derive(Debug, Clone, Default)]
pub struct PathCosts {
    to_string: HashMap<String, usize>,
    to_member: HashMap<String, usize>,
    to_type: HashMap<(String, String), usize>,
}

fn relax(slot: &mut usize, candidate: usize) -> bool {
    if candidate < *slot {
        *slot = candidate;
        true
    } else {
        false
    }
}

impl PathCosts {
    pub fn new(o: &Ontology) -> Self {
        let mut owners: Vec<(String, Vec<AttrDef>)> = o
            .verbs()
            .map(|v| (v.name.clone(), v.attributes.values().cloned().collect()))
            .collect();
        owners.extend(
            o.value_types()
                .map(|t| (t.name.clone(), t.attributes.values().cloned().collect())),
        );
        let types: Vec<String> = o.value_types().map(|t| t.name.clone()).collect();
        let mut c = PathCosts::default();
        for (name, _) in &owners {
            c.to_string.insert(name.clone(), INF);
            c.to_member.insert(name.clone(), INF);
            for t in &types {
                c.to_type.insert((name.clone(), t.clone()), INF);
            }
        }
        loop {
            let mut changed = false;
            for (name, attrs) in &owners {
                for a in attrs {
                    match &a.value_type {
                        ValueType::String => changed |= relax(c.to_string.get_mut(name).unwrap(), 1),
                        ValueType::Enum(_) => changed |= relax(c.to_member.get_mut(name).unwrap(), 2),
                        ValueType::Type(u) => {
                            let s = c.to_string[u].saturating_add(1);
                            let m = c.to_member[u].saturating_add(1);
                            changed |= relax(c.to_string.get_mut(name).unwrap(), s);
                            changed |= relax(c.to_member.get_mut(name).unwrap(), m);
                            changed |= relax(c.to_type.get_mut(&(name.clone(), u.clone())).unwrap(), 1);
                            for t in &types {
                                let via = c.to_type[&(u.clone(), t.clone())].saturating_add(1);
                                changed |= relax(c.to_type.get_mut(&(name.clone(), t.clone())).unwrap(), via);
                            }
                        }
                    }
                }
            }
            if !changed {
                return c;
            }
        }
    }

    pub fn to_string(&self, owner: &str) -> usize {
        self.to_string.get(owner).copied().unwrap_or(INF)
    }

    pub fn to_member(&self, owner: &str) -> usize {
        self.to_member.get(owner).copied().unwrap_or(INF)
    }

    pub fn to_type(&self, owner: &str, target: &str) -> usize {
        self.to_type
            .get(&(owner.to_string(), target.to_string()))
            .copied()
            .unwrap_or(INF)
    }
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Plain,
    Closing(usize, usize),
}

/// The default mask: ontology edges, copy/flush legality, and a per-token
/// symbol budget with lookahead so every permitted prefix can still finish.
#[derive(Debug, Clone)]
pub struct OntologyConstraints {
    costs: PathCosts,
    budget: usize,
}

impl OntologyConstraints {
    pub fn new(o: &Ontology) -> Self {
        Self::with_budget(o, DEFAULT_SYMBOL_BUDGET)
    }

    pub fn with_budget(o: &Ontology, budget: usize) -> Self {
        assert!(budget >= 3, "budget must fit a verb, a segment and END");
        OntologyConstraints {
            costs: PathCosts::new(o),
            budget,
        }
    }

    /// Segments needed after taking `attr` under `owner_node` to reach a
    /// legal path end.
    fn cost_after(&self, asm: &Assembler<'_>, st: &AssemblerState, owner_node: usize, attr: &AttrDef, mode: Mode) -> usize {
        match (&attr.value_type, mode) {
            (ValueType::String, Mode::Plain) => INF,
            (ValueType::String, Mode::Closing(..)) => 0,
            (ValueType::Enum(_), Mode::Plain) => 1,
            (ValueType::Enum(_), Mode::Closing(..)) => INF,
            (ValueType::Type(u), Mode::Plain) => {
                let donated = owner_node == 0 && asm.donation(&attr.name).is_some();
                let reused = st
                    .reusable_child(owner_node, &attr.name)
                    .is_some_and(|id| !st.node(id).children.is_empty());
                if donated || reused {
                    0
                } else {
                    self.costs.to_member(u)
                }
            }
            (ValueType::Type(u), Mode::Closing(s, e)) => {
                let mut best = self.costs.to_string(u);
                for sp in asm.spans.iter().filter(|sp| sp.start == s && sp.end == e) {
                    if let Some(p) = &sp.payload {
                        let c = if &p.type_name == u { 0 } else { self.costs.to_type(u, &p.type_name) };
                        best = best.min(c);
                    }
                }
                best
            }
        }
    }

    /// Cheapest path from the root that closes a copy over `(s, e)`.
    fn close_cost(&self, asm: &Assembler<'_>, st: &AssemblerState, s: usize, e: usize) -> usize {
        let Some(root) = asm.owner_of(st, 0) else { return INF };
        root.attributes()
            .values()
            .map(|a| self.cost_after(asm, st, 0, a, Mode::Closing(s, e)).saturating_add(1))
            .min()
            .unwrap_or(INF)
    }

    fn closable_from(&self, asm: &Assembler<'_>, st: &AssemblerState, s: usize, from: usize) -> bool {
        (from..asm.tokens.len()).any(|e| self.close_cost(asm, st, s, e) + 1 <= self.budget)
    }
}

impl DecodeConstraints for OntologyConstraints {
    fn budget(&self) -> usize {
        self.budget
    }

    fn mask(&self, asm: &Assembler<'_>, st: &AssemblerState, vocab: &Vocabulary) -> Vec<bool> {
        let mut mask = vec![false; vocab.len()];
        if st.is_finished() {
            return mask;
        }
        let remaining = self.budget.saturating_sub(st.symbols_at_cursor());
        let allow = |mask: &mut Vec<bool>, ins: &Instruction| {
            if let Some(i) = vocab.index_of(ins) {
                mask[i] = true;
            }
        };
        if st.root_verb().is_none() {
            if remaining >= 2 {
                for v in asm.ontology.verbs() {
                    allow(&mut mask, &Instruction::Path(v.name.clone()));
                }
            }
            return mask;
        }
        let n = asm.tokens.len();
        let cursor = st.cursor();
        let last = cursor + 1 >= n;
        let copy = st.copy_state();

        if asm.can_finalize(st) {
            if last && !matches!(copy, CopyState::Open(_)) && remaining >= 1 {
                allow(&mut mask, &Instruction::End);
            }
            if !last && remaining >= 1 {
                let ok = match copy {
                    CopyState::Open(s) => self.closable_from(asm, st, s, cursor + 1),
                    _ => true,
                };
                if ok {
                    allow(&mut mask, &Instruction::Next);
                }
            }
            if copy == CopyState::Idle && n > 0 {
                let now = self.close_cost(asm, st, cursor, cursor).saturating_add(2) <= remaining;
                let later = !last && remaining >= 2 && self.closable_from(asm, st, cursor, cursor + 1);
                if now || later {
                    allow(&mut mask, &Instruction::Copy);
                }
                if remaining >= 2 {
                    allow(&mut mask, &Instruction::Flush);
                }
            }
            let mode = match copy {
                CopyState::Open(s) => Mode::Closing(s, cursor),
                _ => Mode::Plain,
            };
            if let Some(root) = asm.owner_of(st, 0) {
                for a in root.attributes().values() {
                    if self.cost_after(asm, st, 0, a, mode).saturating_add(2) <= remaining {
                        allow(&mut mask, &Instruction::Path(a.name.clone()));
                    }
                }
            }
        }

        let mode = match copy {
            CopyState::Closing(s, e) => Mode::Closing(s, e),
            _ => Mode::Plain,
        };
        match st.path() {
            Some(PathPos::Node(id)) => {
                if let Some(owner) = asm.owner_of(st, *id) {
                    for a in owner.attributes().values() {
                        if self.cost_after(asm, st, *id, a, mode).saturating_add(2) <= remaining {
                            allow(&mut mask, &Instruction::Path(a.name.clone()));
                        }
                    }
                }
            }
            Some(PathPos::EnumSlot { enum_name, .. }) => {
                if matches!(mode, Mode::Plain) && remaining >= 2 {
                    if let Some(def) = asm.ontology.enum_def(enum_name) {
                        for m in &def.members {
                            allow(&mut mask, &Instruction::Path(m.clone()));
                        }
                    }
                }
            }
            _ => {}
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources;
    use crate::tree_codec::parse_sequence;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn costs_on_toy_ontology() {
        let o = resources::toy_ontology();
        let c = PathCosts::new(&o);
        assert_eq!(c.to_string("Alarm.create"), 1);
        assert_eq!(c.to_member("Alarm.create"), 3);
        assert_eq!(c.to_member("DateTime"), 2);
        assert_eq!(c.to_type("Message.send", "Person"), 1);
        assert_eq!(c.to_member("Location"), INF);
    }

    #[test]
    fn gold_sequence_stays_inside_mask() {
        let o = resources::toy_ontology();
        let vocab = o.symbol_vocabulary();
        let tokens = toks("please create fishing trip alarm on sundays");
        let asm = Assembler::new(&o, &tokens, &[], &[]);
        let cons = OntologyConstraints::new(&o);
        let mut st = AssemblerState::default();
        for ins in parse_sequence(
            "Alarm.create NEXT NEXT COPY NEXT Alarm.name NEXT NEXT NEXT \
             Alarm.recurrence DateTime.dayOfWeek DayOfWeek.Sunday END",
        ) {
            let m = cons.mask(&asm, &st, &vocab);
            assert!(m[vocab.index_of(&ins).unwrap()], "{ins} masked");
            asm.apply(&mut st, &ins).unwrap();
        }
    }

    #[test]
    fn no_end_before_last_token_and_no_flush_inside_copy() {
        let o = resources::toy_ontology();
        let vocab = o.symbol_vocabulary();
        let tokens = toks("a b c");
        let asm = Assembler::new(&o, &tokens, &[], &[]);
        let cons = OntologyConstraints::new(&o);
        let mut st = AssemblerState::default();
        asm.apply(&mut st, &Instruction::path("Alarm.create")).unwrap();
        let m = cons.mask(&asm, &st, &vocab);
        assert!(!m[vocab.index_of(&Instruction::End).unwrap()]);
        assert!(m[vocab.index_of(&Instruction::Next).unwrap()]);
        asm.apply(&mut st, &Instruction::Copy).unwrap();
        let m = cons.mask(&asm, &st, &vocab);
        assert!(!m[vocab.index_of(&Instruction::Flush).unwrap()]);
        assert!(!m[vocab.index_of(&Instruction::Copy).unwrap()]);
        // DateTime.clock is a string, so the copy can close below recurrence.
        assert!(m[vocab.index_of(&Instruction::path("Alarm.recurrence")).unwrap()]);
        asm.apply(&mut st, &Instruction::path("Alarm.recurrence")).unwrap();
        let m = cons.mask(&asm, &st, &vocab);
        assert!(m[vocab.index_of(&Instruction::path("DateTime.clock")).unwrap()]);
        assert!(!m[vocab.index_of(&Instruction::path("DateTime.dayOfWeek")).unwrap()]);
    }
}
