use nlu_core::parser_core::PreparedInput;
use nlu_core::tree_codec::{Assembler, AssemblerState};
use nlu_core::{Instruction, Ontology};

/// One line per instruction, labelled with the word under the cursor when
/// the cursor has moved since the previous line.
pub fn trace_rows(o: &Ontology, p: &PreparedInput, instrs: &[Instruction]) -> Vec<String> {
    let asm = Assembler::new(o, &p.surface, &p.spans, &p.donations);
    let mut state = AssemblerState::default();
    let mut last = None;
    let mut rows = Vec::new();
    for ins in instrs {
        let cursor = state.cursor();
        let word = match p.surface.get(cursor) {
            Some(w) if last != Some(cursor) => w.as_str(),
            _ => "",
        };
        last = Some(cursor);
        rows.push(format!("{word:<12} {ins}"));
        if asm.apply(&mut state, ins).is_err() {
            break;
        }
    }
    rows
}
