//! Conversion between meaning-representation trees and token-aligned
//! decoder instruction sequences.

mod align;
mod assemble;
mod constraints;
mod instruction;
mod linearize;

use serde::{Deserialize, Serialize};

use crate::mr_tree::SubTree;

pub use align::{align, Alignment, NodePath};
pub use assemble::{
    assemble, AssembleError, Assembler, AssemblerState, CopyState, NodeKind, PathPos, WorkNode,
};
pub use constraints::{DecodeConstraints, OntologyConstraints, PathCosts, DEFAULT_SYMBOL_BUDGET};
pub use instruction::{parse_sequence, render_sequence, Instruction, Vocabulary};
pub use linearize::{linearize, tree_to_instructions, LinearizeError};

/// A subtree the dialog context makes available to the current turn. A bare
/// path to `attribute` (with no copy open) attaches `payload` there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Donation {
    /// Qualified verb attribute, e.g. `Flight.to`.
    pub attribute: String,
    pub payload: SubTree,
}
