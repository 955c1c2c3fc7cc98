//! Ancilla-assisted CNOT protocols for controlled and permutation gates,
//! and rank measures of binary matrices.

pub mod ancilla;
pub mod examples;
pub mod ppr;
pub mod rank;

pub use ancilla::{
    emit_lemma7_protocol, emit_transfer_protocol, emit_two_term_cnot, emit_xor_protocol,
    example1_blocks_from_permutation, expand_two_term, lemma7_auto, two_term_unitary, PermProtocol, XorProtocol,
};
pub use examples::{analyze_example1, swap_sandwich, Example1Report, SwapSandwich};
pub use ppr::{pp_expansion, pp_expansion_map, BipartiteMap, PartialPermExpansion, PpTerm};
pub use rank::{
    binary_rank, nonneg_rank, nonneg_rank_real, rank_toolkit, rank_toolkit_with, real_rank, xor_rank, BinaryMatrix,
    Factor, RankKind, RankOptions, RankReport,
};
