//! Decomposition of bipartite and multipartite unitaries into products of
//! controlled-unitary gates.
//!
//! Every decomposition returns a [`gateir::Circuit`] that can be checked
//! against its source with [`gateir::verify_decomposition`].
//!
//! Index conventions used throughout:
//! - a bipartite basis state `|a>|b>` has index `a * d_B + b` (0-based);
//! - a multipartite basis state uses mixed radix with party 0 most significant;
//! - a circuit's gate list `[U_1, ..., U_k]` denotes the product `U_1 U_2 ... U_k`,
//!   so `U_k` acts first on a state.

pub mod codec;
pub mod error;
pub mod gateir;
pub mod generators;
pub mod matcore;
pub mod multiparty;
pub mod permdecomp;
pub mod protocols;
pub mod sandwich;
pub mod schmidt;
pub mod stdgates;

pub mod cli;

pub use error::{Result, SynthError};
pub use matcore::{CMat, Tolerance, C64};
