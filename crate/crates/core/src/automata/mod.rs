//! Deterministic finite automata over the binary alphabet.

mod counting;
mod dfa;
mod dot;
mod equivalence;
mod minimize;

pub use counting::{count_accepted, sample_strings, BigCount};
pub use dfa::{Dfa, StateId, ALPHABET_SIZE};
pub use dot::to_dot;
pub use equivalence::{equivalent, Equivalence};
pub use minimize::minimize;
