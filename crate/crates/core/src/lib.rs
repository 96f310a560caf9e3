//! A workbench for finite-domain constraint satisfaction and promise
//! constraint satisfaction: relational structures and homomorphisms, a
//! complete backtracking solver, exact integer/rational linear algebra,
//! the linear-equation algorithm for PCSP(1-in-3, NAE), polymorphism
//! search, pp-constructions, and matrix machinery for cyclic operations.

pub mod error;
pub mod linear;
pub mod pcsp13;
pub mod poly;
pub mod ppcon;
pub mod prooflab;
pub mod solver;
pub mod structure;

pub use error::Error;

/// Resource caps for operations that materialize large objects.
///
/// Caps are explicit configuration; exceeding one yields
/// [`Error::ResourceLimit`], never silent truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of domain elements a constructed structure may have
    /// (bounds `d^n` for powers and indicator instances).
    pub max_cells: usize,
    /// Maximum number of tuples a constructed relation may have.
    pub max_tuples: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_cells: 10_000_000, max_tuples: 10_000_000 }
    }
}
