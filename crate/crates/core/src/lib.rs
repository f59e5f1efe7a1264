//! Finite-model engine for etale groupoid constructions over exact rationals.
//!
//! Everything in this crate is finite and exact: groups are multiplication
//! tables, spaces are finite sets, vector spaces are `Q^n` with `BigRational`
//! entries, and every axiom the library relies on is checked by enumeration.
//! The main pipeline runs from etale seed data (`etale`) through the reduced
//! groupoid and its pruned completion (`xv`), bundles and multisections
//! (`bundle`), cover reduction from an ambient groupoid (`ambient`), and the
//! global stabilization functor with its induced perturbations (`stab`).
//! Inverse/direct systems of `Q`-vector spaces live in `tower`, and the
//! GSPEC JSON interchange format in `gspec`.

// Table-driven code indexes several parallel arrays by one loop variable;
// iterator rewrites obscure that.
#![allow(clippy::needless_range_loop)]

pub mod ambient;
pub mod bundle;
pub mod cat;
pub mod etale;
pub mod fixtures;
pub mod group;
pub mod gspec;
pub mod par;
pub mod qlin;
pub mod report;
pub mod stab;
pub mod tower;
pub mod xv;

pub use qlin::{QMatrix, QVec, Rat};
pub use report::{Check, Report};
