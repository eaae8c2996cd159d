//! Combinatorial machinery for Baumslag-Solitar groups `BS(m,n)` and the
//! dynamics of their conjugation action on the space of subgroups.
//!
//! The crate is organized around five layers:
//!
//! - [`words`]: Britton normal forms and exact group arithmetic;
//! - [`graphs`]: labeled `(m,n)`-graphs, the Transfer Equation, phenotype
//!   arithmetic, rooted balls, and rooted isomorphism;
//! - [`preactions`]: partial actions `(beta, tau)`, their quotient
//!   `(m,n)`-graphs, and maximal-forest saturation;
//! - [`walks`]: step measures, seeded random walks, p-adic valuation traces,
//!   and one-dimensional lazy-walk statistics;
//! - [`dynamics`]: the headline experiments — perfect-kernel membership,
//!   escape from finite cores, the non-mixing certificate, preaction
//!   pasting, and the mixing-witness trend.
//!
//! Monte Carlo trials fan out across threads when the `parallel` feature
//! (default) is enabled; per-trial RNG streams make results independent of
//! the scheduling, so reports are byte-identical for a fixed seed.

pub mod dynamics;
pub mod graphs;
pub mod parallel;
pub mod preactions;
pub mod walks;
pub mod words;

pub use graphs::{Direction, Label, MnGraph, ValidationReport};
pub use preactions::{EdgePath, Point, Preaction, TauEdge};
pub use walks::{StepMeasure, ValuationTrace, WalkTrace};
pub use words::{Letter, NormalForm, Params, Word};
