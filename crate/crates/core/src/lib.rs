//! Controller synthesis for imperfect-information safety games over timed
//! game automata, with cost-optimal selection of observable predicates.
//!
//! The crate is organized along the pipeline:
//!
//! - [`dbm`] and [`cells`]: clock-zone algebra and observation cells;
//! - [`finite_game`]: explicit arenas and perfect-information safety
//!   solving;
//! - [`knowledge`]: the belief (subset) construction reducing imperfect
//!   information to perfect information, including building knowledge
//!   games on top of already-solved knowledge games;
//! - [`tga`]: timed game automata and their zone-level game semantics;
//! - [`region`]: an independent region-granularity implementation of the
//!   same semantics, used as a ground-truth oracle;
//! - [`optimizer`]: the lattice search for a minimal-cost observation
//!   set, with candidate pruning and state-space reuse.

pub mod bounds;
pub mod cells;
pub mod dbm;
pub mod finite_game;
pub mod knowledge;
pub mod observation;
pub mod optimizer;
pub mod region;
pub mod testgen;
pub mod tga;

pub use observation::{ObsMask, Observation, PredId};
