//! Fingerprint matching with genetic-programming formulas.
//!
//! Minutiae (ridge endings and bifurcations) are extracted from a skeleton
//! image with the crossing-number method. For an enrolled fingerprint, a
//! formula predicting each minutia's row coordinate from its column and
//! ridge angles is evolved with tree-based genetic programming. A candidate
//! fingerprint matches when the enrolled formula, applied to the
//! candidate's minutiae, reproduces the enrolled targets with a small mean
//! squared error.

pub mod cli;
pub mod error;
pub mod evolve;
pub mod expr;
pub mod fixtures;
pub mod matching;
pub mod minutiae;
pub mod reproduce;

pub use error::{Error, Result};
pub use evolve::{EvolutionConfig, FitnessCase, Individual, RunResult};
pub use expr::{InitMethod, InputBinding, ProgramTree, TerminalSet};
pub use matching::{
    ComparisonMode, CountPolicy, Decision, MatchConfig, MatchReport, Template,
};
pub use minutiae::{BifurcationPoint, BinaryImage, EndPoint, MinutiaeSet, SkeletonImage};
