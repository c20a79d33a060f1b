//! Optimal finite-horizon planning for decentralized POMDPs.
//!
//! The crate implements the GMAA* family of heuristic search planners over
//! collaborative Bayesian games (CBGs): plain GMAA*, GMAA*-IC (lossless
//! incremental clustering of histories) and GMAA*-ICE (incremental clustering
//! plus incremental node expansion driven by a k-best CBG solver). Admissible
//! Q-value heuristics (Q_MDP, Q_POMDP, Q_BG) are available in tree, vector and
//! size-minimal hybrid representations.
//!
//! See the `book/` directory for a guided tour; every code snippet in the book
//! is compiled and run as a doctest of this crate.

pub mod cbg;
pub mod cbg_solver;
pub mod heuristics;
pub mod joint;
pub mod model;
pub mod parser;
pub mod policy;
pub mod search;

pub use model::{DecPomdpModel, JointBelief, ModelError};
pub use parser::{parse_dpomdp, ParseError};

// Every code block in the book runs as a doctest of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/heuristics.md")]
    mod heuristics {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/kbest.md")]
    mod kbest {}
}
