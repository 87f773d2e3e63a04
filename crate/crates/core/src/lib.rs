//! TSP heuristics built on continuous relaxations of the tour polytope.
//!
//! The toolkit has three layers:
//!
//! * **Relaxations** — gradient flows on the orthogonal manifold ([`flows`])
//!   and the closed-form two-sided orthogonal Procrustes solution
//!   ([`procrustes`]), both of which relax the permutation constraint of the
//!   trace-form tour cost to orthogonal matrices.
//! * **Candidate sets** — per-city neighbor shortlists ranked either by the
//!   Procrustes edge strengths (P-nearness, optionally sharpened by a
//!   distance homotopy) or by the classical 1-tree α-nearness with Held–Karp
//!   subgradient optimization ([`spanning`]).
//! * **Search** — candidate-biased 2-opt/3-opt local search under a fixed
//!   move budget ([`localsearch`]) and an experiment harness that compares
//!   the two candidate-generation pipelines under identical protocols
//!   ([`harness`]).
//!
//! [`instance`] handles TSPLIB parsing, distance matrices, and tour costs;
//! [`linalg`] provides the shared dense symmetric eigensolver, Lie-bracket
//! algebra, Cayley steps, and Laplacian connectivity counts.

pub mod candidates;
pub mod error;
pub mod flows;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod localsearch;
pub mod procrustes;
pub mod spanning;

pub use error::{Error, Result};
