//! Abductive cause judgment over a constrained rule language.
//!
//! The toolkit answers questions of the form "is this fact a plausible cause
//! of that phenomenon?" by turning abduction into forward deduction: inject
//! the candidate cause as a hypothetical premise (LRM), prune everything the
//! phenomenon does not depend on (IPM), then run forward reasoning over the
//! reduced problem (FRM). The crate ships the pieces needed to build and
//! evaluate that pipeline end to end:
//!
//! - [`lang`]: entities, attributes, facts, rules, and the task document
//!   format, with strict parsers and renderers.
//! - [`engine`]: a deterministic forward-chaining engine with minimal-proof
//!   extraction; it doubles as the ground-truth oracle.
//! - [`generator`]: graded synthetic task construction (reasoning chain
//!   length 1-4) plus a ProofWriter-style importer.
//! - [`backend`]: where answers come from — the symbolic oracle, a noisy
//!   variant for robustness studies, or a remote chat-completion model.
//! - [`pipeline`]: the CJ method and the baselines it is compared against,
//!   with per-call accounting.
//! - [`harness`]: batch evaluation with resumable traces and reproducible
//!   reports.

pub mod backend;
pub mod engine;
pub mod generator;
pub mod harness;
pub mod lang;
pub mod pipeline;

pub use engine::{closure, derives, min_proof, relevance_slice, FactSet, ProofNode, ProofTree, Slice};
pub use lang::{parse_premise, parse_rule, parse_task, serialize_task};
pub use lang::{Attribute, Entity, Fact, GroundTruth, Rule, Task};
