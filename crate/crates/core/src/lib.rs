//! Proof search with determinantal tactic filtering.
//!
//! Language-model proof search spends most of its budget executing near
//! duplicate tactics: beams are dominated by rephrasings that fail the same
//! way. This crate prunes a candidate beam down to a small set that is both
//! high quality and diverse before anything is sent to the proving
//! environment. The pruning step samples an exact k-DPP over quality-scaled
//! unit-norm tactic embeddings, so similar candidates repel each other while
//! strong candidates stay likely.
//!
//! The pieces compose into a full pipeline:
//!
//! * [`dpp`]: kernels, eigendecompositions, elementary symmetric
//!   polynomials, the exact k-DPP sampler, and a brute-force oracle.
//! * [`filter`]: quality scoring (softmax over logits, predicted success,
//!   predicted time) and the DPP / top-k / random selection strategies.
//! * [`embed`]: embedding providers: file-backed lookup, a deterministic
//!   hash stub, and a remote HTTP service.
//! * [`transitions`]: the on-disk record of every tactic execution, with
//!   replay lookup and train/validation splitting.
//! * [`search`]: best-first proof search over a goal-deduplicated DAG,
//!   replay and synthetic environments, and an independent proof verifier.
//! * [`metrics`]: pass@k, per-node success and uniqueness rates, execution
//!   time and embedding similarity summaries.

pub mod dpp;
pub mod embed;
pub mod filter;
pub mod metrics;
pub mod search;
pub mod transitions;

#[cfg(doctest)]
pub mod book;
