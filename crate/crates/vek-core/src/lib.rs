//! Core library of the veracity evaluation kit (`vek`).
//!
//! The crate bundles four pieces of machinery that are useful when a
//! classifier has to be trained, shifted, or explained around fact-checking
//! data:
//!
//! * [`pu`] — positive-unlabelled learning with the weighting scheme of
//!   Elkan & Noto and a conversion step that relabels the most confidently
//!   positive unlabelled instances.
//! * [`ssa`] — sequential subspace alignment between time-steps or domains,
//!   including per-class semi-supervised alignment and a binary-tree
//!   extension for longer sequences.
//! * [`xdiag`] — diagnostic properties for saliency explanations (human
//!   agreement, confidence indication, faithfulness, rationale and dataset
//!   consistency) plus built-in occlusion, gradient, and Shapley
//!   value-sampling generators over a reference bag-of-tokens model.
//! * [`explain`] — ROUGE metrics and greedy extractive-oracle utilities.
//!
//! Everything is deterministic given a seed: all randomness flows through
//! seeded ChaCha streams and every tie-break resolves to the lowest index.

pub mod dataio;
pub mod explain;
pub mod numerics;
pub mod pu;
pub mod ssa;
pub mod synth;
pub mod xdiag;

/// Version string echoed into every report.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
