//! Attribute→preference structure learning, invariant inference and fusion.

pub mod dag;
pub mod invariant;
pub mod losses;
pub mod trainer;

pub use dag::{off_diagonal_mask, structural_hamming_distance, AdjacencyDag, DagLevel};
pub use invariant::{fuse_attention, infer_invariant, invariant_var, Fusion, InferenceMode};
pub use losses::{
    dual_causal_loss, level_causal_loss, level_causal_var, reconstruction_loss, structural_losses, CausalLossWeights,
    ScmBatch, StructuralLosses,
};
pub use trainer::{fit_dag, DagFit, DagTrainConfig, EscalationPolicy, EscalationReport};
