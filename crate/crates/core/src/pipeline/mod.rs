//! Two-phase training, evaluation, ablations, shift sweeps and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use config::{Ablation, EncoderSettings, LlmSettings, RunConfig, SplitSpec, SWEEP_RATIOS};
pub use experiment::{
    ablate, build_subspaces, discover, evaluate, final_phase, make_split, model_inputs, model_spec, pool_path,
    prepare_seed, replay_path, run_grid, run_seed, shift_sweep, subspace_path, subspaces_for, Corpora, Pools, SeedData,
    SeedOutcome, Subspaces,
};
pub use metrics::{hit_and_ndcg, hr_ndcg, rank_of_positive, MetricsReport, MetricsRow, ScoredCandidates, TOP_K};
pub use model::{CdrModel, DomainGraph, ModelInputs, ModelSpec, Phase};
pub use train::{train_two_phase, EpochLog, TrainData, TrainReport};
