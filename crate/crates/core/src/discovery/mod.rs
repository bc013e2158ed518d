//! Confounder discovery: CI filtering, FCI, LLM-driven proposal and
//! annotation, and subspace construction.

pub mod ci;
pub mod fci;
pub mod llm;
pub mod prompts;
pub mod run;
pub mod subspace;

pub use ci::{ci_filter, g_square, CiOutcome, CiTester, DiscreteData, FilterOutcome, DEFAULT_SIGNIFICANCE};
pub use fci::{fci, markov_blanket, FciConfig, FciResult, Mark, Pag};
pub use llm::{prompt_hash, Category, LlmPort, MockLlm, MockVariable, ReplayLlm, ReplayRecord};
pub use prompts::PoolEntry;
pub use run::{
    annotate_reviews, causal_feedback, collect_reviews, direct_extraction, read_pool, run_discovery, sample_reviews,
    write_pool, AnnotationMatrix, CausalVariable, DiscoveryConfig, DiscoveryOutcome, ReviewRow, RoundSummary,
};
pub use subspace::{build_subspace, ConfounderSubspace, DEFAULT_J};

/// Lowercased, trimmed, inner whitespace collapsed.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}
