//! Corpora, implicit feedback, out-of-distribution splits and sampling.

pub mod corpus;
pub mod implicit;
pub mod sampling;
pub mod split;

pub use corpus::{EventRecord, InteractionCorpus, UserRecord};
pub use implicit::{to_implicit, ImplicitFeedback};
pub use sampling::{build_eval_candidates, sample_negatives, EvalCandidateSet, LabeledPair, TrainingPairs};
pub use split::{split_iid, split_ood_degree, split_ood_region, OodSplit, SplitSetting};
