//! Seeded synthetic data with known ground truth.

pub mod crossdomain;
pub mod ordinal;
pub mod reviews;
pub mod scm;

pub use ordinal::OrdinalScm;
pub use reviews::{default_kb, planted_reviews, PlantedCorpus, Role};
pub use scm::LinearScm;
pub use crossdomain::{cross_domain, CrossDomainConfig, CrossDomainCorpus};
