//! User/item embeddings and preference disentanglement.

pub mod disentangle;
pub mod embed;
pub mod encoder;
pub mod gcn;
pub mod layers;

pub use disentangle::{disentangle, domain_losses, Discriminator, Disentangler, DomainLossValues, Grl, PreferenceVars};
pub use embed::{build_attribute_embeddings, encode_documents, DocumentEmbeddings, InitialProjection};
pub use encoder::{MockTextEncoder, TextEncoder, TEXT_DIM};
pub use gcn::{gcn_propagate, normalized_adjacency, GraphEmbeddings};
pub use layers::{glorot, Affine, Mlp2};
