use std::sync::Arc;

use rand::Rng;

use super::encoder::{encode_labeled, TextEncoder, TEXT_DIM};
use super::layers::Mlp2;
use crate::data::InteractionCorpus;
use crate::error::{Error, Result};
use crate::numerics::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};

/// W_att (k x m), i.i.d. normal with standard deviation 1/sqrt(k).
pub fn init_attribute_matrix<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::random_normal(k, m, 1.0 / (k as f64).sqrt(), rng)
}

/// One-hot lookup: row `r` of the result is column `user_ids[r]` of `w_att`.
pub fn build_attribute_embeddings(user_ids: &[usize], w_att: &DenseMatrix) -> Result<DenseMatrix> {
    if let Some(&bad) = user_ids.iter().find(|&&u| u >= w_att.cols()) {
        return Err(Error::InvalidInput(format!(
            "user index {bad} out of range for {} users",
            w_att.cols()
        )));
    }
    Ok(DenseMatrix::from_fn(user_ids.len(), w_att.rows(), |r, j| w_att[(j, user_ids[r])]))
}

/// Graph form of [`build_attribute_embeddings`].
pub fn attribute_embeddings(g: &mut Graph, w_att: Var, user_ids: Arc<Vec<usize>>) -> Var {
    let t = g.transpose(w_att);
    g.gather_rows(t, user_ids)
}

/// Raw text of every user and item in a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDocuments {
    pub user_docs: Vec<String>,
    pub item_docs: Vec<String>,
}

impl DomainDocuments {
    /// A user's document concatenates their reviews; an item's concatenates
    /// the reviews it received. Both follow event order.
    pub fn from_corpus(corpus: &InteractionCorpus) -> Self {
        let mut user_docs: Vec<Vec<&str>> = vec![Vec::new(); corpus.num_users()];
        let mut item_docs: Vec<Vec<&str>> = vec![Vec::new(); corpus.num_items()];
        for e in &corpus.events {
            if let Some(r) = e.review.as_deref() {
                user_docs[e.user].push(r);
                item_docs[e.item].push(r);
            }
        }
        Self {
            user_docs: user_docs.into_iter().map(|d| d.join(" ")).collect(),
            item_docs: item_docs.into_iter().map(|d| d.join(" ")).collect(),
        }
    }
}

/// Encoded documents, fixed during training.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEmbeddings {
    /// m x 384.
    pub users: DenseMatrix,
    /// n x 384.
    pub items: DenseMatrix,
}

pub fn encode_documents(corpus: &InteractionCorpus, encoder: &dyn TextEncoder) -> Result<DocumentEmbeddings> {
    let docs = DomainDocuments::from_corpus(corpus);
    let user_ids: Vec<String> = corpus.users.iter().map(|u| format!("user:{}", u.id)).collect();
    let item_ids: Vec<String> = corpus.items.iter().map(|i| format!("item:{i}")).collect();
    Ok(DocumentEmbeddings {
        users: encode_labeled(encoder, &user_ids, &docs.user_docs)?,
        items: encode_labeled(encoder, &item_ids, &docs.item_docs)?,
    })
}

/// Projections from (attributes ∥ text) to k for users and from text to k for items.
#[derive(Debug, Clone, Copy)]
pub struct InitialProjection {
    pub user: Mlp2,
    pub item: Mlp2,
}

impl InitialProjection {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, k: usize, rng: &mut R) -> Self {
        Self {
            user: Mlp2::new(store, &format!("{name}.user_proj"), k + TEXT_DIM, k, k, rng),
            item: Mlp2::new(store, &format!("{name}.item_proj"), TEXT_DIM, k, k, rng),
        }
    }

    /// Returns (E_ui, E_vi) from E_att (m x k) and the encoded documents.
    pub fn forward(&self, g: &mut Graph, p: &Bound, e_att: Var, user_text: Var, item_text: Var) -> (Var, Var) {
        let combined = g.hconcat(&[e_att, user_text]);
        let users = self.user.forward(g, p, combined);
        let items = self.item.forward(g, p, item_text);
        (users, items)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.user.params().into_iter().chain(self.item.params()).collect()
    }
}
