use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const TEXT_DIM: usize = 384;

/// Turns documents into fixed-width vectors.
pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;

    /// One row of width [`TEXT_DIM`] per input text.
    fn encode(&self, texts: &[String]) -> Result<DenseMatrix>;
}

/// Encodes `docs`, attaching the failing document id when the encoder errors.
pub fn encode_labeled(encoder: &dyn TextEncoder, ids: &[String], docs: &[String]) -> Result<DenseMatrix> {
    assert_eq!(ids.len(), docs.len());
    let out = match encoder.encode(docs) {
        Ok(m) => m,
        Err(batch_err) => {
            // retry one by one to name the culprit
            for (id, doc) in ids.iter().zip(docs) {
                if let Err(e) = encoder.encode(std::slice::from_ref(doc)) {
                    return Err(Error::Encoder {
                        doc: id.clone(),
                        reason: e.to_string(),
                    });
                }
            }
            return Err(Error::Encoder {
                doc: "<batch>".into(),
                reason: batch_err.to_string(),
            });
        }
    };
    if out.rows() != docs.len() || out.cols() != TEXT_DIM {
        return Err(Error::Encoder {
            doc: "<batch>".into(),
            reason: format!(
                "encoder '{}' returned {}x{}, expected {}x{TEXT_DIM}",
                encoder.name(),
                out.rows(),
                out.cols(),
                docs.len()
            ),
        });
    }
    if !out.is_finite() {
        return Err(Error::Encoder {
            doc: "<batch>".into(),
            reason: "non-finite embedding".into(),
        });
    }
    Ok(out)
}

/// Deterministic stand-in for a sentence encoder: every token maps to a fixed
/// Gaussian vector derived from a hash of (seed, token), and a document is the
/// mean over its token multiset.
pub struct MockTextEncoder {
    seed: u64,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

const EMPTY_TOKEN: &str = "\u{0}empty";

impl MockTextEncoder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.cache.lock().unwrap().get(token) {
            return v.clone();
        }
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let v: Vec<f64> = (0..TEXT_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.cache.lock().unwrap().insert(token.to_string(), v.clone());
        v
    }

    pub fn tokenize(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect()
    }
}

impl Default for MockTextEncoder {
    fn default() -> Self {
        Self::new(0)
    }
}

impl TextEncoder for MockTextEncoder {
    fn name(&self) -> &str {
        "mock-hash-384"
    }

    fn encode(&self, texts: &[String]) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(texts.len(), TEXT_DIM);
        for (r, text) in texts.iter().enumerate() {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for t in Self::tokenize(text) {
                *counts.entry(t).or_default() += 1;
            }
            if counts.is_empty() {
                counts.insert(EMPTY_TOKEN.to_string(), 1);
            }
            let total: usize = counts.values().sum();
            let row = out.row_mut(r);
            for (token, c) in &counts {
                let w = *c as f64 / total as f64;
                for (o, v) in row.iter_mut().zip(self.token_vector(token)) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}
