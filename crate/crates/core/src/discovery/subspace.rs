use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompts::PoolEntry;
use crate::error::{Error, Result};
use crate::numerics::{kmeans, DenseMatrix, Pca};
use crate::representation::encoder::TextEncoder;

pub const DEFAULT_J: usize = 10;

/// J x k matrix of confounder centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfounderSubspace {
    pub centroids: DenseMatrix,
}

#[derive(Serialize, Deserialize)]
struct SubspaceFile {
    #[serde(rename = "J")]
    j: usize,
    k: usize,
    centroids: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

impl ConfounderSubspace {
    pub fn j(&self) -> usize {
        self.centroids.rows()
    }

    pub fn k(&self) -> usize {
        self.centroids.cols()
    }

    pub fn zeros(j: usize, k: usize) -> Self {
        Self {
            centroids: DenseMatrix::zeros(j, k),
        }
    }

    pub fn save(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        let file = SubspaceFile {
            j: self.j(),
            k: self.k(),
            centroids: self.centroids.as_slice().to_vec(),
            config_hash: config_hash.map(str::to_string),
        };
        let mut bytes = serde_json::to_vec(&file)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: SubspaceFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.centroids.len() != file.j * file.k {
            return Err(Error::Shape(format!(
                "subspace file has {} values for J={} k={}",
                file.centroids.len(),
                file.j,
                file.k
            )));
        }
        let centroids = DenseMatrix::from_vec(file.j, file.k, file.centroids)?;
        if !centroids.is_finite() {
            return Err(Error::NonFinite("subspace centroids".into()));
        }
        Ok(Self { centroids })
    }
}

pub fn entry_text(e: &PoolEntry) -> String {
    format!("{}. {}. {}", e.name, e.description, e.reasoning)
}

/// Encodes pool entries, reduces them to `k` dimensions and keeps
/// min(J, |pool|) k-means centroids.
pub fn build_subspace(pool: &[PoolEntry], encoder: &dyn TextEncoder, k: usize, j: usize, seed: u64) -> Result<ConfounderSubspace> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let texts: Vec<String> = pool.iter().map(entry_text).collect();
    let ids: Vec<String> = pool.iter().map(|e| e.name.clone()).collect();
    let x = crate::representation::encoder::encode_labeled(encoder, &ids, &texts)?;
    let reduced = Pca::fit(&x, k.min(x.cols()))?.transform(&x)?;
    let reduced = if reduced.cols() < k {
        DenseMatrix::hconcat(&[&reduced, &DenseMatrix::zeros(reduced.rows(), k - reduced.cols())])
    } else {
        reduced
    };
    let jj = j.min(pool.len()).max(1);
    let centroids = kmeans(&reduced, jj, seed)?.centroids;
    if !centroids.is_finite() {
        return Err(Error::NonFinite("subspace centroids".into()));
    }
    Ok(ConfounderSubspace { centroids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::encoder::MockTextEncoder;

    fn entry(name: &str) -> PoolEntry {
        PoolEntry {
            name: name.into(),
            description: format!("{name} description"),
            reasoning: "because".into(),
            round: 1,
        }
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(matches!(
            build_subspace(&[], &MockTextEncoder::default(), 8, 10, 0),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn single_entry_gives_its_reduced_embedding() {
        let enc = MockTextEncoder::default();
        let s = build_subspace(&[entry("price")], &enc, 8, 10, 0).unwrap();
        assert_eq!(s.centroids.shape(), (1, 8));
        // one point: centred embedding is zero
        assert!(s.centroids.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duplicates_coincide_and_file_round_trips() {
        let enc = MockTextEncoder::default();
        let pool = vec![entry("price"), entry("price"), entry("brand"), entry("season")];
        let s = build_subspace(&pool, &enc, 4, 10, 0).unwrap();
        assert_eq!(s.j(), 4);
        let dup = build_subspace(&[entry("price"), entry("price")], &enc, 4, 2, 0).unwrap();
        assert_eq!(dup.centroids.row(0), dup.centroids.row(1));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        s.save(&path, Some("abc")).unwrap();
        assert_eq!(ConfounderSubspace::load(&path).unwrap(), s);
        let raw: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(raw["J"], 4);
        assert_eq!(raw["config_hash"], "abc");
    }
}
