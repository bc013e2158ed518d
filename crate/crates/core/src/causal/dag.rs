use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{acyclicity, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DagLevel {
    Specific,
    Shared,
}

/// Weighted adjacency over 2k nodes: attribute dimensions first, then
/// preference dimensions. Entry (i, j) is the weight of edge i -> j.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyDag {
    pub a: DenseMatrix,
    pub level: DagLevel,
    pub k: usize,
}

#[derive(Serialize, Deserialize)]
struct DagFile {
    level: DagLevel,
    k: usize,
    a: Vec<f64>,
}

impl AdjacencyDag {
    pub fn zeros(level: DagLevel, k: usize) -> Self {
        Self {
            a: DenseMatrix::zeros(2 * k, 2 * k),
            level,
            k,
        }
    }

    pub fn new(a: DenseMatrix, level: DagLevel) -> Result<Self> {
        if !a.is_square() || a.rows() % 2 != 0 || a.rows() == 0 {
            return Err(Error::Shape(format!(
                "adjacency must be 2k x 2k, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let k = a.rows() / 2;
        Ok(Self { a, level, k })
    }

    pub fn acyclicity(&self) -> Result<f64> {
        acyclicity(&self.a)
    }

    /// Attribute -> preference block, k x k.
    pub fn attr_to_pref(&self) -> DenseMatrix {
        self.a.block(0, self.k, self.k, 2 * self.k)
    }

    /// Preference -> attribute block, k x k.
    pub fn pref_to_attr(&self) -> DenseMatrix {
        self.a.block(self.k, 2 * self.k, 0, self.k)
    }

    /// Edges with |weight| above `threshold`.
    pub fn edges(&self, threshold: f64) -> Vec<(usize, usize)> {
        let d = 2 * self.k;
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if self.a[(i, j)].abs() > threshold {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = DagFile {
            level: self.level,
            k: self.k,
            a: self.a.as_slice().to_vec(),
        };
        fs::write(path, serde_json::to_vec(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: DagFile = serde_json::from_slice(&fs::read(path)?)?;
        let d = 2 * file.k;
        let a = DenseMatrix::from_vec(d, d, file.a)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Ok(Self {
            a,
            level: file.level,
            k: file.k,
        })
    }
}

/// Ones everywhere except the diagonal.
pub fn off_diagonal_mask(d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { 1.0 })
}

/// Structural Hamming distance between two directed edge sets over `d`
/// nodes. A reversed edge counts once.
pub fn structural_hamming_distance(d: usize, learned: &[(usize, usize)], truth: &[(usize, usize)]) -> usize {
    let mut l = vec![vec![false; d]; d];
    let mut t = vec![vec![false; d]; d];
    for &(i, j) in learned {
        l[i][j] = true;
    }
    for &(i, j) in truth {
        t[i][j] = true;
    }
    let mut shd = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            if (l[i][j], l[j][i]) != (t[i][j], t[j][i]) {
                shd += 1;
            }
        }
    }
    shd
}
