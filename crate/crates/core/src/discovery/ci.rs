//! G² conditional-independence testing on discrete columns.

use std::collections::{BTreeMap, HashMap};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

/// Column-major discrete data. Each column holds codes `0..levels[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteData {
    columns: Vec<Vec<u8>>,
    levels: Vec<usize>,
    rows: usize,
}

impl DiscreteData {
    pub fn new(columns: Vec<Vec<u8>>) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns of unequal length".into()));
        }
        let levels = columns
            .iter()
            .map(|c| c.iter().copied().max().map_or(1, |m| m as usize + 1))
            .collect();
        Ok(Self { columns, levels, rows })
    }

    /// Maps {−1, 0, 1} to codes {0, 1, 2}.
    pub fn from_ternary(columns: &[Vec<i8>]) -> Result<Self> {
        let mut coded = Vec::with_capacity(columns.len());
        for (c, col) in columns.iter().enumerate() {
            let mut out = Vec::with_capacity(col.len());
            for &v in col {
                if !(-1..=1).contains(&v) {
                    return Err(Error::InvalidInput(format!("column {c} has value {v} outside {{-1, 0, 1}}")));
                }
                out.push((v + 1) as u8);
            }
            coded.push(out);
        }
        Self::new(coded)
    }

    pub fn push_column(&mut self, column: Vec<u8>) -> Result<usize> {
        if !self.columns.is_empty() && column.len() != self.rows {
            return Err(Error::Shape(format!("column of length {} for {} rows", column.len(), self.rows)));
        }
        self.rows = column.len();
        self.levels.push(column.iter().copied().max().map_or(1, |m| m as usize + 1));
        self.columns.push(column);
        Ok(self.columns.len() - 1)
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, c: usize) -> &[u8] {
        &self.columns[c]
    }

    pub fn is_constant(&self, c: usize) -> bool {
        let col = &self.columns[c];
        col.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// True when every stratum had too few populated cells to test.
    pub degenerate: bool,
}

impl CiOutcome {
    pub fn independent(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// G² test of x ⟂ y | z. Degrees of freedom are summed per stratum over
/// the populated levels of x and y only.
pub fn g_square(data: &DiscreteData, x: usize, y: usize, z: &[usize]) -> CiOutcome {
    let (lx, ly) = (data.levels[x], data.levels[y]);
    let mut strata: HashMap<u64, Vec<u64>> = HashMap::new();
    let cx = data.column(x);
    let cy = data.column(y);
    for r in 0..data.rows {
        let mut key = 0u64;
        for &c in z {
            key = key * data.levels[c] as u64 + data.columns[c][r] as u64;
        }
        let table = strata.entry(key).or_insert_with(|| vec![0; lx * ly]);
        table[cx[r] as usize * ly + cy[r] as usize] += 1;
    }
    let ordered: BTreeMap<u64, Vec<u64>> = strata.into_iter().collect();
    let mut statistic = 0.0;
    let mut dof = 0usize;
    for table in ordered.values() {
        let mut row = vec![0u64; lx];
        let mut col = vec![0u64; ly];
        let mut n = 0u64;
        for i in 0..lx {
            for j in 0..ly {
                let o = table[i * ly + j];
                row[i] += o;
                col[j] += o;
                n += o;
            }
        }
        let rx = row.iter().filter(|&&v| v > 0).count();
        let ry = col.iter().filter(|&&v| v > 0).count();
        if rx < 2 || ry < 2 {
            continue;
        }
        dof += (rx - 1) * (ry - 1);
        for i in 0..lx {
            for j in 0..ly {
                let o = table[i * ly + j];
                if o > 0 {
                    let e = row[i] as f64 * col[j] as f64 / n as f64;
                    statistic += 2.0 * o as f64 * (o as f64 / e).ln();
                }
            }
        }
    }
    if dof == 0 {
        return CiOutcome {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    CiOutcome {
        statistic,
        dof,
        p_value: chi.sf(statistic.max(0.0)),
        degenerate: false,
    }
}

/// Memoising wrapper around [`g_square`] keyed by (x, y, sorted z).
#[derive(Debug)]
pub struct CiTester<'a> {
    pub data: &'a DiscreteData,
    pub significance: f64,
    cache: HashMap<(usize, usize, Vec<usize>), CiOutcome>,
    pub degenerate_tests: usize,
    pub tests_run: usize,
}

impl<'a> CiTester<'a> {
    pub fn new(data: &'a DiscreteData, significance: f64) -> Self {
        Self {
            data,
            significance,
            cache: HashMap::new(),
            degenerate_tests: 0,
            tests_run: 0,
        }
    }

    pub fn test(&mut self, x: usize, y: usize, z: &[usize]) -> CiOutcome {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let mut zs = z.to_vec();
        zs.sort_unstable();
        if let Some(hit) = self.cache.get(&(a, b, zs.clone())) {
            return *hit;
        }
        let out = g_square(self.data, a, b, &zs);
        self.tests_run += 1;
        if out.degenerate {
            self.degenerate_tests += 1;
        }
        self.cache.insert((a, b, zs), out);
        out
    }

    pub fn independent(&mut self, x: usize, y: usize, z: &[usize]) -> bool {
        let s = self.significance;
        self.test(x, y, z).independent(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    /// Indices of kept candidate columns, in candidate order.
    pub kept: Vec<usize>,
    /// Candidates skipped because their column is constant.
    pub constant: Vec<usize>,
}

/// Keeps each candidate, in order, whose dependence on `target` survives
/// conditioning on the (at most `cap`) most recently kept candidates.
pub fn ci_filter(
    data: &DiscreteData,
    candidates: &[usize],
    target: usize,
    significance: f64,
    cap: usize,
) -> Result<FilterOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("ci_filter needs at least one candidate column".into()));
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut constant = Vec::new();
    for &z in candidates {
        if data.is_constant(z) {
            log::warn!("column {z} is constant; treated as independent of the target");
            constant.push(z);
            continue;
        }
        let cond: Vec<usize> = kept.iter().rev().take(cap).rev().copied().collect();
        let out = g_square(data, z, target, &cond);
        if !out.independent(significance) {
            kept.push(z);
        }
    }
    Ok(FilterOutcome { kept, constant })
}
