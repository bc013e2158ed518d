use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOP_K: usize = 10;

/// Scores for one candidate set, keyed by item index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub positive_item: usize,
    pub scores: Vec<(usize, f64)>,
}

/// 1-based rank of the positive under descending score, ties broken by
/// ascending item index. Independent of the order of `scores`.
pub fn rank_of_positive(c: &ScoredCandidates) -> Result<usize> {
    let &(_, sp) = c
        .scores
        .iter()
        .find(|(item, _)| *item == c.positive_item)
        .ok_or_else(|| Error::InvalidInput(format!("positive item {} missing from its candidates", c.positive_item)))?;
    if c.scores.iter().any(|(_, s)| s.is_nan()) {
        return Err(Error::NonFinite("candidate score".into()));
    }
    let ahead = c
        .scores
        .iter()
        .filter(|&&(item, s)| item != c.positive_item && (s > sp || (s == sp && item < c.positive_item)))
        .count();
    Ok(ahead + 1)
}

/// (hit, ndcg) for one positive at `rank`.
pub fn hit_and_ndcg(rank: usize, k: usize) -> (f64, f64) {
    if rank <= k {
        (1.0, 1.0 / ((rank + 1) as f64).log2())
    } else {
        (0.0, 0.0)
    }
}

/// Mean HR@10 and NDCG@10 over the candidate sets.
pub fn hr_ndcg(sets: &[ScoredCandidates]) -> Result<(f64, f64)> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no candidate sets to evaluate".into()));
    }
    let mut hr = 0.0;
    let mut ndcg = 0.0;
    for s in sets {
        let (h, n) = hit_and_ndcg(rank_of_positive(s)?, TOP_K);
        hr += h;
        ndcg += n;
    }
    let n = sets.len() as f64;
    Ok((hr / n, ndcg / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub setting: String,
    pub ratio: f64,
    pub seed: u64,
    pub hr10: f64,
    pub ndcg10: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub ratio: f64,
    pub runs: usize,
    pub hr10: f64,
    pub ndcg10: f64,
}

impl MetricsReport {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    /// Means over seeds, one entry per ratio in first-seen order.
    pub fn means(&self) -> Vec<MeanMetrics> {
        let mut out: Vec<MeanMetrics> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|m| m.ratio == r.ratio) {
                Some(m) => {
                    m.runs += 1;
                    m.hr10 += r.hr10;
                    m.ndcg10 += r.ndcg10;
                }
                None => out.push(MeanMetrics {
                    ratio: r.ratio,
                    runs: 1,
                    hr10: r.hr10,
                    ndcg10: r.ndcg10,
                }),
            }
        }
        for m in &mut out {
            m.hr10 /= m.runs as f64;
            m.ndcg10 /= m.runs as f64;
        }
        out
    }

    /// CSV with columns setting, ratio, seed, hr10, ndcg10, preceded by a
    /// `# config_hash=` comment line.
    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash={config_hash}")?;
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        drop(w);
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Plot-ready table: ratio, runs, mean HR@10, mean NDCG@10.
    pub fn write_summary(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash={config_hash}")?;
        let mut w = csv::Writer::from_writer(&mut buf);
        for m in self.means() {
            w.serialize(m)?;
        }
        w.flush()?;
        drop(w);
        std::fs::write(path, buf)?;
        Ok(())
    }
}
