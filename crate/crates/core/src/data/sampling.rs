use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::InteractionCorpus;
use super::split::OodSplit;
use crate::error::{Error, Result};

pub const NEGATIVES_PER_POSITIVE: usize = 3;
pub const EVAL_NEGATIVES: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub user: usize,
    pub item: usize,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairs {
    /// Each training positive followed by its sampled negatives.
    pub pairs: Vec<LabeledPair>,
    /// Users for whom fewer than three unseen items existed, so sampling fell
    /// back to replacement (or produced nothing when no unseen item existed).
    pub replacement_users: BTreeSet<usize>,
}

/// Draws three negatives per training positive from items outside the user's
/// training positives.
pub fn sample_negatives(split: &OodSplit, num_items: usize, seed: u64) -> Result<TrainingPairs> {
    if split.train.is_empty() {
        return Err(Error::Sampling("training split is empty".into()));
    }
    let num_users = split.train.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let mut positives: Vec<HashSet<usize>> = vec![HashSet::new(); num_users];
    for &(u, i) in &split.train {
        positives[u].insert(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(split.train.len() * (NEGATIVES_PER_POSITIVE + 1));
    let mut replacement_users = BTreeSet::new();

    for &(u, i) in &split.train {
        pairs.push(LabeledPair { user: u, item: i, label: 1.0 });
        let seen = &positives[u];
        let available = num_items - seen.len();
        if available < NEGATIVES_PER_POSITIVE {
            replacement_users.insert(u);
            let pool: Vec<usize> = (0..num_items).filter(|v| !seen.contains(v)).collect();
            if pool.is_empty() {
                continue;
            }
            for _ in 0..NEGATIVES_PER_POSITIVE {
                let item = pool[rng.random_range(0..pool.len())];
                pairs.push(LabeledPair { user: u, item, label: 0.0 });
            }
            continue;
        }
        let mut drawn: Vec<usize> = Vec::with_capacity(NEGATIVES_PER_POSITIVE);
        while drawn.len() < NEGATIVES_PER_POSITIVE {
            let item = rng.random_range(0..num_items);
            if !seen.contains(&item) && !drawn.contains(&item) {
                drawn.push(item);
            }
        }
        pairs.extend(drawn.into_iter().map(|item| LabeledPair { user: u, item, label: 0.0 }));
    }
    if !replacement_users.is_empty() {
        log::warn!(
            "{} users had fewer than {NEGATIVES_PER_POSITIVE} unseen items; negatives drawn with replacement",
            replacement_users.len()
        );
    }
    Ok(TrainingPairs { pairs, replacement_users })
}

/// One ranking task: a held-out positive among 99 never-interacted items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCandidateSet {
    pub user: usize,
    pub positive_item: usize,
    pub negatives: Vec<usize>,
}

impl EvalCandidateSet {
    /// Positive first, then negatives.
    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.positive_item).chain(self.negatives.iter().copied())
    }
}

/// One candidate set per test positive.
pub fn build_eval_candidates(split: &OodSplit, corpus: &InteractionCorpus, seed: u64) -> Result<Vec<EvalCandidateSet>> {
    if split.test.is_empty() {
        return Err(Error::Sampling("test split is empty".into()));
    }
    let history = corpus.interacted_items();
    let n = corpus.num_items();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(split.test.len());
    for &(u, pos) in &split.test {
        let pool: Vec<usize> = (0..n).filter(|v| !history[u].contains(v)).collect();
        if pool.len() < EVAL_NEGATIVES {
            return Err(Error::Sampling(format!(
                "user '{}' has only {} never-interacted items; {EVAL_NEGATIVES} are needed",
                corpus.users[u].id,
                pool.len()
            )));
        }
        let negatives = index::sample(&mut rng, pool.len(), EVAL_NEGATIVES).into_iter().map(|k| pool[k]).collect();
        out.push(EvalCandidateSet {
            user: u,
            positive_item: pos,
            negatives,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    user: String,
    positive: String,
    negatives: Vec<String>,
}

pub fn save_candidates(sets: &[EvalCandidateSet], corpus: &InteractionCorpus, path: &Path) -> Result<()> {
    let recs: Vec<CandidateRecord> = sets
        .iter()
        .map(|s| CandidateRecord {
            user: corpus.users[s.user].id.clone(),
            positive: corpus.items[s.positive_item].clone(),
            negatives: s.negatives.iter().map(|&i| corpus.items[i].clone()).collect(),
        })
        .collect();
    fs::write(path, serde_json::to_vec(&recs)?)?;
    Ok(())
}

pub fn load_candidates(corpus: &InteractionCorpus, path: &Path) -> Result<Vec<EvalCandidateSet>> {
    let recs: Vec<CandidateRecord> = serde_json::from_slice(&fs::read(path)?)?;
    let item = |id: &str| corpus.item_index(id).ok_or_else(|| Error::Sampling(format!("unknown item '{id}'")));
    recs.iter()
        .map(|r| {
            Ok(EvalCandidateSet {
                user: corpus
                    .user_index(&r.user)
                    .ok_or_else(|| Error::Sampling(format!("unknown user '{}'", r.user)))?,
                positive_item: item(&r.positive)?,
                negatives: r.negatives.iter().map(|n| item(n)).collect::<Result<_>>()?,
            })
        })
        .collect()
}
