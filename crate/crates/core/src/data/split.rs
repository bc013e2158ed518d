use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::InteractionCorpus;
use super::implicit::to_implicit;
use crate::error::{Error, Result};

pub type Pair = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSetting {
    UserDegreeShift,
    RegionShift,
    Iid,
}

/// Train/validation/test positives over user and item indices of one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct OodSplit {
    pub train: Vec<Pair>,
    pub val: Vec<Pair>,
    pub test: Vec<Pair>,
    pub setting: SplitSetting,
    pub shift_ratio: f64,
    pub seed: u64,
    pub region: Option<String>,
}

/// On-disk form of a split, keyed by ids rather than indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<(String, String)>,
    pub val: Vec<(String, String)>,
    pub test: Vec<(String, String)>,
    pub setting: SplitSetting,
    pub shift_ratio: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

impl OodSplit {
    pub fn to_file(&self, corpus: &InteractionCorpus) -> SplitFile {
        let ids = |pairs: &[Pair]| -> Vec<(String, String)> {
            pairs.iter().map(|&(u, i)| (corpus.users[u].id.clone(), corpus.items[i].clone())).collect()
        };
        SplitFile {
            train: ids(&self.train),
            val: ids(&self.val),
            test: ids(&self.test),
            setting: self.setting,
            shift_ratio: self.shift_ratio,
            seed: self.seed,
            region: self.region.clone(),
        }
    }

    pub fn from_file(file: &SplitFile, corpus: &InteractionCorpus) -> Result<Self> {
        let idx = |pairs: &[(String, String)]| -> Result<Vec<Pair>> {
            pairs
                .iter()
                .map(|(u, i)| {
                    let ui = corpus.user_index(u).ok_or_else(|| Error::Split(format!("unknown user '{u}'")))?;
                    let ii = corpus.item_index(i).ok_or_else(|| Error::Split(format!("unknown item '{i}'")))?;
                    Ok((ui, ii))
                })
                .collect()
        };
        Ok(Self {
            train: idx(&file.train)?,
            val: idx(&file.val)?,
            test: idx(&file.test)?,
            setting: file.setting,
            shift_ratio: file.shift_ratio,
            seed: file.seed,
            region: file.region.clone(),
        })
    }

    pub fn save(&self, corpus: &InteractionCorpus, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(&self.to_file(corpus))?)?;
        Ok(())
    }

    pub fn load(corpus: &InteractionCorpus, path: &Path) -> Result<Self> {
        let file: SplitFile = serde_json::from_slice(&fs::read(path)?)?;
        Self::from_file(&file, corpus)
    }
}

fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = (n as f64 / 10.0).round() as usize;
    (n - 2 * tenth, tenth, tenth)
}

/// Users in the top quartile by interaction count, ties broken by id ascending.
pub fn high_degree_users(corpus: &InteractionCorpus) -> Result<Vec<bool>> {
    let m = corpus.num_users();
    if m == 0 {
        return Err(Error::Split("corpus has no users".into()));
    }
    let deg = &corpus.degree_index;
    if deg.iter().all(|&d| d == deg[0]) {
        return Err(Error::Split(format!(
            "every user has degree {}; the high-degree quartile is undefined",
            deg[0]
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    // user indices already follow id order
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    let mut member = vec![false; m];
    for &u in order.iter().take(m.div_ceil(4)) {
        member[u] = true;
    }
    Ok(member)
}

fn split_by_membership(
    corpus: &InteractionCorpus,
    member: &[bool],
    shift_ratio: f64,
    seed: u64,
    setting: SplitSetting,
    label: &str,
) -> Result<OodSplit> {
    if !(0.0..=1.0).contains(&shift_ratio) {
        return Err(Error::Split(format!("shift ratio {shift_ratio} outside [0, 1]")));
    }
    let positives: Vec<Pair> = to_implicit(&corpus.events)?.positives.into_iter().collect();
    if positives.is_empty() {
        return Err(Error::Split("corpus has no positive interactions".into()));
    }
    let (_, n_val, n_test) = split_sizes(positives.len());
    let n_in = (shift_ratio * n_test as f64).round() as usize;
    let n_out = n_test - n_in;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inside, mut outside): (Vec<Pair>, Vec<Pair>) = positives.iter().partition(|(u, _)| member[*u]);
    if inside.len() < n_in {
        return Err(Error::Split(format!(
            "test quota needs {n_in} positives from {label} users but only {} exist (short by {})",
            inside.len(),
            n_in - inside.len()
        )));
    }
    if outside.len() < n_out {
        return Err(Error::Split(format!(
            "test quota needs {n_out} positives from users outside {label} but only {} exist (short by {})",
            outside.len(),
            n_out - outside.len()
        )));
    }
    inside.shuffle(&mut rng);
    outside.shuffle(&mut rng);
    let mut test: Vec<Pair> = inside.drain(..n_in).chain(outside.drain(..n_out)).collect();
    let mut rest: Vec<Pair> = inside.into_iter().chain(outside).collect();
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let mut val: Vec<Pair> = rest.drain(..n_val).collect();
    let mut train = rest;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(OodSplit {
        train,
        val,
        test,
        setting,
        shift_ratio,
        seed,
        region: None,
    })
}

/// Test set drawn `shift_ratio` from high-degree users and the rest from everyone else.
pub fn split_ood_degree(corpus: &InteractionCorpus, shift_ratio: f64, seed: u64) -> Result<OodSplit> {
    let member = high_degree_users(corpus)?;
    split_by_membership(corpus, &member, shift_ratio, seed, SplitSetting::UserDegreeShift, "high-degree")
}

/// Test set drawn `shift_ratio` from users of `region` and the rest from everyone else.
pub fn split_ood_region(corpus: &InteractionCorpus, region: &str, shift_ratio: f64, seed: u64) -> Result<OodSplit> {
    if corpus.users.iter().all(|u| u.region.is_none()) {
        return Err(Error::Split("corpus carries no region metadata".into()));
    }
    let member: Vec<bool> = corpus.users.iter().map(|u| u.region.as_deref() == Some(region)).collect();
    if !member.contains(&true) {
        return Err(Error::Split(format!("no users in region '{region}'")));
    }
    let mut split = split_by_membership(corpus, &member, shift_ratio, seed, SplitSetting::RegionShift, region)?;
    split.region = Some(region.to_string());
    Ok(split)
}

/// Uniform 8:1:1 split with no shift.
pub fn split_iid(corpus: &InteractionCorpus, seed: u64) -> Result<OodSplit> {
    let member = vec![false; corpus.num_users()];
    split_by_membership(corpus, &member, 0.0, seed, SplitSetting::Iid, "no")
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::data::corpus::EventRecord;

    /// Users u00..u19; user i rates i + 2 items positively.
    fn corpus() -> InteractionCorpus {
        let mut recs = Vec::new();
        for u in 0..20 {
            for i in 0..(u + 2) {
                recs.push(EventRecord {
                    user: format!("u{u:02}"),
                    item: format!("i{i:02}"),
                    rating: 5,
                    review: None,
                    region: Some(if u % 3 == 0 { "Beijing" } else { "Shanghai" }.into()),
                    domain: "d".into(),
                });
            }
        }
        InteractionCorpus::from_records("d", &recs).unwrap()
    }

    fn assert_disjoint(s: &OodSplit) {
        let a: BTreeSet<_> = s.train.iter().collect();
        let b: BTreeSet<_> = s.val.iter().collect();
        let c: BTreeSet<_> = s.test.iter().collect();
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
    }

    #[test]
    fn full_shift_uses_only_high_degree_users() {
        let c = corpus();
        let s = split_ood_degree(&c, 1.0, 7).unwrap();
        // recompute the quartile: the five highest-degree users are u15..u19
        assert!(s.test.iter().all(|&(u, _)| u >= 15));
        assert_disjoint(&s);
        let n = s.train.len() + s.val.len() + s.test.len();
        assert_eq!(n, 230);
        assert_eq!(s.test.len(), 23);
        assert_eq!(s.val.len(), 23);
    }

    #[test]
    fn partial_shift_ratio() {
        let c = corpus();
        let s = split_ood_degree(&c, 0.4, 1).unwrap();
        let hi = s.test.iter().filter(|&&(u, _)| u >= 15).count();
        assert_eq!(hi, (0.4f64 * 23.0).round() as usize);
    }

    #[test]
    fn equal_degrees_are_rejected() {
        let recs: Vec<EventRecord> = (0..8)
            .map(|u| EventRecord {
                user: format!("u{u}"),
                item: "x".into(),
                rating: 5,
                review: None,
                region: None,
                domain: "d".into(),
            })
            .collect();
        let c = InteractionCorpus::from_records("d", &recs).unwrap();
        assert!(split_ood_degree(&c, 1.0, 0).is_err());
    }

    #[test]
    fn region_shift() {
        let c = corpus();
        let s = split_ood_region(&c, "Beijing", 1.0, 3).unwrap();
        assert!(s.test.iter().all(|&(u, _)| c.users[u].region.as_deref() == Some("Beijing")));
        let s0 = split_ood_region(&c, "Beijing", 0.0, 3).unwrap();
        assert!(s0.test.iter().all(|&(u, _)| c.users[u].region.as_deref() != Some("Beijing")));
        assert!(split_ood_region(&c, "Chengdu", 1.0, 3).is_err());
    }

    #[test]
    fn missing_region_metadata() {
        let recs = vec![EventRecord {
            user: "u".into(),
            item: "x".into(),
            rating: 5,
            review: None,
            region: None,
            domain: "d".into(),
        }];
        let c = InteractionCorpus::from_records("d", &recs).unwrap();
        assert!(split_ood_region(&c, "Beijing", 1.0, 0).is_err());
    }

    #[test]
    fn deterministic_and_file_round_trip() {
        let c = corpus();
        let a = split_ood_degree(&c, 0.6, 11).unwrap();
        let b = split_ood_degree(&c, 0.6, 11).unwrap();
        assert_eq!(a, b);
        let back = OodSplit::from_file(&a.to_file(&c), &c).unwrap();
        assert_eq!(a, back);
    }
}
