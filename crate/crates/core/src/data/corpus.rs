use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of an events file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub user: String,
    pub item: String,
    pub rating: i64,
    #[serde(default)]
    pub review: Option<String>,
    #[serde(default)]
    pub region: Option<String>,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    pub region: Option<String>,
}

/// An interaction, with user and item stored as indices into the corpus tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub user: usize,
    pub item: usize,
    pub rating: i64,
    pub review: Option<String>,
}

/// Ratings and reviews of one domain. Users and items are sorted by id, so two
/// corpora over the same user set agree on user indices.
#[derive(Debug, Clone)]
pub struct InteractionCorpus {
    pub domain_name: String,
    pub users: Vec<UserRecord>,
    pub items: Vec<String>,
    pub events: Vec<Event>,
    /// Number of events per user.
    pub degree_index: Vec<usize>,
    user_lookup: HashMap<String, usize>,
    item_lookup: HashMap<String, usize>,
}

impl InteractionCorpus {
    /// Builds a corpus from raw records, validating ratings and regions.
    pub fn from_records(domain: &str, records: &[EventRecord]) -> Result<Self> {
        let mut regions: BTreeMap<String, Option<String>> = BTreeMap::new();
        let mut items: BTreeSet<String> = BTreeSet::new();
        for (index, r) in records.iter().enumerate() {
            if !(1..=5).contains(&r.rating) {
                return Err(Error::RatingOutOfRange { index, rating: r.rating });
            }
            if r.domain != domain {
                return Err(Error::InvalidInput(format!(
                    "event {index} belongs to domain '{}', expected '{domain}'",
                    r.domain
                )));
            }
            let slot = regions.entry(r.user.clone()).or_insert(None);
            match (&slot, &r.region) {
                (Some(old), Some(new)) if old != new => {
                    return Err(Error::InvalidInput(format!(
                        "user '{}' has conflicting regions '{old}' and '{new}'",
                        r.user
                    )));
                }
                (None, Some(new)) => *slot = Some(new.clone()),
                _ => {}
            }
            items.insert(r.item.clone());
        }

        let users: Vec<UserRecord> = regions.into_iter().map(|(id, region)| UserRecord { id, region }).collect();
        let items: Vec<String> = items.into_iter().collect();
        let user_lookup: HashMap<String, usize> = users.iter().enumerate().map(|(i, u)| (u.id.clone(), i)).collect();
        let item_lookup: HashMap<String, usize> = items.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();

        let mut degree_index = vec![0; users.len()];
        let events = records
            .iter()
            .map(|r| {
                let user = user_lookup[&r.user];
                degree_index[user] += 1;
                Event {
                    user,
                    item: item_lookup[&r.item],
                    rating: r.rating,
                    review: r.review.clone(),
                }
            })
            .collect();

        Ok(Self {
            domain_name: domain.to_string(),
            users,
            items,
            events,
            degree_index,
            user_lookup,
            item_lookup,
        })
    }

    /// Builds a source/target pair. Users seen in only one domain are an error.
    pub fn pair(source: (&str, &[EventRecord]), target: (&str, &[EventRecord])) -> Result<(Self, Self)> {
        let s = Self::from_records(source.0, source.1)?;
        let t = Self::from_records(target.0, target.1)?;
        check_shared_users(&s, &t)?;
        Ok((s, t))
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<EventRecord>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EventRecord = serde_json::from_str(&line).map_err(|e| {
                Error::InvalidInput(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            out.push(rec);
        }
        Ok(out)
    }

    pub fn write_jsonl(path: &Path, records: &[EventRecord]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a single-domain events file; the domain is taken from the first line.
    pub fn load(path: &Path) -> Result<Self> {
        let records = Self::read_jsonl(path)?;
        let domain = records
            .first()
            .map(|r| r.domain.clone())
            .ok_or_else(|| Error::InvalidInput(format!("{} has no events", path.display())))?;
        Self::from_records(&domain, &records)
    }

    pub fn to_records(&self) -> Vec<EventRecord> {
        self.events
            .iter()
            .map(|e| EventRecord {
                user: self.users[e.user].id.clone(),
                item: self.items[e.item].clone(),
                rating: e.rating,
                review: e.review.clone(),
                region: self.users[e.user].region.clone(),
                domain: self.domain_name.clone(),
            })
            .collect()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_lookup.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_lookup.get(id).copied()
    }

    /// Items each user has interacted with, at any rating.
    pub fn interacted_items(&self) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); self.users.len()];
        for e in &self.events {
            out[e.user].insert(e.item);
        }
        out
    }

    pub fn has_reviews(&self) -> bool {
        self.events.iter().any(|e| e.review.as_deref().is_some_and(|r| !r.trim().is_empty()))
    }
}

pub fn check_shared_users(a: &InteractionCorpus, b: &InteractionCorpus) -> Result<()> {
    let ids_a: BTreeSet<&str> = a.users.iter().map(|u| u.id.as_str()).collect();
    let ids_b: BTreeSet<&str> = b.users.iter().map(|u| u.id.as_str()).collect();
    if ids_a != ids_b {
        let only_a = ids_a.difference(&ids_b).count();
        let only_b = ids_b.difference(&ids_a).count();
        return Err(Error::InvalidInput(format!(
            "domains '{}' and '{}' must share one user set ({only_a} users only in the first, {only_b} only in the second)",
            a.domain_name, b.domain_name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(user: &str, item: &str, rating: i64) -> EventRecord {
        EventRecord {
            user: user.into(),
            item: item.into(),
            rating,
            review: None,
            region: None,
            domain: "books".into(),
        }
    }

    #[test]
    fn indices_follow_sorted_ids() {
        let c = InteractionCorpus::from_records("books", &[rec("u2", "b", 5), rec("u1", "a", 3), rec("u2", "a", 1)]).unwrap();
        assert_eq!(c.users[0].id, "u1");
        assert_eq!(c.items, vec!["a", "b"]);
        assert_eq!(c.degree_index, vec![1, 2]);
        assert_eq!(c.events[0].user, 1);
        assert_eq!(c.events[0].item, 1);
    }

    #[test]
    fn rating_out_of_range_names_the_event() {
        let err = InteractionCorpus::from_records("books", &[rec("u", "a", 4), rec("u", "b", 6)]).unwrap_err();
        assert!(matches!(err, Error::RatingOutOfRange { index: 1, rating: 6 }));
    }

    #[test]
    fn pair_requires_identical_users() {
        let s = [rec("u1", "a", 4), rec("u2", "a", 4)];
        let mut t = vec![rec("u1", "x", 4)];
        for r in &mut t {
            r.domain = "movies".into();
        }
        assert!(InteractionCorpus::pair(("books", &s), ("movies", &t)).is_err());
        t.push(EventRecord { domain: "movies".into(), ..rec("u2", "y", 2) });
        assert!(InteractionCorpus::pair(("books", &s), ("movies", &t)).is_ok());
    }

    #[test]
    fn conflicting_regions_are_rejected() {
        let mut a = rec("u", "a", 4);
        a.region = Some("Beijing".into());
        let mut b = rec("u", "b", 4);
        b.region = Some("Shanghai".into());
        assert!(InteractionCorpus::from_records("books", &[a, b]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut r = rec("u1", "a", 4);
        r.review = Some("great pacing".into());
        r.region = Some("Beijing".into());
        let records = vec![r, rec("u1", "b", 2)];
        InteractionCorpus::write_jsonl(&path, &records).unwrap();
        let back = InteractionCorpus::read_jsonl(&path).unwrap();
        assert_eq!(back[0], records[0]);
        let c = InteractionCorpus::load(&path).unwrap();
        assert_eq!(c.users[0].region.as_deref(), Some("Beijing"));
        assert_eq!(c.to_records()[0].review.as_deref(), Some("great pacing"));
    }
}
