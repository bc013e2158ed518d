//! Text-in/text-out language-model port, a replay adapter and a
//! keyword-driven mock.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompts::{self, Task};
use crate::error::{Error, Result};

pub trait LlmPort: Send + Sync {
    fn model_name(&self) -> &str;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String>;
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One line of a replay log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub round: usize,
    pub step: String,
    pub prompt_hash: String,
    pub prompt: String,
    pub reply: String,
}

impl ReplayRecord {
    pub fn new(round: usize, step: &str, prompt: &str, reply: &str) -> Self {
        Self {
            round,
            step: step.to_string(),
            prompt_hash: prompt_hash(prompt),
            prompt: prompt.to_string(),
            reply: reply.to_string(),
        }
    }
}

pub fn write_replay_log(path: &Path, records: &[ReplayRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_replay_log(path: &Path) -> Result<Vec<ReplayRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Answers from a recorded log, keyed by prompt hash.
#[derive(Debug, Clone)]
pub struct ReplayLlm {
    model: String,
    replies: HashMap<String, String>,
}

impl ReplayLlm {
    pub fn new(records: &[ReplayRecord]) -> Self {
        let replies = records
            .iter()
            .map(|r| (r.prompt_hash.clone(), r.reply.clone()))
            .collect();
        Self {
            model: "replay".into(),
            replies,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(Self::new(&read_replay_log(path)?))
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl LlmPort for ReplayLlm {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String> {
        let hash = prompt_hash(prompt);
        self.replies
            .get(&hash)
            .cloned()
            .ok_or_else(|| Error::Llm(format!("no recorded reply for prompt {hash}")))
    }
}

/// Whether a variable acts on the interaction only through preference (A)
/// or also directly (B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockVariable {
    pub name: String,
    pub criterion: String,
    pub description: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub category: Category,
}

impl MockVariable {
    /// 1, -1 or 0 by keyword match on the lowercased text.
    pub fn annotate(&self, text: &str) -> i8 {
        let lower = text.to_lowercase();
        if self.positive.iter().any(|k| lower.contains(k.as_str())) {
            1
        } else if self.negative.iter().any(|k| lower.contains(k.as_str())) {
            -1
        } else {
            0
        }
    }

    pub fn mentioned_in(&self, text: &str) -> bool {
        self.annotate(text) != 0
    }
}

/// Deterministic stand-in for a chat model, answering each prompt kind from
/// a fixed knowledge base of variables.
#[derive(Debug, Clone)]
pub struct MockLlm {
    pub kb: Vec<MockVariable>,
}

impl MockLlm {
    pub fn new(kb: Vec<MockVariable>) -> Self {
        Self { kb }
    }

    fn find(&self, name: &str) -> Option<&MockVariable> {
        let key = super::normalize_name(name);
        self.kb.iter().find(|v| super::normalize_name(&v.name) == key)
    }

    fn confounder_entry(v: &MockVariable) -> serde_json::Value {
        serde_json::json!({
            "name": v.name,
            "description": v.description,
            "reasoning": format!(
                "{} shapes what the user looks for and also moves the interaction on its own",
                v.name
            ),
        })
    }

    fn reply(&self, prompt: &str) -> String {
        let sections = prompts::parse_sections(prompt);
        let section = |name: &str| sections.get(name).map(String::as_str).unwrap_or("");
        match prompts::task_of(prompt) {
            Some(Task::Propose) => {
                let known: Vec<String> = prompts::list_items(section(prompts::KNOWN))
                    .iter()
                    .map(|s| super::normalize_name(s))
                    .collect();
                let reviews = sections
                    .iter()
                    .filter(|(k, _)| k.starts_with(prompts::REVIEWS))
                    .map(|(_, v)| v.as_str())
                    .collect::<Vec<_>>()
                    .join("\n");
                let out: Vec<serde_json::Value> = self
                    .kb
                    .iter()
                    .filter(|v| !known.contains(&super::normalize_name(&v.name)) && v.mentioned_in(&reviews))
                    .map(|v| serde_json::json!({"name": v.name, "criterion": v.criterion}))
                    .collect();
                serde_json::to_string(&out).expect("json values serialise")
            }
            Some(Task::Annotate) => {
                let name = section(prompts::VARIABLE).trim();
                let review = section(prompts::REVIEW);
                self.find(name).map_or(0, |v| v.annotate(review)).to_string()
            }
            Some(Task::Extract) => {
                let pool: Vec<String> = prompts::list_items(section(prompts::POOL))
                    .iter()
                    .map(|s| super::normalize_name(s))
                    .collect();
                let out: Vec<serde_json::Value> = prompts::list_items(section(prompts::VARIABLES))
                    .iter()
                    .filter_map(|n| self.find(n))
                    .filter(|v| v.category == Category::B && !pool.contains(&super::normalize_name(&v.name)))
                    .map(Self::confounder_entry)
                    .collect();
                serde_json::to_string(&out).expect("json values serialise")
            }
            Some(Task::Direct) => {
                let reviews = section(prompts::REVIEWS);
                let out: Vec<serde_json::Value> = self
                    .kb
                    .iter()
                    .filter(|v| v.category == Category::B && v.mentioned_in(reviews))
                    .map(Self::confounder_entry)
                    .collect();
                serde_json::to_string(&out).expect("json values serialise")
            }
            None => String::new(),
        }
    }
}

impl LlmPort for MockLlm {
    fn model_name(&self) -> &str {
        "mock-keyword"
    }

    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String> {
        Ok(self.reply(prompt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, pos: &str, neg: &str, category: Category) -> MockVariable {
        MockVariable {
            name: name.into(),
            criterion: format!("1 if {pos}, -1 if {neg}"),
            description: format!("{name} of the purchase"),
            positive: vec![pos.into()],
            negative: vec![neg.into()],
            category,
        }
    }

    #[test]
    fn keyword_annotation() {
        let v = var("shipping speed praised", "fast shipping", "slow shipping", Category::A);
        assert_eq!(v.annotate("It mentions Fast shipping!"), 1);
        assert_eq!(v.annotate("slow shipping again"), -1);
        assert_eq!(v.annotate("nothing here"), 0);
    }

    #[test]
    fn replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let recs = vec![ReplayRecord::new(1, "propose", "hello", "[]"), ReplayRecord::new(1, "annotate", "x", "1")];
        write_replay_log(&path, &recs).unwrap();
        assert_eq!(read_replay_log(&path).unwrap(), recs);
        let llm = ReplayLlm::from_path(&path).unwrap();
        assert_eq!(llm.complete("x", 0.0).unwrap(), "1");
        assert!(matches!(llm.complete("y", 0.0), Err(Error::Llm(_))));
    }

    #[test]
    fn mock_is_deterministic_and_ignores_unknown_tasks() {
        let llm = MockLlm::new(vec![var("a", "p", "n", Category::B)]);
        assert_eq!(llm.complete("free text", 0.0).unwrap(), "");
        assert_eq!(llm.complete("x", 0.0).unwrap(), llm.complete("x", 0.0).unwrap());
    }
}
