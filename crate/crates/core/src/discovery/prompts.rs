//! Prompt rendering and reply parsing.
//!
//! Every prompt starts with a `### task: <kind>` line followed by `## <name>`
//! sections, so replies can be replayed and the mock can read its inputs.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TASK_PREFIX: &str = "### task: ";
pub const REVIEWS: &str = "reviews";
pub const REVIEW: &str = "review";
pub const KNOWN: &str = "known variables";
pub const VARIABLE: &str = "variable";
pub const CRITERION: &str = "criterion";
pub const VARIABLES: &str = "variables";
pub const POOL: &str = "confounder pool";
pub const EXAMPLES: &str = "examples";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Propose,
    Annotate,
    Extract,
    Direct,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Propose => "propose",
            Task::Annotate => "annotate",
            Task::Extract => "extract",
            Task::Direct => "direct",
        }
    }
}

pub fn task_of(prompt: &str) -> Option<Task> {
    let first = prompt.lines().next()?;
    match first.strip_prefix(TASK_PREFIX)?.trim() {
        "propose" => Some(Task::Propose),
        "annotate" => Some(Task::Annotate),
        "extract" => Some(Task::Extract),
        "direct" => Some(Task::Direct),
        _ => None,
    }
}

/// Section name to body.
pub fn parse_sections(prompt: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut current: Option<(String, String)> = None;
    for line in prompt.lines() {
        if let Some(name) = line.strip_prefix("## ") {
            if let Some((k, v)) = current.take() {
                out.insert(k, v);
            }
            current = Some((name.trim().to_string(), String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some((k, v)) = current {
        out.insert(k, v);
    }
    out
}

/// Texts of the `- item` lines of a section body.
pub fn list_items(body: &str) -> Vec<String> {
    body.lines()
        .filter_map(|l| l.strip_prefix("- "))
        .map(|s| s.trim().to_string())
        .collect()
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewSample {
    pub rating: i64,
    pub text: String,
}

/// One block of review samples in a proposal prompt. Blocks after the first
/// come from causal feedback and carry the blanket names to move beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalBlock {
    pub round: usize,
    pub reviews: Vec<ReviewSample>,
    pub blanket: Option<Vec<String>>,
}

fn push_reviews(out: &mut String, reviews: &[ReviewSample]) {
    for (i, r) in reviews.iter().enumerate() {
        out.push_str(&format!("[{}] rating {}: {}\n", i + 1, r.rating, one_line(&r.text)));
    }
}

fn push_list(out: &mut String, items: &[String]) {
    if items.is_empty() {
        out.push_str("(none)\n");
    }
    for item in items {
        out.push_str(&format!("- {}\n", one_line(item)));
    }
}

pub fn proposal_prompt(domain: &str, blocks: &[ProposalBlock], known: &[String]) -> String {
    let mut out = format!("{TASK_PREFIX}{}\n", Task::Propose.as_str());
    out.push_str(&format!(
        "You study user reviews from the {domain} domain. Find variables that explain why a user \
         does or does not like an item.\n"
    ));
    for b in blocks {
        out.push_str(&format!("## {REVIEWS} round {}\n", b.round));
        if let Some(mb) = &b.blanket {
            out.push_str(
                "The variables below do not yet explain these reviews. Suggest variables that are not among them:\n",
            );
            for name in mb {
                out.push_str(&format!("* {}\n", one_line(name)));
            }
        }
        push_reviews(&mut out, &b.reviews);
    }
    out.push_str(&format!("## {KNOWN}\n"));
    push_list(&mut out, known);
    out.push_str(
        "## instructions\n\
         Propose new variables that are not in the known list. For each give a short name and a \
         criterion saying when a review counts as positive (1), negative (-1), or neither (0).\n\
         ## output\n\
         Reply with a JSON array only, for example [{\"name\": \"...\", \"criterion\": \"...\"}].\n",
    );
    out
}

pub fn annotation_prompt(name: &str, criterion: &str, review: &str) -> String {
    format!(
        "{TASK_PREFIX}{}\n## {VARIABLE}\n{}\n## {CRITERION}\n{}\n## {REVIEW}\n{}\n## output\n\
         Answer with one number: 1 if the review is positive for the variable, -1 if negative, \
         0 otherwise or if it is not mentioned.\n",
        Task::Annotate.as_str(),
        one_line(name),
        one_line(criterion),
        one_line(review)
    )
}

/// Confounder pool entry as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub name: String,
    pub description: String,
    pub reasoning: String,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedConfounder {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedVariable {
    pub name: String,
    #[serde(default)]
    pub criterion: String,
}

/// One positive and one negative example for few-shot extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShot {
    pub positive: PoolEntry,
    pub negative: (String, String),
}

const CATEGORY_GUIDE: &str = "Sort each variable into one of two groups.\n\
(a) It describes what the user prefers and changes the interaction only through that preference. \
It is not a confounder.\n\
(b) It changes the interaction directly and also changes the user's preference, so it acts on the \
interaction along both routes. It is a confounder.\n";

pub fn extraction_prompt(
    domain: &str,
    blanket: &[(String, String)],
    pool: &[String],
    examples: Option<&FewShot>,
) -> String {
    let mut out = format!("{TASK_PREFIX}{}\n", Task::Extract.as_str());
    out.push_str(&format!(
        "These variables, drawn from {domain} reviews, are the ones most directly tied to whether \
         a user interacts with an item.\n## {VARIABLES}\n"
    ));
    for (name, criterion) in blanket {
        out.push_str(&format!("- {}\n  criterion: {}\n", one_line(name), one_line(criterion)));
    }
    out.push_str("## instructions\n");
    out.push_str(CATEGORY_GUIDE);
    if let Some(ex) = examples {
        out.push_str(&format!(
            "## {EXAMPLES}\n\
             Confounder: {}\n  description: {}\n  reasoning: {}\n\
             Not a confounder: {}\n  criterion: {}\n",
            one_line(&ex.positive.name),
            one_line(&ex.positive.description),
            one_line(&ex.positive.reasoning),
            one_line(&ex.negative.0),
            one_line(&ex.negative.1)
        ));
    }
    out.push_str(&format!("## {POOL}\n"));
    push_list(&mut out, pool);
    out.push_str(
        "## output\n\
         List only the group (b) variables that are not already in the confounder pool, as a JSON \
         array: [{\"name\": \"...\", \"description\": \"...\", \"reasoning\": \"...\"}].\n",
    );
    out
}

pub fn direct_prompt(domain: &str, reviews: &[ReviewSample]) -> String {
    let mut out = format!("{TASK_PREFIX}{}\n", Task::Direct.as_str());
    out.push_str(&format!("Below are user reviews from the {domain} domain.\n## {REVIEWS}\n"));
    push_reviews(&mut out, reviews);
    out.push_str("## instructions\n");
    out.push_str(CATEGORY_GUIDE);
    out.push_str(
        "## output\n\
         List the group (b) variables you can read from these reviews as a JSON array: \
         [{\"name\": \"...\", \"description\": \"...\", \"reasoning\": \"...\"}].\n",
    );
    out
}

pub fn with_format_reminder(prompt: &str) -> String {
    format!(
        "{prompt}## format reminder\nThe previous reply could not be parsed. Reply with the JSON array only, \
         with no other text.\n"
    )
}

/// Parses the JSON array spanning the first `[` to the last `]`.
pub fn parse_json_array<T: DeserializeOwned>(reply: &str) -> Result<Vec<T>> {
    let fail = |reason: String| Error::LlmParse {
        reason,
        raw: reply.to_string(),
    };
    let start = reply.find('[').ok_or_else(|| fail("no JSON array".into()))?;
    let end = reply.rfind(']').ok_or_else(|| fail("no JSON array".into()))?;
    if end < start {
        return Err(fail("no JSON array".into()));
    }
    serde_json::from_str(&reply[start..=end]).map_err(|e| fail(e.to_string()))
}

/// Reads an annotation reply; `None` when it is not one of -1, 0, 1.
pub fn parse_annotation(reply: &str) -> Option<i8> {
    let token = reply.split_whitespace().next()?;
    let token = token.trim_matches(|c: char| !(c.is_ascii_digit() || c == '-'));
    match token.parse::<i8>() {
        Ok(v) if (-1..=1).contains(&v) => Some(v),
        _ => None,
    }
}
