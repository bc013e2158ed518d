//! The iterative discovery loop: propose, annotate, refine, extract,
//! feed back.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ci::{ci_filter, DiscreteData, DEFAULT_SIGNIFICANCE};
use super::fci::{fci, markov_blanket, FciConfig};
use super::llm::{LlmPort, ReplayRecord};
use super::normalize_name;
use super::prompts::{
    self, ExtractedConfounder, FewShot, PoolEntry, ProposalBlock, ProposedVariable, ReviewSample,
};
use crate::data::implicit::label_of;
use crate::data::InteractionCorpus;
use crate::error::{Error, Result};
use crate::numerics::{conditional_entropy, kmeans, DenseMatrix};

pub const TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub tau_max: usize,
    pub significance: f64,
    pub ci_cap: usize,
    pub per_group: usize,
    pub feedback_clusters: usize,
    pub feedback_samples: usize,
    pub max_users: usize,
    pub reviews_per_user: usize,
    pub parallelism: usize,
    pub entropy_tolerance: f64,
    /// Largest tolerated share of annotation replies outside {-1, 0, 1}.
    pub invalid_annotation_limit: f64,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            tau_max: 3,
            significance: DEFAULT_SIGNIFICANCE,
            ci_cap: 3,
            per_group: 3,
            feedback_clusters: 5,
            feedback_samples: 15,
            max_users: 1000,
            reviews_per_user: 5,
            parallelism: 8,
            entropy_tolerance: 0.05,
            invalid_annotation_limit: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRow {
    pub id: String,
    pub rating: i64,
    pub text: String,
    pub y: u8,
}

impl ReviewRow {
    fn sample(&self) -> ReviewSample {
        ReviewSample {
            rating: self.rating,
            text: self.text.clone(),
        }
    }
}

/// Up to `max_users` reviewing users, and up to `per_user` of each one's
/// reviews, sampled with a fixed seed and returned in corpus order.
pub fn collect_reviews(corpus: &InteractionCorpus, max_users: usize, per_user: usize, seed: u64) -> Result<Vec<ReviewRow>> {
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); corpus.num_users()];
    for (i, e) in corpus.events.iter().enumerate() {
        if e.review.as_deref().is_some_and(|r| !r.trim().is_empty()) {
            by_user[e.user].push(i);
        }
    }
    let reviewers: Vec<usize> = (0..by_user.len()).filter(|&u| !by_user[u].is_empty()).collect();
    if reviewers.is_empty() {
        return Err(Error::InvalidInput(format!("domain '{}' has no reviews", corpus.domain_name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users: Vec<usize> = reviewers.choose_multiple(&mut rng, max_users.min(reviewers.len())).copied().collect();
    users.sort_unstable();
    let mut picked = Vec::new();
    for u in users {
        let mut events: Vec<usize> = by_user[u].choose_multiple(&mut rng, per_user.min(by_user[u].len())).copied().collect();
        events.sort_unstable();
        picked.extend(events);
    }
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| {
            let e = &corpus.events[i];
            ReviewRow {
                id: format!("{}:{}", corpus.users[e.user].id, corpus.items[e.item]),
                rating: e.rating,
                text: e.review.clone().unwrap_or_default(),
                y: label_of(e.rating),
            }
        })
        .collect())
}

/// `per_group` reviews from each non-empty rating group 1..=5, as row indices.
pub fn sample_reviews(rows: &[ReviewRow], per_group: usize, seed: u64) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no reviews to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for rating in 1..=5 {
        let group: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].rating == rating).collect();
        let mut chosen: Vec<usize> = group.choose_multiple(&mut rng, per_group.min(group.len())).copied().collect();
        chosen.sort_unstable();
        out.extend(chosen);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalVariable {
    pub name: String,
    pub criterion: String,
    pub round_proposed: usize,
}

/// Review-by-variable annotations in {-1, 0, 1} plus the binary label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationMatrix {
    pub review_ids: Vec<String>,
    pub names: Vec<String>,
    /// Column-major: `q[j][i]` is review `i` against variable `j`.
    pub q: Vec<Vec<i8>>,
    pub y: Vec<u8>,
}

impl AnnotationMatrix {
    pub fn new(rows: &[ReviewRow]) -> Self {
        Self {
            review_ids: rows.iter().map(|r| r.id.clone()).collect(),
            names: Vec::new(),
            q: Vec::new(),
            y: rows.iter().map(|r| r.y).collect(),
        }
    }

    pub fn push_column(&mut self, name: &str, column: Vec<i8>) -> Result<()> {
        if column.len() != self.y.len() {
            return Err(Error::Shape(format!("{} annotations for {} reviews", column.len(), self.y.len())));
        }
        if column.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidInput(format!("annotation column '{name}' has a value outside {{-1, 0, 1}}")));
        }
        self.names.push(name.to_string());
        self.q.push(column);
        Ok(())
    }

    /// The chosen columns followed by y as the last column.
    pub fn discrete(&self, columns: &[usize]) -> Result<DiscreteData> {
        let cols: Vec<Vec<i8>> = columns.iter().map(|&c| self.q[c].clone()).collect();
        let mut data = DiscreteData::from_ternary(&cols)?;
        data.push_column(self.y.clone())?;
        Ok(data)
    }

    /// Rows of the chosen columns as values.
    pub fn rows_of(&self, columns: &[usize]) -> Vec<Vec<i8>> {
        (0..self.y.len()).map(|i| columns.iter().map(|&c| self.q[c][i]).collect()).collect()
    }
}

/// Routes calls to the model and records every exchange.
pub struct Session<'a> {
    llm: &'a dyn LlmPort,
    pub log: Vec<ReplayRecord>,
}

impl<'a> Session<'a> {
    pub fn new(llm: &'a dyn LlmPort) -> Self {
        Self { llm, log: Vec::new() }
    }

    pub fn call(&mut self, round: usize, step: &str, prompt: &str) -> Result<String> {
        let reply = self.llm.complete(prompt, TEMPERATURE)?;
        self.log.push(ReplayRecord::new(round, step, prompt, &reply));
        Ok(reply)
    }

    /// Asks for a JSON array, reprompting once with a format reminder.
    pub fn call_json<T: serde::de::DeserializeOwned>(&mut self, round: usize, step: &str, prompt: &str) -> Result<Vec<T>> {
        let reply = self.call(round, step, prompt)?;
        match prompts::parse_json_array(&reply) {
            Ok(v) => Ok(v),
            Err(first) => {
                log::warn!("round {round} {step}: unparseable reply, reprompting ({first})");
                let retry = prompts::with_format_reminder(prompt);
                let reply = self.call(round, step, &retry)?;
                prompts::parse_json_array(&reply)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    /// One column per variable.
    pub columns: Vec<Vec<i8>>,
    pub invalid: usize,
    pub calls: usize,
}

/// Annotates every review against every variable. Calls run on up to
/// `parallelism` threads; results and log records keep (review, variable)
/// order.
pub fn annotate_reviews(
    session: &mut Session<'_>,
    round: usize,
    rows: &[ReviewRow],
    variables: &[CausalVariable],
    parallelism: usize,
    invalid_limit: f64,
) -> Result<Annotations> {
    let jobs: Vec<(usize, usize)> = (0..rows.len())
        .flat_map(|i| (0..variables.len()).map(move |j| (i, j)))
        .collect();
    let prompts_all: Vec<String> = jobs
        .iter()
        .map(|&(i, j)| prompts::annotation_prompt(&variables[j].name, &variables[j].criterion, &rows[i].text))
        .collect();
    let llm = session.llm;
    let threads = parallelism.max(1);
    let chunk = prompts_all.len().div_ceil(threads).max(1);
    let replies: Vec<Result<String>> = std::thread::scope(|s| {
        let handles: Vec<_> = prompts_all
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|p| llm.complete(p, TEMPERATURE)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("annotation worker panicked"))
            .collect()
    });

    let mut columns = vec![vec![0i8; rows.len()]; variables.len()];
    let mut invalid = 0usize;
    for ((&(i, j), prompt), reply) in jobs.iter().zip(&prompts_all).zip(replies) {
        let reply = reply?;
        match prompts::parse_annotation(&reply) {
            Some(v) => columns[j][i] = v,
            None => invalid += 1,
        }
        session.log.push(ReplayRecord::new(round, "annotate", prompt, &reply));
    }
    let calls = jobs.len();
    if invalid > 0 {
        log::warn!("round {round}: {invalid} of {calls} annotation replies were invalid and read as 0");
    }
    if calls > 0 && invalid as f64 > invalid_limit * calls as f64 {
        return Err(Error::Llm(format!(
            "{invalid} of {calls} annotation replies were outside {{-1, 0, 1}}"
        )));
    }
    Ok(Annotations { columns, invalid, calls })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub clusters: usize,
    pub entropies: Vec<f64>,
    pub selected: usize,
    pub max_entropy: f64,
    /// Row indices of the feedback sample.
    pub samples: Vec<usize>,
}

/// Clusters reviews by their blanket annotations and samples from the
/// cluster whose label is least explained.
pub fn causal_feedback(
    q: &AnnotationMatrix,
    blanket: &[usize],
    clusters: usize,
    samples: usize,
    seed: u64,
) -> Result<Feedback> {
    let n = q.y.len();
    if n == 0 {
        return Err(Error::InvalidInput("causal feedback on zero reviews".into()));
    }
    let rows = q.rows_of(blanket);
    let assignments: Vec<usize> = if blanket.is_empty() {
        vec![0; n]
    } else {
        let mut k = clusters.max(1);
        if n < k {
            log::warn!("only {n} reviews; reducing feedback clusters from {k} to {n}");
            k = n;
        }
        let x = DenseMatrix::from_fn(n, blanket.len(), |i, j| rows[i][j] as f64);
        kmeans(&x, k, seed)?.assignments
    };
    let k = assignments.iter().max().map_or(1, |m| m + 1);
    let mut entropies = vec![0.0; k];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assignments.iter().enumerate() {
        members[c].push(i);
    }
    for c in 0..k {
        if members[c].is_empty() {
            continue;
        }
        let y: Vec<u8> = members[c].iter().map(|&i| q.y[i]).collect();
        let z: Vec<Vec<i8>> = members[c].iter().map(|&i| rows[i].clone()).collect();
        entropies[c] = conditional_entropy(&y, &z)?;
    }
    let mut selected = 0;
    for c in 1..k {
        if entropies[c] > entropies[selected] {
            selected = c;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut chosen: Vec<usize> = members[selected]
        .choose_multiple(&mut rng, samples.min(members[selected].len()))
        .copied()
        .collect();
    chosen.sort_unstable();
    Ok(Feedback {
        clusters: k,
        max_entropy: entropies[selected],
        entropies,
        selected,
        samples: chosen,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub proposed: Vec<String>,
    pub filtered: Vec<String>,
    pub blanket: Vec<String>,
    pub new_confounders: Vec<String>,
    pub max_entropy: f64,
    pub invalid_annotations: usize,
    pub degenerate_tests: usize,
}

#[derive(Debug, Clone)]
pub struct DiscoveryOutcome {
    pub pool: Vec<PoolEntry>,
    pub variables: Vec<CausalVariable>,
    pub annotations: AnnotationMatrix,
    pub rounds: Vec<RoundSummary>,
    pub replay: Vec<ReplayRecord>,
    pub converged: bool,
}

fn in_round<T>(round: usize, step: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Discovery {
        round,
        step: step.to_string(),
        source: Box::new(e),
    })
}

pub fn write_pool(path: &Path, pool: &[PoolEntry]) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(pool)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_pool(path: &Path) -> Result<Vec<PoolEntry>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

struct Loop<'a, 'b> {
    domain: &'a str,
    rows: &'a [ReviewRow],
    config: &'a DiscoveryConfig,
    session: Session<'b>,
    variables: Vec<CausalVariable>,
    q: AnnotationMatrix,
    pool: Vec<PoolEntry>,
    non_confounders: Vec<usize>,
    blocks: Vec<ProposalBlock>,
    rounds: Vec<RoundSummary>,
}

impl Loop<'_, '_> {
    fn known_names(&self) -> BTreeSet<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    fn propose(&mut self, round: usize) -> Result<Vec<CausalVariable>> {
        let known: Vec<String> = self.variables.iter().map(|v| v.name.clone()).collect();
        let prompt = prompts::proposal_prompt(self.domain, &self.blocks, &known);
        let reply: Vec<ProposedVariable> = self.session.call_json(round, "propose", &prompt)?;
        let mut seen = self.known_names();
        let mut fresh = Vec::new();
        for v in reply {
            let name = normalize_name(&v.name);
            if name.is_empty() || !seen.insert(name.clone()) {
                continue;
            }
            fresh.push(CausalVariable {
                name,
                criterion: v.criterion.trim().to_string(),
                round_proposed: round,
            });
        }
        Ok(fresh)
    }

    fn refine(&self) -> Result<(Vec<usize>, Vec<usize>, usize)> {
        if self.q.q.is_empty() {
            return Ok((Vec::new(), Vec::new(), 0));
        }
        let all: Vec<usize> = (0..self.q.q.len()).collect();
        let data = self.q.discrete(&all)?;
        let target = all.len();
        let filtered = ci_filter(&data, &all, target, self.config.significance, self.config.ci_cap)?.kept;
        if filtered.is_empty() {
            return Ok((filtered, Vec::new(), 0));
        }
        let mut columns = filtered.clone();
        columns.push(target);
        let config = FciConfig {
            significance: self.config.significance,
            max_depth: None,
        };
        let result = fci(&data, &columns, &config);
        let y_node = columns.len() - 1;
        let blanket = markov_blanket(&result.pag, y_node).into_iter().map(|n| columns[n]).collect();
        Ok((filtered, blanket, result.degenerate_tests))
    }

    fn extract(&mut self, round: usize, blanket: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
        if blanket.is_empty() {
            return Ok(Vec::new());
        }
        let mb: Vec<(String, String)> = blanket
            .iter()
            .map(|&j| (self.variables[j].name.clone(), self.variables[j].criterion.clone()))
            .collect();
        let pool_names: Vec<String> = self.pool.iter().map(|p| p.name.clone()).collect();
        let examples = match self.pool.first() {
            None => None,
            Some(positive) => {
                let mut negatives = self.non_confounders.clone();
                if negatives.is_empty() {
                    negatives = (0..self.variables.len())
                        .filter(|&j| !pool_names.contains(&self.variables[j].name))
                        .collect();
                }
                negatives.choose(rng).map(|&j| FewShot {
                    positive: positive.clone(),
                    negative: (self.variables[j].name.clone(), self.variables[j].criterion.clone()),
                })
            }
        };
        let prompt = prompts::extraction_prompt(self.domain, &mb, &pool_names, examples.as_ref());
        let reply: Vec<ExtractedConfounder> = self.session.call_json(round, "extract", &prompt)?;
        let mut names: BTreeSet<String> = pool_names.into_iter().collect();
        let mut added = Vec::new();
        for c in reply {
            let name = normalize_name(&c.name);
            if name.is_empty() || !names.insert(name.clone()) {
                continue;
            }
            self.pool.push(PoolEntry {
                name: name.clone(),
                description: c.description.trim().to_string(),
                reasoning: c.reasoning.trim().to_string(),
                round,
            });
            added.push(name);
        }
        let pool_now: BTreeSet<&str> = self.pool.iter().map(|p| p.name.as_str()).collect();
        for &j in blanket {
            if !pool_now.contains(self.variables[j].name.as_str()) && !self.non_confounders.contains(&j) {
                self.non_confounders.push(j);
            }
        }
        Ok(added)
    }
}

/// Runs up to `tau_max` rounds over the given reviews. The confounder pool
/// is written to `pool_path` after every round and on failure.
pub fn run_discovery(
    domain: &str,
    rows: &[ReviewRow],
    llm: &dyn LlmPort,
    config: &DiscoveryConfig,
    pool_path: Option<&Path>,
) -> Result<DiscoveryOutcome> {
    if config.tau_max == 0 {
        return Err(Error::InvalidInput("tau_max must be at least 1".into()));
    }
    let mut state = Loop {
        domain,
        rows,
        config,
        session: Session::new(llm),
        variables: Vec::new(),
        q: AnnotationMatrix::new(rows),
        pool: Vec::new(),
        non_confounders: Vec::new(),
        blocks: Vec::new(),
        rounds: Vec::new(),
    };
    let result = discovery_rounds(&mut state);
    if let Some(path) = pool_path {
        write_pool(path, &state.pool)?;
    }
    let converged = result?;
    Ok(DiscoveryOutcome {
        pool: state.pool,
        variables: state.variables,
        annotations: state.q,
        rounds: state.rounds,
        replay: state.session.log,
        converged,
    })
}

fn discovery_rounds(state: &mut Loop<'_, '_>) -> Result<bool> {
    let config = *state.config;
    let first = in_round(1, "sample", sample_reviews(state.rows, config.per_group, config.seed))?;
    state.blocks.push(ProposalBlock {
        round: 1,
        reviews: first.iter().map(|&i| state.rows[i].sample()).collect(),
        blanket: None,
    });
    let mut previous_blanket: Option<Vec<usize>> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    for round in 1..=config.tau_max {
        let fresh = in_round(round, "propose", state.propose(round))?;
        let ann = in_round(
            round,
            "annotate",
            annotate_reviews(
                &mut state.session,
                round,
                state.rows,
                &fresh,
                config.parallelism,
                config.invalid_annotation_limit,
            ),
        )?;
        for (v, col) in fresh.iter().zip(ann.columns) {
            in_round(round, "annotate", state.q.push_column(&v.name, col))?;
        }
        state.variables.extend(fresh.iter().cloned());

        let (filtered, blanket, degenerate) = in_round(round, "refine", state.refine())?;
        let added = in_round(round, "extract", state.extract(round, &blanket, &mut rng))?;

        let seed = config.seed.wrapping_add(1000 * round as u64);
        let fb = in_round(
            round,
            "feedback",
            causal_feedback(&state.q, &blanket, config.feedback_clusters, config.feedback_samples, seed),
        )?;
        let names = |idx: &[usize]| idx.iter().map(|&j| state.variables[j].name.clone()).collect::<Vec<_>>();
        state.rounds.push(RoundSummary {
            round,
            proposed: fresh.iter().map(|v| v.name.clone()).collect(),
            filtered: names(&filtered),
            blanket: names(&blanket),
            new_confounders: added,
            max_entropy: fb.max_entropy,
            invalid_annotations: ann.invalid,
            degenerate_tests: degenerate,
        });
        log::info!(
            "round {round}: {} proposed, {} filtered, blanket {:?}, pool size {}, max entropy {:.4}",
            fresh.len(),
            filtered.len(),
            names(&blanket),
            state.pool.len(),
            fb.max_entropy
        );
        let stable = previous_blanket.as_ref() == Some(&blanket);
        if stable || fb.max_entropy < config.entropy_tolerance {
            return Ok(true);
        }
        state.blocks.push(ProposalBlock {
            round: round + 1,
            reviews: fb.samples.iter().map(|&i| state.rows[i].sample()).collect(),
            blanket: Some(names(&blanket)),
        });
        previous_blanket = Some(blanket);
    }
    Ok(false)
}

/// Single-shot confounder extraction straight from sampled reviews.
pub fn direct_extraction(
    domain: &str,
    rows: &[ReviewRow],
    llm: &dyn LlmPort,
    config: &DiscoveryConfig,
) -> Result<(Vec<PoolEntry>, Vec<ReplayRecord>)> {
    let sample = sample_reviews(rows, config.per_group, config.seed)?;
    let reviews: Vec<ReviewSample> = sample.iter().map(|&i| rows[i].sample()).collect();
    let mut session = Session::new(llm);
    let prompt = prompts::direct_prompt(domain, &reviews);
    let reply: Vec<ExtractedConfounder> = session.call_json(1, "direct", &prompt)?;
    let mut seen = BTreeSet::new();
    let mut pool = Vec::new();
    for c in reply {
        let name = normalize_name(&c.name);
        if !name.is_empty() && seen.insert(name.clone()) {
            pool.push(PoolEntry {
                name,
                description: c.description.trim().to_string(),
                reasoning: c.reasoning.trim().to_string(),
                round: 1,
            });
        }
    }
    Ok((pool, session.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::llm::{Category, MockLlm, MockVariable};

    fn row(i: usize, rating: i64, text: &str) -> ReviewRow {
        ReviewRow {
            id: format!("r{i}"),
            rating,
            text: text.into(),
            y: label_of(rating),
        }
    }

    #[test]
    fn sampling_per_rating_group() {
        let rows: Vec<ReviewRow> = (0..50).map(|i| row(i, (i % 5) as i64 + 1, "x")).collect();
        let s = sample_reviews(&rows, 3, 7).unwrap();
        assert_eq!(s.len(), 15);
        assert_eq!(s, sample_reviews(&rows, 3, 7).unwrap());
        let no_two: Vec<ReviewRow> = rows.iter().filter(|r| r.rating != 2).cloned().collect();
        assert_eq!(sample_reviews(&no_two, 3, 7).unwrap().len(), 12);
        assert!(sample_reviews(&[], 3, 7).is_err());
    }

    #[test]
    fn feedback_picks_the_uncertain_cluster() {
        // column separates two groups; y is pure in the first and mixed in the second
        let mut q = AnnotationMatrix::new(&[]);
        let z: Vec<i8> = (0..40).map(|i| if i < 20 { 1 } else { -1 }).collect();
        q.y = (0..40).map(|i| if i < 20 { 1 } else { (i % 2) as u8 }).collect();
        q.review_ids = (0..40).map(|i| i.to_string()).collect();
        q.push_column("z", z).unwrap();
        let fb = causal_feedback(&q, &[0], 2, 15, 0).unwrap();
        assert_eq!(fb.clusters, 2);
        let mixed = fb.entropies.iter().cloned().fold(0.0, f64::max);
        assert!((mixed - 1.0).abs() < 1e-12);
        assert_eq!(fb.max_entropy, mixed);
        assert!(fb.samples.iter().all(|&i| i >= 20));
        assert_eq!(fb.samples.len(), 15);

        let empty = causal_feedback(&q, &[], 5, 15, 0).unwrap();
        assert_eq!(empty.clusters, 1);
        assert!((empty.max_entropy - conditional_entropy(&q.y, &vec![vec![]; 40]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn annotation_order_is_independent_of_parallelism() {
        let kb = vec![MockVariable {
            name: "speed".into(),
            criterion: "1 if fast shipping".into(),
            description: String::new(),
            positive: vec!["fast".into()],
            negative: vec!["slow".into()],
            category: Category::A,
        }];
        let llm = MockLlm::new(kb.clone());
        let rows: Vec<ReviewRow> = (0..30)
            .map(|i| row(i, 5, ["fast", "slow", "meh"][i % 3]))
            .collect();
        let vars = vec![CausalVariable {
            name: "speed".into(),
            criterion: kb[0].criterion.clone(),
            round_proposed: 1,
        }];
        let mut s1 = Session::new(&llm);
        let a1 = annotate_reviews(&mut s1, 1, &rows, &vars, 1, 0.05).unwrap();
        let mut s2 = Session::new(&llm);
        let a2 = annotate_reviews(&mut s2, 1, &rows, &vars, 7, 0.05).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(s1.log, s2.log);
        assert_eq!(&a1.columns[0][..3], &[1, -1, 0]);
    }

    struct Garbage;
    impl LlmPort for Garbage {
        fn model_name(&self) -> &str {
            "garbage"
        }
        fn complete(&self, _: &str, _: f64) -> Result<String> {
            Ok("maybe".into())
        }
    }

    #[test]
    fn invalid_annotations_over_limit_fail_and_bad_json_fails_after_retry() {
        let rows = vec![row(0, 5, "x")];
        let vars = vec![CausalVariable {
            name: "v".into(),
            criterion: String::new(),
            round_proposed: 1,
        }];
        let mut s = Session::new(&Garbage);
        assert!(annotate_reviews(&mut s, 1, &rows, &vars, 2, 0.05).is_err());
        let mut s = Session::new(&Garbage);
        let r: Result<Vec<ProposedVariable>> = s.call_json(1, "propose", "p");
        assert!(matches!(r, Err(Error::LlmParse { .. })));
        assert_eq!(s.log.len(), 2);
    }

    #[test]
    fn discovery_errors_name_round_and_step() {
        let rows: Vec<ReviewRow> = (0..10).map(|i| row(i, 5, "x")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.json");
        let err = run_discovery("books", &rows, &Garbage, &DiscoveryConfig::default(), Some(&path)).unwrap_err();
        assert!(matches!(err, Error::Discovery { round: 1, ref step, .. } if step == "propose"));
        assert!(read_pool(&path).unwrap().is_empty());
    }
}
