//! Two-domain interaction corpus with planted confounders.
//!
//! Every user has a latent taste shared by both domains and three ternary
//! confounders. A confounder shifts the user's preference, adds a direct
//! user–item affinity term, and raises the number of interactions, so users
//! in the high-degree quartile carry a different confounder mix than the
//! rest. Reviews mention the planted variables in the same phrases as
//! [`planted_variables`](super::reviews::planted_variables).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal};
use serde::{Deserialize, Serialize};

use super::reviews::{planted_variables, PlantedVariable, Role};
use crate::data::EventRecord;
use crate::discovery::MockVariable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainConfig {
    pub num_users: usize,
    pub source_items: usize,
    pub target_items: usize,
    pub latent_dim: usize,
    pub base_degree: usize,
    /// Extra interactions per confounder at +1.
    pub confounder_degree: usize,
    /// Weight of the direct confounder–item affinity.
    pub confounder_affinity: f64,
    /// Weight of the confounders on the latent preference.
    pub confounder_shift: f64,
    /// Direct push of each confounder on the rating and on the mentioned preferences.
    pub confounder_rating: f64,
    /// Scale of the domain-specific preference component.
    pub specific_scale: f64,
    /// Scale of the Gumbel noise in item choice.
    pub choice_noise: f64,
    /// Probability that a review mentions a non-zero variable.
    pub mention_rate: f64,
}

impl Default for CrossDomainConfig {
    fn default() -> Self {
        Self {
            num_users: 300,
            source_items: 200,
            target_items: 200,
            latent_dim: 4,
            base_degree: 8,
            confounder_degree: 6,
            confounder_affinity: 1.0,
            confounder_shift: 0.8,
            confounder_rating: 2.0,
            specific_scale: 0.5,
            choice_noise: 1.0,
            mention_rate: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossDomainCorpus {
    pub source: Vec<EventRecord>,
    pub target: Vec<EventRecord>,
    pub variables: Vec<PlantedVariable>,
    /// Confounder values per user.
    pub confounders: Vec<Vec<i8>>,
}

impl CrossDomainCorpus {
    pub fn kb(&self) -> Vec<MockVariable> {
        self.variables.iter().map(|p| p.variable.clone()).collect()
    }
}

struct Domain {
    name: &'static str,
    prefix: &'static str,
    items: Vec<Vec<f64>>,
    traits: Vec<Vec<i8>>,
}

const FILLER: &[&str] = &[
    "Came recommended.",
    "Took a while to finish.",
    "Would mention it to friends.",
    "Good value overall.",
    "Not what I expected at first.",
    "Returned to it twice.",
];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sentence(v: &MockVariable, value: i8) -> Option<String> {
    match value {
        1 => Some(format!("It was {}.", v.positive[0])),
        -1 => Some(format!("It was {}.", v.negative[0])),
        _ => None,
    }
}

fn sign3(x: f64) -> i8 {
    if x > 0.5 {
        1
    } else if x < -0.5 {
        -1
    } else {
        0
    }
}

/// Generates the source ("movies") and target ("books") event lists.
pub fn cross_domain(config: &CrossDomainConfig, seed: u64) -> CrossDomainCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("positive std");
    let gumbel = Gumbel::new(0.0, config.choice_noise.max(1e-9)).expect("positive scale");
    let variables = planted_variables();
    let idx = |role: Role| -> Vec<usize> { (0..variables.len()).filter(|&i| variables[i].role == role).collect() };
    let conf = idx(Role::Confounder);
    let pref = idx(Role::Preference);
    let noise = idx(Role::Noise);
    let r = config.latent_dim;
    let levels = [-1i8, 0, 1];

    let normal_vec = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| unit.sample(rng)).collect() };
    let shift: Vec<Vec<f64>> = (0..conf.len()).map(|_| normal_vec(r, &mut rng)).collect();
    let taste: Vec<Vec<f64>> = (0..config.num_users).map(|_| normal_vec(r, &mut rng)).collect();
    let confounders: Vec<Vec<i8>> = (0..config.num_users)
        .map(|_| conf.iter().map(|_| *levels.choose(&mut rng).expect("non-empty")).collect())
        .collect();

    let mut domains = Vec::new();
    for (name, prefix, n) in [("movies", "m", config.source_items), ("books", "b", config.target_items)] {
        let items = (0..n).map(|_| normal_vec(r, &mut rng)).collect();
        let traits = (0..n)
            .map(|_| conf.iter().map(|_| *levels.choose(&mut rng).expect("non-empty")).collect())
            .collect();
        domains.push(Domain { name, prefix, items, traits });
    }

    let mut out: Vec<Vec<EventRecord>> = Vec::new();
    for d in &domains {
        let mut events = Vec::new();
        let mut utilities = Vec::new();
        let mut mentions = Vec::new();
        for u in 0..config.num_users {
            let c = &confounders[u];
            let mut p = taste[u].clone();
            for (j, s) in shift.iter().enumerate() {
                for (pi, si) in p.iter_mut().zip(s) {
                    *pi += config.confounder_shift * c[j] as f64 * si;
                }
            }
            for pi in p.iter_mut() {
                *pi += config.specific_scale * unit.sample(&mut rng);
            }
            let positives = c.iter().filter(|&&v| v == 1).count();
            let degree = (config.base_degree + config.confounder_degree * positives + rng.random_range(0..3))
                .min(d.items.len().saturating_sub(100).max(1));
            let utility = |i: usize| -> f64 {
                let affinity: f64 = c.iter().zip(&d.traits[i]).map(|(&a, &b)| (a * b) as f64).sum();
                dot(&p, &d.items[i]) + config.confounder_affinity * affinity
            };
            let mut ranked: Vec<(f64, usize)> =
                (0..d.items.len()).map(|i| (utility(i) + gumbel.sample(&mut rng), i)).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(_, i) in ranked.iter().take(degree) {
                events.push((u, i));
                let push = config.confounder_rating * c.iter().map(|&v| v as f64).sum::<f64>();
                utilities.push(utility(i) + push + 0.5 * unit.sample(&mut rng));
                let match_score = dot(&p, &d.items[i]) / (r as f64).sqrt() + push;
                let mut values = vec![0i8; variables.len()];
                for (j, &ci) in conf.iter().enumerate() {
                    values[ci] = c[j];
                }
                for &pi in &pref {
                    values[pi] = sign3(match_score + 0.5 * unit.sample(&mut rng));
                }
                for &ni in &noise {
                    values[ni] = *levels.choose(&mut rng).expect("non-empty");
                }
                mentions.push(values);
            }
        }
        let mut sorted = utilities.clone();
        sorted.sort_by(f64::total_cmp);
        let cut = |q: f64| sorted[((sorted.len() as f64 * q) as usize).min(sorted.len() - 1)];
        let cuts = [cut(0.1), cut(0.2), cut(0.35), cut(0.6)];
        let mut records = Vec::with_capacity(events.len());
        for (((u, i), util), values) in events.into_iter().zip(&utilities).zip(&mentions) {
            let rating = 1 + cuts.iter().filter(|&&c| *util >= c).count() as i64;
            let mut parts = vec![FILLER.choose(&mut rng).expect("non-empty").to_string()];
            for (v, &val) in variables.iter().zip(values) {
                if rng.random_bool(config.mention_rate) {
                    if let Some(s) = sentence(&v.variable, val) {
                        parts.push(s);
                    }
                }
            }
            records.push(EventRecord {
                user: format!("u{u:05}"),
                item: format!("{}{i:05}", d.prefix),
                rating,
                review: Some(parts.join(" ")),
                region: None,
                domain: d.name.to_string(),
            });
        }
        out.push(records);
    }
    let target = out.pop().expect("two domains");
    let source = out.pop().expect("two domains");
    CrossDomainCorpus {
        source,
        target,
        variables,
        confounders,
    }
}
