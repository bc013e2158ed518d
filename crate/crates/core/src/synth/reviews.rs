//! Review corpus with planted variables of known causal role.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::EventRecord;
use crate::discovery::{Category, MockVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Drives preference and the rating.
    Confounder,
    /// Drives the rating only.
    Preference,
    /// Mentioned in reviews but unrelated to everything else.
    Noise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedVariable {
    pub variable: MockVariable,
    pub role: Role,
}

fn planted(name: &str, description: &str, pos: &str, neg: &str, category: Category, role: Role) -> PlantedVariable {
    PlantedVariable {
        variable: MockVariable {
            name: name.into(),
            criterion: format!("1 if the review says \"{pos}\", -1 if it says \"{neg}\", 0 otherwise"),
            description: description.into(),
            positive: vec![pos.into()],
            negative: vec![neg.into()],
            category,
        },
        role,
    }
}

/// The eight planted variables: three confounders, three preference
/// variables and two noise variables. The noise variables carry category B
/// so only the statistical refinement keeps them out of the pool.
pub fn planted_variables() -> Vec<PlantedVariable> {
    vec![
        planted("discount", "whether the item was bought at a reduced price", "on sale", "full price", Category::B, Role::Confounder),
        planted("brand reputation", "how well known and trusted the publisher is", "trusted publisher", "unknown publisher", Category::B, Role::Confounder),
        planted("gift purchase", "whether the item was bought for someone else", "bought as a gift", "bought for myself", Category::B, Role::Confounder),
        planted("plot quality", "how engaging the story is", "gripping plot", "dull plot", Category::A, Role::Preference),
        planted("writing style", "the quality of the prose", "elegant prose", "clumsy prose", Category::A, Role::Preference),
        planted("character depth", "how developed the characters are", "rich characters", "flat characters", Category::A, Role::Preference),
        planted("weather", "the weather on the day of reading", "sunny afternoon", "rainy afternoon", Category::B, Role::Noise),
        planted("reading place", "where the book was read", "on the train", "on the sofa", Category::B, Role::Noise),
    ]
}

/// Knowledge base for the mock model.
pub fn default_kb() -> Vec<MockVariable> {
    planted_variables().into_iter().map(|p| p.variable).collect()
}

const FILLER: &[&str] = &[
    "Arrived in good shape.",
    "Finished it over a week.",
    "Picked it up after a recommendation.",
    "The cover is nice.",
    "Took a while to get into.",
    "Would talk about it with friends.",
    "Read it in two sittings.",
    "The edition is compact.",
];

fn phrase(v: &MockVariable, value: i8) -> Option<String> {
    match value {
        1 => Some(format!("It was {}.", v.positive[0])),
        -1 => Some(format!("It was {}.", v.negative[0])),
        _ => None,
    }
}

fn ternary(s: f64) -> i8 {
    if s > 0.5 {
        1
    } else if s < -0.5 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub records: Vec<EventRecord>,
    pub variables: Vec<PlantedVariable>,
    /// Latent values per record, in variable order.
    pub values: Vec<Vec<i8>>,
}

impl PlantedCorpus {
    pub fn names(&self, role: Role) -> Vec<String> {
        self.variables
            .iter()
            .filter(|p| p.role == role)
            .map(|p| p.variable.name.clone())
            .collect()
    }

    pub fn kb(&self) -> Vec<MockVariable> {
        self.variables.iter().map(|p| p.variable.clone()).collect()
    }
}

/// Generates `num_users * reviews_per_user` reviewed ratings. Each
/// confounder pushes every preference variable and the rating; preferences
/// push the rating; noise variables are drawn independently. Ratings are the
/// quintiles of the latent score.
pub fn planted_reviews(domain: &str, num_users: usize, reviews_per_user: usize, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variables = planted_variables();
    let conf: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].role == Role::Confounder).collect();
    let pref: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].role == Role::Preference).collect();
    let noise_vars: Vec<usize> = (0..variables.len()).filter(|&i| variables[i].role == Role::Noise).collect();
    let unit = Normal::new(0.0, 1.0).expect("positive std");
    let levels = [-1i8, 0, 1];

    let mut values = Vec::new();
    let mut scores = Vec::new();
    let mut owners = Vec::new();
    for u in 0..num_users {
        for _ in 0..reviews_per_user {
            let mut v = vec![0i8; variables.len()];
            for &c in &conf {
                v[c] = *levels.choose(&mut rng).expect("non-empty");
            }
            for &p in &pref {
                let s: f64 = conf.iter().map(|&c| 0.5 * v[c] as f64).sum::<f64>() + 0.7 * unit.sample(&mut rng);
                v[p] = ternary(s);
            }
            for &n in &noise_vars {
                v[n] = *levels.choose(&mut rng).expect("non-empty");
            }
            let score: f64 = conf.iter().chain(&pref).map(|&i| 0.8 * v[i] as f64).sum::<f64>() + 0.8 * unit.sample(&mut rng);
            values.push(v);
            scores.push(score);
            owners.push(u);
        }
    }
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = |q: f64| sorted[((sorted.len() as f64 * q) as usize).min(sorted.len() - 1)];
    let cuts = [cut(0.2), cut(0.4), cut(0.6), cut(0.8)];

    let mut records = Vec::with_capacity(values.len());
    for ((v, score), u) in values.iter().zip(&scores).zip(&owners) {
        let rating = 1 + cuts.iter().filter(|&&c| *score >= c).count() as i64;
        let mut parts: Vec<String> = vec![FILLER.choose(&mut rng).expect("non-empty").to_string()];
        for (p, &val) in variables.iter().zip(v) {
            if let Some(s) = phrase(&p.variable, val) {
                parts.push(s);
            }
        }
        parts[1..].shuffle(&mut rng);
        records.push(EventRecord {
            user: format!("u{u:05}"),
            item: format!("b{:05}", rng.random_range(0..(num_users * 2).max(1))),
            rating,
            review: Some(parts.join(" ")),
            region: None,
            domain: domain.to_string(),
        });
    }
    PlantedCorpus {
        records,
        variables,
        values,
    }
}
