//! End-to-end runs: splits, inputs, training and evaluation per seed.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{Ablation, RunConfig};
use super::metrics::{hr_ndcg, MetricsReport, MetricsRow};
use super::model::{CdrModel, DomainGraph, ModelInputs, ModelSpec, Phase};
use super::train::{train_two_phase, TrainData, TrainReport};
use crate::data::{
    build_eval_candidates, sample_negatives, split_iid, split_ood_degree, split_ood_region, to_implicit, EvalCandidateSet,
    EventRecord, InteractionCorpus, OodSplit, SplitSetting, TrainingPairs,
};
use crate::discovery::{
    build_subspace, collect_reviews, direct_extraction, llm::write_replay_log, run_discovery, write_pool,
    ConfounderSubspace, LlmPort, PoolEntry, ReplayRecord,
};
use crate::error::{Error, Result};
use crate::representation::{encode_documents, normalized_adjacency, TextEncoder};

#[derive(Debug, Clone)]
pub struct Corpora {
    pub source: InteractionCorpus,
    pub target: InteractionCorpus,
}

fn domain_of(records: &[EventRecord], what: &str) -> Result<String> {
    records
        .first()
        .map(|r| r.domain.clone())
        .ok_or_else(|| Error::InvalidInput(format!("{what} events are empty")))
}

impl Corpora {
    pub fn from_records(source: &[EventRecord], target: &[EventRecord]) -> Result<Self> {
        let (s, t) = InteractionCorpus::pair(
            (&domain_of(source, "source")?, source),
            (&domain_of(target, "target")?, target),
        )?;
        Ok(Self { source: s, target: t })
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        let s = InteractionCorpus::read_jsonl(&config.source_events)?;
        let t = InteractionCorpus::read_jsonl(&config.target_events)?;
        Self::from_records(&s, &t)
    }
}

/// Confounder pools for the two domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    pub source: Vec<PoolEntry>,
    pub target: Vec<PoolEntry>,
}

#[derive(Debug, Clone)]
pub struct Subspaces {
    pub source: ConfounderSubspace,
    pub target: ConfounderSubspace,
}

pub fn pool_path(dir: &Path, role: &str, direct: bool) -> PathBuf {
    if direct {
        dir.join(format!("pool_direct_{role}.json"))
    } else {
        dir.join(format!("pool_{role}.json"))
    }
}

pub fn subspace_path(dir: &Path, role: &str, direct: bool) -> PathBuf {
    if direct {
        dir.join(format!("subspace_direct_{role}.json"))
    } else {
        dir.join(format!("subspace_{role}.json"))
    }
}

impl Subspaces {
    pub fn save(&self, dir: &Path, direct: bool, config_hash: &str) -> Result<()> {
        self.source.save(&subspace_path(dir, "source", direct), Some(config_hash))?;
        self.target.save(&subspace_path(dir, "target", direct), Some(config_hash))
    }

    pub fn load(dir: &Path, direct: bool) -> Result<Self> {
        Ok(Self {
            source: ConfounderSubspace::load(&subspace_path(dir, "source", direct))?,
            target: ConfounderSubspace::load(&subspace_path(dir, "target", direct))?,
        })
    }
}

pub fn replay_path(dir: &Path, role: &str, direct: bool) -> PathBuf {
    if direct {
        dir.join(format!("replay_direct_{role}.jsonl"))
    } else {
        dir.join(format!("replay_{role}.jsonl"))
    }
}

/// Runs confounder discovery (or the single-shot extraction when `direct`)
/// on both domains. With `out_dir`, pools and replay logs are written there.
pub fn discover(
    config: &RunConfig,
    corpora: &Corpora,
    llm: &dyn LlmPort,
    direct: bool,
    out_dir: Option<&Path>,
) -> Result<(Pools, Vec<ReplayRecord>)> {
    let d = &config.discovery;
    let mut pools = Vec::new();
    let mut replay = Vec::new();
    for (role, corpus) in [("source", &corpora.source), ("target", &corpora.target)] {
        let rows = collect_reviews(corpus, d.max_users, d.reviews_per_user, d.seed)?;
        let (pool, log) = if direct {
            let (pool, log) = direct_extraction(&corpus.domain_name, &rows, llm, d)?;
            if let Some(dir) = out_dir {
                write_pool(&pool_path(dir, role, true), &pool)?;
            }
            (pool, log)
        } else {
            let path = out_dir.map(|dir| pool_path(dir, role, false));
            let out = run_discovery(&corpus.domain_name, &rows, llm, d, path.as_deref())?;
            (out.pool, out.replay)
        };
        if let Some(dir) = out_dir {
            write_replay_log(&replay_path(dir, role, direct), &log)?;
        }
        log::info!("{role} pool: {} confounders", pool.len());
        pools.push(pool);
        replay.extend(log);
    }
    let target = pools.pop().expect("two pools");
    let source = pools.pop().expect("two pools");
    Ok((Pools { source, target }, replay))
}

pub fn build_subspaces(config: &RunConfig, pools: &Pools, encoder: &dyn TextEncoder) -> Result<Subspaces> {
    let seed = config.discovery.seed;
    Ok(Subspaces {
        source: build_subspace(&pools.source, encoder, config.k, config.j, seed)?,
        target: build_subspace(&pools.target, encoder, config.k, config.j, seed)?,
    })
}

/// Everything a seed needs before training.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub split: OodSplit,
    pub target_pairs: TrainingPairs,
    pub source_pairs: TrainingPairs,
    pub candidates: Vec<EvalCandidateSet>,
}

pub fn make_split(config: &RunConfig, target: &InteractionCorpus, ratio: f64, seed: u64) -> Result<OodSplit> {
    match config.split.setting {
        SplitSetting::UserDegreeShift => split_ood_degree(target, ratio, seed),
        SplitSetting::RegionShift => {
            let region = config
                .split
                .region
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("region shift needs split.region".into()))?;
            split_ood_region(target, region, ratio, seed)
        }
        SplitSetting::Iid => split_iid(target, seed),
    }
}

/// The source domain trains on all of its positives.
fn source_split(source: &InteractionCorpus, seed: u64) -> Result<OodSplit> {
    let train: Vec<(usize, usize)> = to_implicit(&source.events)?.positives.into_iter().collect();
    Ok(OodSplit {
        train,
        val: Vec::new(),
        test: Vec::new(),
        setting: SplitSetting::Iid,
        shift_ratio: 0.0,
        seed,
        region: None,
    })
}

pub fn prepare_seed(config: &RunConfig, corpora: &Corpora, ratio: f64, seed: u64) -> Result<SeedData> {
    let split = make_split(config, &corpora.target, ratio, seed)?;
    let target_pairs = sample_negatives(&split, corpora.target.num_items(), seed)?;
    let source_pairs = sample_negatives(&source_split(&corpora.source, seed)?, corpora.source.num_items(), seed ^ 1)?;
    let candidates = build_eval_candidates(&split, &corpora.target, seed)?;
    Ok(SeedData {
        split,
        target_pairs,
        source_pairs,
        candidates,
    })
}

/// Text and graph inputs. Target documents and edges leave out the held-out
/// validation and test positives.
pub fn model_inputs(
    corpora: &Corpora,
    split: &OodSplit,
    encoder: &dyn TextEncoder,
    subspaces: Option<&Subspaces>,
) -> Result<ModelInputs> {
    let held: HashSet<(usize, usize)> = split.val.iter().chain(&split.test).copied().collect();
    let mut visible = corpora.target.clone();
    visible.events.retain(|e| !held.contains(&(e.user, e.item)));
    let t_docs = encode_documents(&visible, encoder)?;
    let s_docs = encode_documents(&corpora.source, encoder)?;
    let s_train = source_split(&corpora.source, split.seed)?.train;
    let m = corpora.target.num_users();
    Ok(ModelInputs {
        source: DomainGraph {
            user_text: s_docs.users,
            item_text: s_docs.items,
            adjacency: Arc::new(normalized_adjacency(m, corpora.source.num_items(), &s_train)?),
        },
        target: DomainGraph {
            user_text: t_docs.users,
            item_text: t_docs.items,
            adjacency: Arc::new(normalized_adjacency(m, corpora.target.num_items(), &split.train)?),
        },
        c_source: subspaces.map(|s| s.source.centroids.clone()),
        c_target: subspaces.map(|s| s.target.centroids.clone()),
    })
}

pub fn model_spec(config: &RunConfig, corpora: &Corpora) -> ModelSpec {
    ModelSpec {
        k: config.k,
        num_users: corpora.target.num_users(),
        source_items: corpora.source.num_items(),
        target_items: corpora.target.num_items(),
        gcn_layers: config.gcn_layers,
        inference_mode: config.inference_mode,
        ablation: config.ablation,
    }
}

/// The phase whose forward pass a trained model uses.
pub fn final_phase(config: &RunConfig) -> Phase {
    if config.epochs_phase2 > 0 {
        Phase::Two
    } else {
        Phase::One
    }
}

pub fn evaluate(model: &CdrModel, inputs: &ModelInputs, phase: Phase, sets: &[EvalCandidateSet]) -> Result<(f64, f64)> {
    hr_ndcg(&model.score_candidates(inputs, phase, sets)?)
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub model: CdrModel,
    pub inputs: ModelInputs,
    pub data: SeedData,
    pub report: TrainReport,
    pub row: MetricsRow,
}

/// Splits, trains and evaluates one seed at one shift ratio.
pub fn run_seed(
    config: &RunConfig,
    corpora: &Corpora,
    encoder: &dyn TextEncoder,
    subspaces: Option<&Subspaces>,
    ratio: f64,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<SeedOutcome> {
    let data = prepare_seed(config, corpora, ratio, seed)?;
    let inputs = model_inputs(corpora, &data.split, encoder, subspaces)?;
    let mut model = CdrModel::new(model_spec(config, corpora), seed);
    let train = TrainData {
        inputs,
        source_pairs: data.source_pairs.pairs.clone(),
        target_pairs: data.target_pairs.pairs.clone(),
    };
    let report = train_two_phase(config, &mut model, &train, seed, checkpoint_dir)?;
    let (hr10, ndcg10) = evaluate(&model, &train.inputs, final_phase(config), &data.candidates)?;
    log::info!(
        "{} ratio {ratio} seed {seed}: HR@10 {hr10:.4} NDCG@10 {ndcg10:.4}",
        config.ablation
    );
    Ok(SeedOutcome {
        model,
        inputs: train.inputs,
        data,
        report,
        row: MetricsRow {
            setting: config.split.label(),
            ratio,
            seed,
            hr10,
            ndcg10,
        },
    })
}

/// Runs every (ratio, seed) pair in ratio-major order. Checkpoints go under
/// `<out>/ratio_<r>/seed_<s>` when `out` is given.
pub fn run_grid(
    config: &RunConfig,
    corpora: &Corpora,
    encoder: &dyn TextEncoder,
    subspaces: Option<&Subspaces>,
    ratios: &[f64],
    out: Option<&Path>,
) -> Result<(MetricsReport, Vec<TrainReport>)> {
    let mut report = MetricsReport::default();
    let mut logs = Vec::new();
    for &ratio in ratios {
        for &seed in &config.seeds {
            let dir = out.map(|o| o.join(format!("ratio_{ratio}")).join(format!("seed_{seed}")));
            let r = run_seed(config, corpora, encoder, subspaces, ratio, seed, dir.as_deref())?;
            report.push(r.row);
            logs.push(r.report);
        }
    }
    Ok((report, logs))
}

/// Subspaces for the configured variant: none without confounders, the
/// single-shot pools for the direct variant, the discovered pools otherwise.
pub fn subspaces_for(
    config: &RunConfig,
    corpora: &Corpora,
    llm: &dyn LlmPort,
    encoder: &dyn TextEncoder,
    out_dir: Option<&Path>,
) -> Result<Option<Subspaces>> {
    match config.ablation {
        Ablation::WithoutConfounder => Ok(None),
        a => {
            let (pools, _) = discover(config, corpora, llm, a == Ablation::DirectLlm, out_dir)?;
            Ok(Some(build_subspaces(config, &pools, encoder)?))
        }
    }
}

/// Metrics of one variant at the configured shift ratio.
pub fn ablate(
    config: &RunConfig,
    variant: Ablation,
    corpora: &Corpora,
    llm: &dyn LlmPort,
    encoder: &dyn TextEncoder,
    out_dir: Option<&Path>,
) -> Result<MetricsReport> {
    let config = RunConfig {
        ablation: variant,
        ..config.clone()
    };
    let subspaces = subspaces_for(&config, corpora, llm, encoder, out_dir)?;
    Ok(run_grid(&config, corpora, encoder, subspaces.as_ref(), &[config.split.shift_ratio], None)?.0)
}

/// One row per (ratio, seed), retraining on each regenerated split.
pub fn shift_sweep(
    config: &RunConfig,
    corpora: &Corpora,
    encoder: &dyn TextEncoder,
    subspaces: Option<&Subspaces>,
    ratios: &[f64],
) -> Result<MetricsReport> {
    if ratios.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one ratio".into()));
    }
    Ok(run_grid(config, corpora, encoder, subspaces, ratios, None)?.0)
}
