use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use causal_cdr::data::sampling::{load_candidates, save_candidates};
use causal_cdr::data::{InteractionCorpus, OodSplit};
use causal_cdr::discovery::llm::read_replay_log;
use causal_cdr::discovery::{read_pool, LlmPort, MockLlm, ReplayLlm};
use causal_cdr::pipeline::{
    build_subspaces, discover, evaluate, load_checkpoint, make_split, model_inputs, pool_path,
    prepare_seed, replay_path, run_grid, subspace_path, Ablation, Corpora, MetricsReport, MetricsRow, RunConfig,
    Subspaces,
};
use causal_cdr::representation::{MockTextEncoder, TextEncoder};
use causal_cdr::synth::{cross_domain, default_kb, CrossDomainConfig};
use serde::Serialize;

use crate::http::{HttpEncoder, HttpLlm};

/// Loaded configuration plus the output directory it writes to.
pub struct RunContext {
    pub config: RunConfig,
    pub out: PathBuf,
    pub hash: String,
}

#[derive(Serialize)]
struct ArtifactManifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    artifacts: Vec<String>,
}

impl RunContext {
    pub fn load(path: &Path, out: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut config = RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
        if let Some(o) = out {
            config.output_dir = o;
        }
        let out = config.output_dir.clone();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let hash = config.hash();
        Ok(Self { config, out, hash })
    }

    /// Echoes the config and lists what a command wrote.
    fn finish(&self, command: &str, artifacts: &[PathBuf]) -> anyhow::Result<()> {
        self.config.save(&self.out.join("config.json"))?;
        let manifest = ArtifactManifest {
            command,
            config_hash: &self.hash,
            artifacts: artifacts.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = self.out.join(format!("manifest_{command}.json"));
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        Ok(())
    }

    fn confounder_dir(&self) -> PathBuf {
        self.out.join("confounders")
    }
}

fn llm(config: &RunConfig, mock: bool) -> anyhow::Result<Box<dyn LlmPort>> {
    if mock || config.llm.mock {
        Ok(Box::new(MockLlm::new(default_kb())))
    } else {
        Ok(Box::new(HttpLlm::new(&config.llm)?))
    }
}

fn encoder(config: &RunConfig) -> anyhow::Result<Box<dyn TextEncoder>> {
    match &config.encoder.base_url {
        Some(base) => Ok(Box::new(HttpEncoder::new(&config.encoder, base)?)),
        None => Ok(Box::new(MockTextEncoder::new(config.encoder.mock_seed))),
    }
}

fn corpora(config: &RunConfig) -> anyhow::Result<Corpora> {
    Corpora::load(config).with_context(|| {
        format!(
            "loading events from {} and {}",
            config.source_events.display(),
            config.target_events.display()
        )
    })
}

pub fn prepare_data(ctx: &RunContext, synthetic: Option<u64>) -> anyhow::Result<()> {
    let c = &ctx.config;
    let mut artifacts = Vec::new();
    if let Some(seed) = synthetic {
        let data = cross_domain(&CrossDomainConfig::default(), seed);
        for (path, records) in [(&c.source_events, &data.source), (&c.target_events, &data.target)] {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            InteractionCorpus::write_jsonl(path, records)?;
            artifacts.push(path.clone());
        }
    }
    let corpora = corpora(c)?;
    let dir = ctx.out.join("data");
    fs::create_dir_all(&dir)?;
    for &seed in &c.seeds {
        let data = prepare_seed(c, &corpora, c.split.shift_ratio, seed)?;
        let split = dir.join(format!("split_seed{seed}.json"));
        data.split.save(&corpora.target, &split)?;
        let cands = dir.join(format!("candidates_seed{seed}.json"));
        save_candidates(&data.candidates, &corpora.target, &cands)?;
        log::info!(
            "seed {seed}: {} train / {} val / {} test positives, {} candidate sets",
            data.split.train.len(),
            data.split.val.len(),
            data.split.test.len(),
            data.candidates.len()
        );
        artifacts.extend([split, cands]);
    }
    ctx.finish("prepare-data", &artifacts)
}

/// Runs discovery, writes pools, replay logs and subspaces, and returns the subspaces.
fn run_discovery_step(ctx: &RunContext, corpora: &Corpora, llm: &dyn LlmPort, direct: bool) -> anyhow::Result<Subspaces> {
    let dir = ctx.confounder_dir();
    fs::create_dir_all(&dir)?;
    let (pools, _) = discover(&ctx.config, corpora, llm, direct, Some(&dir))?;
    println!(
        "source pool: {:?}\ntarget pool: {:?}",
        pools.source.iter().map(|p| &p.name).collect::<Vec<_>>(),
        pools.target.iter().map(|p| &p.name).collect::<Vec<_>>()
    );
    let subspaces = build_subspaces(&ctx.config, &pools, encoder(&ctx.config)?.as_ref())?;
    subspaces.save(&dir, direct, &ctx.hash)?;
    Ok(subspaces)
}

fn discovery_artifacts(ctx: &RunContext, direct: bool) -> Vec<PathBuf> {
    let dir = ctx.confounder_dir();
    ["source", "target"]
        .iter()
        .flat_map(|role| {
            [
                pool_path(&dir, role, direct),
                replay_path(&dir, role, direct),
                subspace_path(&dir, role, direct),
            ]
        })
        .collect()
}

pub fn discover_confounders(ctx: &RunContext, mock: bool, direct: bool) -> anyhow::Result<()> {
    let corpora = corpora(&ctx.config)?;
    let llm = llm(&ctx.config, mock)?;
    run_discovery_step(ctx, &corpora, llm.as_ref(), direct)?;
    ctx.finish("discover-confounders", &discovery_artifacts(ctx, direct))
}

/// Subspaces for the configured variant, reusing saved ones when present.
fn subspaces_for(ctx: &RunContext, config: &RunConfig, corpora: &Corpora, mock: bool) -> anyhow::Result<Option<Subspaces>> {
    if !config.ablation.uses_confounders() {
        return Ok(None);
    }
    let direct = config.ablation == Ablation::DirectLlm;
    let dir = ctx.confounder_dir();
    if subspace_path(&dir, "source", direct).exists() && subspace_path(&dir, "target", direct).exists() {
        log::info!("reusing confounder subspaces from {}", dir.display());
        return Ok(Some(Subspaces::load(&dir, direct)?));
    }
    let llm = llm(config, mock)?;
    Ok(Some(run_discovery_step(ctx, corpora, llm.as_ref(), direct)?))
}

fn write_report(ctx: &RunContext, report: &MetricsReport, stem: &str) -> anyhow::Result<Vec<PathBuf>> {
    let csv = ctx.out.join(format!("{stem}.csv"));
    let summary = ctx.out.join(format!("{stem}_summary.csv"));
    report.write_csv(&csv, &ctx.hash)?;
    report.write_summary(&summary, &ctx.hash)?;
    for m in report.means() {
        println!("{stem} ratio {}: HR@10 {:.4} NDCG@10 {:.4} over {} runs", m.ratio, m.hr10, m.ndcg10, m.runs);
    }
    Ok(vec![csv, summary])
}

pub fn train(ctx: &RunContext, mock: bool) -> anyhow::Result<()> {
    let c = &ctx.config;
    let corpora = corpora(c)?;
    let subspaces = subspaces_for(ctx, c, &corpora, mock)?;
    let enc = encoder(c)?;
    let ckpt = ctx.out.join("checkpoints");
    let ratio = c.split.shift_ratio;
    let (report, logs) = run_grid(c, &corpora, enc.as_ref(), subspaces.as_ref(), &[ratio], Some(&ckpt))?;
    let mut artifacts = write_report(ctx, &report, "metrics")?;
    for &seed in &c.seeds {
        let dir = ckpt.join(format!("ratio_{ratio}")).join(format!("seed_{seed}"));
        let data = prepare_seed(c, &corpora, ratio, seed)?;
        data.split.save(&corpora.target, &dir.join("split.json"))?;
        save_candidates(&data.candidates, &corpora.target, &dir.join("candidates.json"))?;
        artifacts.push(dir);
    }
    let log_path = ctx.out.join("train_log.json");
    fs::write(&log_path, serde_json::to_vec_pretty(&logs)?)?;
    artifacts.push(log_path);
    ctx.finish("train", &artifacts)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub candidates: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

pub fn evaluate_checkpoint(ctx: &RunContext, args: &EvaluateArgs) -> anyhow::Result<()> {
    let c = &ctx.config;
    let corpora = corpora(c)?;
    let (model, manifest) = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    if manifest.config_hash != ctx.config.short_hash() {
        log::warn!(
            "checkpoint was written under config {} but the current config is {}",
            manifest.config_hash,
            ctx.config.short_hash()
        );
    }
    let split_path = args.split.clone().unwrap_or_else(|| sibling(&args.checkpoint, "split.json"));
    let split = if split_path.exists() {
        OodSplit::load(&corpora.target, &split_path)?
    } else {
        make_split(c, &corpora.target, c.split.shift_ratio, manifest.seed)?
    };
    let cand_path = args.candidates.clone().unwrap_or_else(|| sibling(&args.checkpoint, "candidates.json"));
    let sets = load_candidates(&corpora.target, &cand_path)
        .with_context(|| format!("loading candidates {}", cand_path.display()))?;
    let variant = RunConfig {
        ablation: model.spec.ablation,
        ..c.clone()
    };
    let subspaces = if variant.ablation.uses_confounders() {
        let direct = variant.ablation == Ablation::DirectLlm;
        Some(Subspaces::load(&ctx.confounder_dir(), direct).context("loading confounder subspaces")?)
    } else {
        None
    };
    let enc = encoder(c)?;
    let inputs = model_inputs(&corpora, &split, enc.as_ref(), subspaces.as_ref())?;
    let (hr10, ndcg10) = evaluate(&model, &inputs, manifest.phase, &sets)?;
    let mut report = MetricsReport::default();
    report.push(MetricsRow {
        setting: c.split.label(),
        ratio: split.shift_ratio,
        seed: manifest.seed,
        hr10,
        ndcg10,
    });
    let out = args.output.clone().unwrap_or_else(|| ctx.out.join("evaluation.csv"));
    report.write_csv(&out, &ctx.hash)?;
    println!("HR@10 {hr10:.4} NDCG@10 {ndcg10:.4} -> {}", out.display());
    Ok(())
}

pub fn sweep(ctx: &RunContext, mock: bool) -> anyhow::Result<()> {
    let c = &ctx.config;
    if c.sweep_ratios.is_empty() {
        bail!("sweep_ratios is empty");
    }
    let corpora = corpora(c)?;
    let subspaces = subspaces_for(ctx, c, &corpora, mock)?;
    let enc = encoder(c)?;
    let (report, _) = run_grid(c, &corpora, enc.as_ref(), subspaces.as_ref(), &c.sweep_ratios, None)?;
    let artifacts = write_report(ctx, &report, "sweep")?;
    ctx.finish("sweep", &artifacts)
}

fn slug(a: Ablation) -> String {
    a.as_str().replace("w/o ", "wo-").replace("w/ ", "w-").replace(' ', "-").to_lowercase()
}

pub fn ablate(ctx: &RunContext, variants: &[Ablation], mock: bool) -> anyhow::Result<()> {
    let corpora = corpora(&ctx.config)?;
    let enc = encoder(&ctx.config)?;
    let mut artifacts = Vec::new();
    for &v in variants {
        let config = RunConfig {
            ablation: v,
            ..ctx.config.clone()
        };
        let subspaces = subspaces_for(ctx, &config, &corpora, mock)?;
        let (report, _) = run_grid(
            &config,
            &corpora,
            enc.as_ref(),
            subspaces.as_ref(),
            &[config.split.shift_ratio],
            None,
        )?;
        artifacts.extend(write_report(ctx, &report, &format!("ablation_{}", slug(v)))?);
    }
    ctx.finish("ablate", &artifacts)
}

/// Re-runs discovery against recorded replies and compares the pools.
pub fn replay_llm(ctx: &RunContext, log_dir: Option<PathBuf>, direct: bool) -> anyhow::Result<()> {
    let corpora = corpora(&ctx.config)?;
    let src = log_dir.unwrap_or_else(|| ctx.confounder_dir());
    let mut records = Vec::new();
    for role in ["source", "target"] {
        let path = replay_path(&src, role, direct);
        records.extend(read_replay_log(&path).with_context(|| format!("reading {}", path.display()))?);
    }
    let llm = ReplayLlm::new(&records);
    let dir = ctx.out.join("replay");
    fs::create_dir_all(&dir)?;
    let (pools, _) = discover(&ctx.config, &corpora, &llm, direct, Some(&dir))?;
    let mut artifacts = Vec::new();
    let mut mismatched = Vec::new();
    for (role, pool) in [("source", &pools.source), ("target", &pools.target)] {
        artifacts.push(pool_path(&dir, role, direct));
        let recorded = pool_path(&src, role, direct);
        if recorded.exists() && &read_pool(&recorded)? != pool {
            mismatched.push(role);
        }
    }
    ctx.finish("replay-llm", &artifacts)?;
    if !mismatched.is_empty() {
        bail!("replayed pools differ from the recorded ones for {mismatched:?}");
    }
    println!("replayed {} recorded replies; pools match", records.len());
    Ok(())
}
