//! End-to-end acceptance criteria, run in order with per-criterion timing.
//!
//! Each criterion prints one `PASS`/`FAIL` line on stderr (outside the test
//! harness capture). Set `ACCEPTANCE_ONLY=2,8` to run a subset.

mod common;

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use causal_cdr::causal::losses::{reconstruction_var, structural_vars};
use causal_cdr::causal::{
    fit_dag, invariant_var, level_causal_var, off_diagonal_mask, structural_hamming_distance, CausalLossWeights, DagLevel, DagTrainConfig,
    EscalationPolicy, Fusion, InferenceMode,
};
use causal_cdr::data::LabeledPair;
use causal_cdr::discovery::{collect_reviews, fci, markov_blanket, run_discovery, DiscoveryConfig, FciConfig, MockLlm};
use causal_cdr::numerics::{acyclicity, grad_check, Bound, GradCheckReport, DenseMatrix, Graph, ParamId, ParamStore, Var};
use causal_cdr::pipeline::{
    build_subspaces, discover, hr_ndcg, run_grid, run_seed, Ablation, CdrModel, Corpora, DomainGraph, ModelInputs,
    ModelSpec, Phase, RunConfig, ScoredCandidates, Subspaces,
};
use causal_cdr::predict::{bce_mean_var, selection_weights, LossWeights, PredictorParams};
use causal_cdr::representation::{
    domain_losses, normalized_adjacency, Discriminator, Disentangler, Grl, MockTextEncoder, TEXT_DIM,
};
use causal_cdr::synth::{cross_domain, planted_reviews, CrossDomainConfig, LinearScm, OrdinalScm, Role};
use causal_cdr::data::InteractionCorpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> (bool, String);

fn report(line: &str) {
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{line}");
}

// ---------------------------------------------------------------- gradients

/// Max relative error of the tape gradient of `build` w.r.t. `id`, with the
/// tape gradient multiplied by `sign`.
fn param_error(
    store: &ParamStore,
    id: ParamId,
    sign: f64,
    build: &dyn Fn(&mut Graph, &Bound) -> Var,
) -> GradCheckReport {
    let with = |x: &DenseMatrix| {
        let mut s = store.clone();
        *s.get_mut(id) = x.clone();
        s
    };
    let f = |x: &DenseMatrix| {
        let s = with(x);
        let mut g = Graph::new();
        let p = s.bind_frozen(&mut g);
        let out = build(&mut g, &p);
        g.scalar(out)
    };
    let grad = |x: &DenseMatrix| {
        let s = with(x);
        let mut g = Graph::new();
        let p = s.bind(&mut g, |i| i == id);
        let out = build(&mut g, &p);
        let grads = g.backward(out);
        grads.get_or_zeros(p.var(id), x.rows(), x.cols()).scale(sign)
    };
    grad_check(f, grad, store.get(id), 1e-5).expect("finite check")
}

struct TermCheck {
    name: &'static str,
    worst: GradCheckReport,
}

fn check_term(
    worst: &mut Vec<TermCheck>,
    name: &'static str,
    store: &ParamStore,
    ids: &[(ParamId, f64)],
    build: &dyn Fn(&mut Graph, &Bound) -> Var,
) {
    for &(id, sign) in ids {
        let r = param_error(store, id, sign, build);
        match worst.iter_mut().find(|t| t.name == name) {
            Some(t) if t.worst.max_rel_error >= r.max_rel_error => {}
            Some(t) => t.worst = r,
            None => worst.push(TermCheck { name, worst: r }),
        }
    }
}

fn tiny_model(seed: u64) -> (CdrModel, ModelInputs, Vec<LabeledPair>, Vec<LabeledPair>) {
    let spec = ModelSpec {
        k: 3,
        num_users: 4,
        source_items: 3,
        target_items: 5,
        gcn_layers: 2,
        inference_mode: InferenceMode::SingleStep,
        ablation: Ablation::Full,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = |n: usize, rng: &mut ChaCha8Rng| DenseMatrix::random_normal(n, TEXT_DIM, 0.1, rng);
    let inputs = ModelInputs {
        source: DomainGraph {
            user_text: text(4, &mut rng),
            item_text: text(3, &mut rng),
            adjacency: Arc::new(normalized_adjacency(4, 3, &[(0, 0), (1, 1), (2, 2), (3, 0)]).unwrap()),
        },
        target: DomainGraph {
            user_text: text(4, &mut rng),
            item_text: text(5, &mut rng),
            adjacency: Arc::new(normalized_adjacency(4, 5, &[(0, 4), (1, 1), (2, 3), (3, 0)]).unwrap()),
        },
        c_source: Some(DenseMatrix::random_normal(2, 3, 1.0, &mut rng)),
        c_target: Some(DenseMatrix::random_normal(3, 3, 1.0, &mut rng)),
    };
    let mut model = CdrModel::new(spec, seed);
    model.store.jitter(0.2, &mut rng);
    for id in model.dag_ids() {
        let dag = DenseMatrix::random_uniform(6, 6, -0.5, 0.5, &mut rng);
        *model.store.get_mut(id) = dag.hadamard(&off_diagonal_mask(6));
    }
    let lp = |user, item, label| LabeledPair { user, item, label };
    let source = vec![lp(0, 0, 1.0), lp(1, 2, 0.0), lp(3, 1, 1.0)];
    let target = vec![lp(0, 4, 1.0), lp(2, 0, 0.0), lp(1, 1, 1.0), lp(3, 2, 0.0)];
    (model, inputs, source, target)
}

fn gradient_integrity() -> (bool, String) {
    let mut worst = Vec::new();
    for point in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(point);
        let k = 3;

        // causal structure terms
        let mut store = ParamStore::new();
        let a = store.add("a", DenseMatrix::random_uniform(2 * k, 2 * k, -0.6, 0.6, &mut rng));
        let b = store.add("b", DenseMatrix::random_normal(7, 2 * k, 1.0, &mut rng));
        let both = [(a, 1.0), (b, 1.0)];
        check_term(&mut worst, "reconstruction", &store, &both, &|g, p| reconstruction_var(g, p.var(b), p.var(a)));
        check_term(&mut worst, "acyclicity", &store, &[(a, 1.0)], &|g, p| structural_vars(g, p.var(a), k).dag);
        check_term(&mut worst, "path", &store, &[(a, 1.0)], &|g, p| structural_vars(g, p.var(a), k).path);
        check_term(&mut worst, "root", &store, &[(a, 1.0)], &|g, p| structural_vars(g, p.var(a), k).root);
        check_term(&mut worst, "l1", &store, &[(a, 1.0)], &|g, p| structural_vars(g, p.var(a), k).l1);
        let w = CausalLossWeights::default();
        check_term(&mut worst, "level causal", &store, &both, &|g, p| level_causal_var(g, p.var(b), p.var(a), k, &w));

        // invariant inference and fusion
        let e_att = store.add("e_att", DenseMatrix::random_normal(5, k, 1.0, &mut rng));
        let other = store.add("other", DenseMatrix::random_normal(5, k, 1.0, &mut rng));
        let fusion = Fusion::new(&mut store, "fusion", k, &mut rng);
        store.jitter(0.1, &mut rng);
        let fuse_ids: Vec<(ParamId, f64)> =
            [a, e_att, other].into_iter().chain(fusion.params()).map(|id| (id, 1.0)).collect();
        check_term(&mut worst, "invariant + fusion", &store, &fuse_ids, &|g, p| {
            let inv = invariant_var(g, p.var(e_att), p.var(a), k, InferenceMode::FixedPoint);
            let (fused, _) = fusion.forward(g, p, inv, p.var(other));
            let sq = g.hadamard(fused, fused);
            g.sum(sq)
        });

        // prediction head with the backdoor input
        let mut ps = ParamStore::new();
        let head = PredictorParams::new(&mut ps, "pred", k, &mut rng);
        ps.jitter(0.1, &mut rng);
        let eu = DenseMatrix::random_normal(6, k, 1.0, &mut rng);
        let ev = DenseMatrix::random_normal(6, k, 1.0, &mut rng);
        let c = DenseMatrix::random_normal(4, k, 1.0, &mut rng);
        let labels: Vec<f64> = (0..6).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let head_ids: Vec<(ParamId, f64)> = head.params().into_iter().map(|id| (id, 1.0)).collect();
        check_term(&mut worst, "recommendation bce", &ps, &head_ids, &|g, p| {
            let (u, v, cv) = (g.constant(eu.clone()), g.constant(ev.clone()), g.constant(c.clone()));
            let y = head.score(g, p, u, v, Some(cv));
            bce_mean_var(g, y, &labels)
        });
        check_term(&mut worst, "parameter norm", &ps, &head_ids, &|g, p| {
            let vars: Vec<Var> = head.params().into_iter().map(|id| p.var(id)).collect();
            g.global_norm(&vars)
        });

        // domain discrimination; the reversal layer negates the shared encoder's gradient
        let mut ds = ParamStore::new();
        let dis = Disentangler::new(&mut ds, k, &mut rng);
        let disc = Discriminator::new(&mut ds, k, &mut rng);
        ds.jitter(0.3, &mut rng);
        let es = DenseMatrix::random_normal(5, k, 1.0, &mut rng);
        let et = DenseMatrix::random_normal(5, k, 1.0, &mut rng);
        let shared = dis.shared.params();
        let dom_ids: Vec<(ParamId, f64)> = dis
            .params()
            .into_iter()
            .chain(disc.params())
            .map(|id| (id, if shared.contains(&id) { -1.0 } else { 1.0 }))
            .collect();
        check_term(&mut worst, "domain", &ds, &dom_ids, &|g, p| {
            let (s, t) = (g.constant(es.clone()), g.constant(et.clone()));
            let prefs = dis.forward(g, p, s, t);
            domain_losses(g, p, &disc, &prefs, 0.5, Grl::new(1.0)).total
        });

        // the assembled phase-two objective
        let (model, inputs, source, target) = tiny_model(point);
        let weights = LossWeights { beta3: 0.0, ..Default::default() };
        let ids: Vec<(ParamId, f64)> = [
            model.w_att,
            model.dag_spe,
            model.dag_sha,
            model.fusion_target.params()[1],
            model.fusion_source.params()[1],
            model.pred_target.w_uc,
            model.pred_source.fc.b,
            model.proj_target.params()[1],
        ]
        .into_iter()
        .map(|id| (id, 1.0))
        .collect();
        check_term(&mut worst, "total objective", &model.store, &ids, &|g, p| {
            model
                .loss(g, p, &inputs, Phase::Two, &source, &target, &weights, &CausalLossWeights::default())
                .0
        });
    }
    let max = worst.iter().map(|t| t.worst.max_rel_error).fold(0.0, f64::max);
    let detail = worst
        .iter()
        .map(|t| {
            let w = &t.worst;
            if w.max_rel_error <= 1e-4 {
                format!("{} {:.1e}", t.name, w.max_rel_error)
            } else {
                format!("{} {:.1e} (analytic {:.3e} vs numeric {:.3e})", t.name, w.max_rel_error, w.analytic, w.numeric)
            }
        })
        .collect::<Vec<_>>()
        .join(", ");
    (max <= 1e-4, format!("max rel error {max:.2e} over 20 points [{detail}]"))
}

// ------------------------------------------------------------ acyclicity

fn has_cycle(support: &[[bool; 3]; 3]) -> bool {
    // Kahn's algorithm; self-loops count as cycles
    let mut indeg = [0usize; 3];
    for row in support {
        for (j, &e) in row.iter().enumerate() {
            if e {
                indeg[j] += 1;
            }
        }
    }
    let mut removed = [false; 3];
    for _ in 0..3 {
        match (0..3).find(|&v| !removed[v] && indeg[v] == 0) {
            Some(v) => {
                removed[v] = true;
                for j in 0..3 {
                    if support[v][j] {
                        indeg[j] -= 1;
                    }
                }
            }
            None => return true,
        }
    }
    false
}

/// Σ_{n≥1} tr((A∘A)^n)/n!, with no cancellation because A∘A ≥ 0.
fn taylor_acyclicity(a: &DenseMatrix) -> f64 {
    let d = a.rows();
    let m: Vec<f64> = a.as_slice().iter().map(|x| x * x).collect();
    let mut term = m.clone();
    let mut total = 0.0;
    for n in 1..200 {
        let tr: f64 = (0..d).map(|i| term[i * d + i]).sum();
        total += tr;
        if tr < total * 1e-18 && n > 5 {
            break;
        }
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for l in 0..d {
                let t = term[i * d + l];
                for j in 0..d {
                    next[i * d + j] += t * m[l * d + j];
                }
            }
        }
        let scale = 1.0 / (n + 1) as f64;
        term = next.into_iter().map(|x| x * scale).collect();
    }
    total
}

fn acyclicity_oracle() -> (bool, String) {
    let mut mismatches = 0;
    let mut count = 0;
    let mut max_acyclic = 0.0f64;
    let mut min_cyclic = f64::INFINITY;
    for code in 0..3usize.pow(9) {
        let mut a = DenseMatrix::zeros(3, 3);
        let mut support = [[false; 3]; 3];
        let mut c = code;
        for idx in 0..9 {
            let v = [0.0, 1.0, -1.0][c % 3];
            c /= 3;
            a[(idx / 3, idx % 3)] = v;
            support[idx / 3][idx % 3] = v != 0.0;
        }
        count += 1;
        let h = acyclicity(&a).unwrap();
        if has_cycle(&support) {
            min_cyclic = min_cyclic.min(h);
            if h <= 1e-12 {
                mismatches += 1;
            }
        } else {
            max_acyclic = max_acyclic.max(h.abs());
            if h != 0.0 {
                mismatches += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = DenseMatrix::random_uniform(8, 8, -1.0, 1.0, &mut rng);
        let h = acyclicity(&a).unwrap();
        let oracle = taylor_acyclicity(&a);
        worst = worst.max((h - oracle).abs() / oracle.abs());
    }
    (
        mismatches == 0 && worst <= 1e-9,
        format!(
            "{count} sign/support patterns, {mismatches} mismatches (max |h| acyclic {max_acyclic:.1e}, min h cyclic {min_cyclic:.3}); \
             Taylor oracle max rel error {worst:.2e} on 100 8x8"
        ),
    )
}

// ----------------------------------------------------------- DAG recovery

fn dag_recovery() -> (bool, String) {
    let mut ok = 0;
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let scm = LinearScm::random(8, seed);
        let batch = scm.sample(5000, 100 + seed);
        let fit = fit_dag(&batch, DagLevel::Specific, &DagTrainConfig { seed, ..Default::default() }).unwrap();
        let h = fit.dag.acyclicity().unwrap();
        let shd = structural_hamming_distance(16, &fit.dag.edges(0.3), &scm.true_edges());
        if h <= 1e-6 && shd <= 2 {
            ok += 1;
        }
        rows.push(format!("h {h:.1e}/shd {shd}"));
    }
    (ok >= 8, format!("{ok}/10 with h <= 1e-6 and SHD <= 2 [{}]", rows.join(", ")))
}

// --------------------------------------------------------- Markov blanket

fn markov_blanket_oracle() -> (bool, String) {
    let mut hits = 0;
    for seed in 0..50u64 {
        let scm = OrdinalScm::random(5, 0.35, 5000 + seed);
        assert_eq!(scm.num_vars(), 6);
        let data = scm.sample(20_000, seed);
        let columns: Vec<usize> = (0..scm.num_vars()).collect();
        let r = fci(&data, &columns, &FciConfig::default());
        if markov_blanket(&r.pag, scm.target) == common::brute_force_markov_blanket(&scm, 1e-9) {
            hits += 1;
        }
    }
    (hits >= 45, format!("{hits}/50 blankets equal the brute-force oracle"))
}

// --------------------------------------------------- planted confounders

fn planted_confounders() -> (bool, String) {
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let planted = planted_reviews("books", 1000, 5, seed);
        assert_eq!(planted.variables.len(), 8);
        let corpus = InteractionCorpus::from_records("books", &planted.records).unwrap();
        let config = DiscoveryConfig {
            seed,
            tau_max: 3,
            ..Default::default()
        };
        let rows_in = collect_reviews(&corpus, config.max_users, config.reviews_per_user, seed).unwrap();
        let llm = MockLlm::new(planted.kb());
        let out = run_discovery("books", &rows_in, &llm, &config, None).unwrap();
        let pool: Vec<String> = out.pool.iter().map(|p| p.name.clone()).collect();
        let hits = planted.names(Role::Confounder).iter().filter(|n| pool.contains(n)).count();
        let noise = planted.names(Role::Noise).iter().filter(|n| pool.contains(n)).count();
        if hits >= 2 && noise == 0 {
            good += 1;
        }
        rows.push(format!("{hits}/3 conf, {noise} noise"));
    }
    (good == 5, format!("{good}/5 seeds [{}]", rows.join("; ")))
}

// ------------------------------------------------- synthetic benchmarks

/// Settings for the synthetic OOD benchmark: a small embedding width and a
/// short schedule so ten runs fit the time budget on one core.
fn benchmark_config(ablation: Ablation) -> RunConfig {
    RunConfig {
        k: 16,
        epochs_phase1: 10,
        epochs_phase2: 6,
        escalation: EscalationPolicy {
            max_escalations: 0,
            ..Default::default()
        },
        ablation,
        ..Default::default()
    }
}

struct BenchmarkSeed {
    corpora: Corpora,
    subspaces: Option<Subspaces>,
    pools: String,
}

fn benchmark_seed(seed: u64) -> BenchmarkSeed {
    let data = cross_domain(&CrossDomainConfig::default(), seed);
    let corpora = Corpora::from_records(&data.source, &data.target).unwrap();
    let config = benchmark_config(Ablation::Full);
    let llm = MockLlm::new(data.kb());
    let (pools, _) = discover(&config, &corpora, &llm, false, None).unwrap();
    let subspaces = build_subspaces(&config, &pools, &MockTextEncoder::default()).ok();
    BenchmarkSeed {
        pools: format!("|pool| {}/{}", pools.source.len(), pools.target.len()),
        corpora,
        subspaces,
    }
}

fn compare(baseline: Ablation, baseline_uses_confounders: bool) -> (bool, String) {
    let enc = MockTextEncoder::default();
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let b = benchmark_seed(seed);
        let full = run_seed(
            &benchmark_config(Ablation::Full),
            &b.corpora,
            &enc,
            b.subspaces.as_ref(),
            1.0,
            seed,
            None,
        )
        .unwrap();
        let subs = if baseline_uses_confounders { b.subspaces.as_ref() } else { None };
        let base = run_seed(&benchmark_config(baseline), &b.corpora, &enc, subs, 1.0, seed, None).unwrap();
        if full.row.hr10 > base.row.hr10 {
            wins += 1;
        }
        rows.push(format!("s{seed} {:.4} vs {:.4} ({})", full.row.hr10, base.row.hr10, b.pools));
    }
    (
        wins >= 4,
        format!("full beats {baseline} on OOD HR@10 in {wins}/5 seeds [{}]", rows.join(", ")),
    )
}

fn deconfounding() -> (bool, String) {
    compare(Ablation::WithoutConfounder, false)
}

fn dual_level() -> (bool, String) {
    compare(Ablation::WithoutDualLevel, true)
}

// --------------------------------------------------------- metric oracle

/// Position of the positive after sorting by score descending, then id ascending.
fn oracle_rank(set: &ScoredCandidates) -> usize {
    let mut v = set.scores.clone();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    1 + v.iter().position(|&(i, _)| i == set.positive_item).unwrap()
}

fn metric_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_sets = rng.random_range(1..40);
        let sets: Vec<ScoredCandidates> = (0..n_sets)
            .map(|_| {
                let mut ids: Vec<usize> = (0..500).collect();
                for i in 0..100 {
                    let j = rng.random_range(i..500);
                    ids.swap(i, j);
                }
                let coarse = rng.random_bool(0.5);
                let scores = ids[..100]
                    .iter()
                    .map(|&i| {
                        let s = if coarse { rng.random_range(0..8) as f64 / 8.0 } else { rng.random::<f64>() };
                        (i, s)
                    })
                    .collect();
                ScoredCandidates {
                    positive_item: ids[rng.random_range(0..100)],
                    scores,
                }
            })
            .collect();
        let (hr, ndcg) = hr_ndcg(&sets).unwrap();
        let ranks: Vec<usize> = sets.iter().map(oracle_rank).collect();
        let n = ranks.len() as f64;
        let o_hr = ranks.iter().filter(|&&r| r <= 10).count() as f64 / n;
        let o_ndcg = ranks
            .iter()
            .map(|&r| if r <= 10 { 1.0 / ((r + 1) as f64).log2() } else { 0.0 })
            .sum::<f64>()
            / n;
        worst = worst.max((hr - o_hr).abs()).max((ndcg - o_ndcg).abs());
    }
    let at = |rank: usize| {
        let scores = (0..100).map(|i| (i, if i < rank { 1.0 } else { 0.0 })).collect();
        hr_ndcg(&[ScoredCandidates {
            positive_item: rank - 1,
            scores,
        }])
        .unwrap()
    };
    let (hr1, nd1) = at(1);
    let (hr3, nd3) = at(3);
    let exact = hr1 == 1.0 && nd1 == 1.0 && hr3 == 1.0 && (nd3 - 0.5).abs() < 1e-15;
    (
        worst < 1e-12 && exact,
        format!("max deviation {worst:.1e} on 1000 tables; rank 1 NDCG {nd1}, rank 3 NDCG {nd3}"),
    )
}

// ------------------------------------------------------------ determinism

fn end_to_end(dir: &std::path::Path) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let data = cross_domain(&CrossDomainConfig::default(), 11);
    let corpora = Corpora::from_records(&data.source, &data.target).unwrap();
    let config = RunConfig {
        k: 8,
        epochs_phase1: 3,
        epochs_phase2: 2,
        seeds: vec![1, 2],
        ..Default::default()
    };
    let llm = MockLlm::new(data.kb());
    let enc = MockTextEncoder::default();
    let (pools, _) = discover(&config, &corpora, &llm, false, Some(dir)).unwrap();
    let subspaces = build_subspaces(&config, &pools, &enc).unwrap();
    let (report, _) = run_grid(&config, &corpora, &enc, Some(&subspaces), &[1.0], Some(&dir.join("ckpt"))).unwrap();
    let csv = dir.join("metrics.csv");
    report.write_csv(&csv, &config.hash()).unwrap();
    let read = |name: &str| std::fs::read(dir.join(name)).unwrap();
    (read("metrics.csv"), read("pool_source.json"), read("pool_target.json"))
}

fn determinism() -> (bool, String) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = end_to_end(a.path());
    let rb = end_to_end(b.path());
    let same = [ra.0 == rb.0, ra.1 == rb.1, ra.2 == rb.2];
    (
        same.iter().all(|&s| s),
        format!("metrics csv identical {}, source pool {}, target pool {}", same[0], same[1], same[2]),
    )
}

// ---------------------------------------------------------- weight simplex

fn weight_simplex() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let k = 8;
    let mut worst_sum = 0.0f64;
    let mut min_w = f64::INFINITY;
    let mut checked = 0;
    for &j in &[1usize, 2, 10, 50] {
        let mut store = ParamStore::new();
        let head = PredictorParams::new(&mut store, "pred", k, &mut rng);
        for i in 0..10_000 {
            if i % 500 == 0 {
                store.jitter(1.0, &mut rng);
            }
            let scale = [0.1, 1.0, 10.0][i % 3];
            let eu: Vec<f64> = (0..k).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let ev: Vec<f64> = (0..k).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let c = DenseMatrix::random_normal(j, k, scale, &mut rng);
            let psi = selection_weights(&store, &head, &eu, &ev, &c).unwrap();
            worst_sum = worst_sum.max((psi.iter().sum::<f64>() - 1.0).abs());
            min_w = psi.iter().copied().fold(min_w, f64::min);
            checked += 1;
        }
    }
    (
        worst_sum <= 1e-12 && min_w >= 0.0,
        format!("{checked} inputs, max |sum - 1| {worst_sum:.1e}, min weight {min_w:.1e}"),
    )
}

// ------------------------------------------------------------------ runner

#[test]
fn acceptance() {
    let criteria: [(usize, &str, u64, Check); 10] = [
        (1, "gradient integrity", 120, gradient_integrity),
        (2, "acyclicity oracle", 30, acyclicity_oracle),
        (3, "dag recovery", 300, dag_recovery),
        (4, "markov blanket", 300, markov_blanket_oracle),
        (5, "planted confounders", 120, planted_confounders),
        (6, "deconfounding", 600, deconfounding),
        (7, "dual-level", 600, dual_level),
        (8, "metric oracle", 10, metric_oracle),
        (9, "determinism", 900, determinism),
        (10, "weight simplex", 10, weight_simplex),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, name, limit, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = ok && in_time;
        report(&format!(
            "[{}] {n:>2}. {name}: {detail} ({:.1}s, limit {limit}s{})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over time" }
        ));
        if !pass {
            failed.push(format!("{n}. {name}"));
        }
    }
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
