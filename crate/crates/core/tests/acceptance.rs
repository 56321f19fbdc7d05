//! One test per acceptance criterion. Each prints a single
//! `PASS`/`FAIL <criterion>: <detail>` line (run with `--nocapture` to see
//! them) and then asserts.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use citetax_core::encoder::{score_level, EncoderParams, EncoderShape, PairProbTable, Scope};
use citetax_core::eval::{evaluate, synth_graph, SynthConfig};
use citetax_core::graph::{CitationGraph, EmbeddingMatrix, LevelGraph, PaperNode};
use citetax_core::hiclust::{
    aggregate, build_hierarchy, hard_cluster, soft_cluster_level1, ClusterSet, Hierarchy, HierarchyConfig,
};
use citetax_core::labels::{GoldHierarchyLabels, LevelLabels};
use citetax_core::matrix::Matrix;
use citetax_core::taxonomy::{assemble, TaxonomyTree};
use citetax_core::train::{
    cluster_loss, grad_check, himulcon_loss, train_clustering, ContrastConfig, ObjectiveConfig, SupervisedPair,
    TrainConfig, TrainingProblem,
};
use citetax_core::verbalize::{verbalize_hierarchy, StubGenerator, VerbalizeConfig, VerbalizeExtras};

const ORACLE_INSTANCES: usize = 1000;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const GRAD_COORDS: usize = 200;
const GRAD_EPS: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const BCE_TOL: f64 = 1e-12;
const CONTRAST_TOL: f64 = 1e-10;
const PLANTED_SEED: u64 = 7;
const PLANTED_MAX_EPOCHS: usize = 500;
const PLANTED_L1: f64 = 0.9;
const PLANTED_L2: f64 = 0.85;
const PLANTED_BUDGET: Duration = Duration::from_secs(300);
const RANDOM_GRAPHS: usize = 200;
const AGG_TOL: f64 = 1e-12;

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn bare_graph(level: usize, n: usize, edges: Vec<(usize, usize)>) -> LevelGraph {
    LevelGraph::new(
        level,
        (0..n).map(|i| format!("n{i}")).collect(),
        edges,
        Matrix::zeros(n, 1),
        (0..n).map(|i| vec![i]).collect(),
    )
    .unwrap()
}

/// A random instance of at most 8 nodes. Probabilities and densities come
/// from coarse grids so that ties and the exact threshold both occur.
fn random_instance(rng: &mut ChaCha8Rng) -> (usize, BTreeMap<(usize, usize), f64>, Vec<f64>) {
    let n = rng.random_range(1..=8);
    let density = rng.random_range(0.2..1.0);
    let mut probs = BTreeMap::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                probs.insert((u, v), rng.random_range(0..=10) as f64 / 10.0);
            }
        }
    }
    let d = (0..n).map(|_| rng.random_range(0..4) as f64 / 4.0).collect();
    (n, probs, d)
}

fn table(probs: &BTreeMap<(usize, usize), f64>) -> PairProbTable {
    let mut t = PairProbTable::new();
    for (&(u, v), &p) in probs {
        t.insert(u, v, p);
    }
    t
}

fn prob(probs: &BTreeMap<(usize, usize), f64>, u: usize, v: usize) -> Option<f64> {
    probs.get(&(u.min(v), u.max(v))).copied()
}

fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Candidate sets as bitmasks, subset and singleton removal, then the
/// strongest-covered-partner fallback.
fn brute_soft(n: usize, probs: &BTreeMap<(usize, usize), f64>, d: &[f64], tau: f64) -> BTreeSet<Vec<usize>> {
    let above = |v: usize, u: usize| d[v] > d[u] || (d[v] == d[u] && v > u);
    let cands: BTreeSet<u32> = (0..n)
        .map(|u| {
            (0..n)
                .filter(|&v| v != u && prob(probs, u, v).is_some_and(|p| p > tau) && above(v, u))
                .fold(1u32 << u, |m, v| m | 1 << v)
        })
        .collect();
    let kept: Vec<Vec<usize>> = cands
        .iter()
        .filter(|&&c| c.count_ones() >= 2 && !cands.iter().any(|&o| o != c && o & c == c))
        .map(|&c| members(c))
        .collect();
    let covered: u32 = kept.iter().flatten().fold(0, |m, &v| m | 1 << v);
    let mut out: Vec<Vec<usize>> = kept.clone();
    for u in (0..n).filter(|&u| covered & (1 << u) == 0) {
        let mut best: Option<(usize, f64)> = None;
        for v in (0..n).filter(|&v| v != u && covered & (1 << v) != 0) {
            if let Some(p) = prob(probs, u, v) {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((v, p));
                }
            }
        }
        match best {
            Some((v, _)) => {
                // `out` starts as a copy of `kept`, so indices line up.
                let (i, _) = kept.iter().enumerate().filter(|(_, c)| c.contains(&v)).min_by_key(|(_, c)| *c).unwrap();
                out[i].push(u);
            }
            None => out.push(vec![u]),
        }
    }
    out.into_iter()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect()
}

#[test]
fn soft_clustering_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut agree = 0;
    for _ in 0..ORACLE_INSTANCES {
        let (n, probs, d) = random_instance(&mut rng);
        let tau = rng.random_range(0..10) as f64 / 10.0;
        let edges: Vec<(usize, usize)> = probs.keys().copied().collect();
        let got = soft_cluster_level1(&bare_graph(1, n, edges), &table(&probs), &d, tau).unwrap();
        let got: BTreeSet<Vec<usize>> = got.clusters().iter().cloned().collect();
        agree += usize::from(got == brute_soft(n, &probs, &d, tau));
    }
    let t = start.elapsed();
    let pass = agree == ORACLE_INSTANCES && t < ORACLE_BUDGET;
    report(
        "soft-clustering oracle equivalence",
        pass,
        format!("{agree}/{ORACLE_INSTANCES} instances match in {t:.2?} (budget {ORACLE_BUDGET:?})"),
    );
    assert!(pass);
}

/// Argmax links (ties to the smaller id), then connected components by
/// repeated label relaxation.
fn brute_hard(n: usize, probs: &BTreeMap<(usize, usize), f64>) -> BTreeSet<Vec<usize>> {
    let mut links = Vec::new();
    for u in 0..n {
        let best = (0..n)
            .filter(|&v| v != u)
            .filter_map(|v| prob(probs, u, v).map(|p| (v, p)))
            .fold(None, |b: Option<(usize, f64)>, (v, p)| match b {
                Some((_, bp)) if bp >= p => b,
                _ => Some((v, p)),
            });
        links.push((u, best.unwrap().0));
    }
    let mut label: Vec<usize> = (0..n).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &(a, b) in &links {
            let m = label[a].min(label[b]);
            if label[a] != m || label[b] != m {
                label[a] = m;
                label[b] = m;
                changed = true;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, l) in label.into_iter().enumerate() {
        groups.entry(l).or_default().push(v);
    }
    groups.into_values().collect()
}

#[test]
fn hard_clustering_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let start = Instant::now();
    let mut agree = 0;
    for _ in 0..ORACLE_INSTANCES {
        let (n, mut probs, _) = random_instance(&mut rng);
        let n = n.max(2);
        // Every node needs a scored partner at a hard level.
        for u in 0..n {
            if !(0..n).any(|v| v != u && prob(&probs, u, v).is_some()) {
                let v = (u + 1) % n;
                probs.insert((u.min(v), u.max(v)), rng.random_range(0..=10) as f64 / 10.0);
            }
        }
        let edges: Vec<(usize, usize)> = probs.keys().copied().collect();
        let got = hard_cluster(&bare_graph(2, n, edges), &table(&probs)).unwrap();
        let got: BTreeSet<Vec<usize>> = got.clusters().iter().cloned().collect();
        agree += usize::from(got == brute_hard(n, &probs));
    }
    let t = start.elapsed();
    let pass = agree == ORACLE_INSTANCES && t < ORACLE_BUDGET;
    report(
        "hard-clustering oracle equivalence",
        pass,
        format!("{agree}/{ORACLE_INSTANCES} instances match in {t:.2?} (budget {ORACLE_BUDGET:?})"),
    );
    assert!(pass);
}

fn six_node_problem() -> TrainingProblem {
    let edges = vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Matrix::from_vec(6, 4, (0..24).map(|_| rng.random_range(-1.0..1.0)).collect());
    let base = LevelGraph::new(
        1,
        (0..6).map(|i| format!("p{i}")).collect(),
        edges,
        x,
        (0..6).map(|i| vec![i]).collect(),
    )
    .unwrap();
    let labels = GoldHierarchyLabels::new(vec![
        LevelLabels::from_partition(&[0, 0, 1, 1, 2, 2]).unwrap(),
        LevelLabels::from_partition(&[0, 0, 0, 0, 1, 1]).unwrap(),
    ])
    .unwrap();
    TrainingProblem::new(base, labels).unwrap()
}

#[test]
fn gradient_correctness() {
    let problem = six_node_problem();
    let shape = EncoderShape {
        hidden: 16,
        heads: 2,
        scorer_hidden: 16,
        scorers: 2,
        ..EncoderShape::new(4)
    };
    let params = EncoderParams::init(shape, 11).unwrap();
    let sup = problem.supervision(problem.base().edges()).unwrap();
    let config = ObjectiveConfig::default();
    let f = |theta: &[f64], want: bool| {
        let mut q = params.clone();
        q.as_mut_slice().copy_from_slice(theta);
        problem.evaluate(&q, &sup, &config, want).map(|(l, g)| (l.total, g))
    };
    let start = Instant::now();
    let r = grad_check(f, params.as_slice(), GRAD_EPS, GRAD_COORDS, 5).unwrap();
    let t = start.elapsed();
    let pass = r.checked == GRAD_COORDS && r.max_rel_error < GRAD_TOL && t < GRAD_BUDGET;
    report(
        "gradient correctness",
        pass,
        format!(
            "{} coordinates of {}, eps {GRAD_EPS:e}, max relative error {:.3e} (< {GRAD_TOL:e}) in {t:.2?}",
            r.checked,
            params.len(),
            r.max_rel_error
        ),
    );
    assert!(pass);
}

#[test]
fn closed_form_loss_values() {
    // Three levels of pairs, every probability 0.5: each level's mean BCE is ln 2.
    let levels = 3;
    let probs: Vec<PairProbTable> = (0..levels)
        .map(|_| {
            let mut t = PairProbTable::new();
            for (u, v) in [(0, 1), (1, 2), (0, 3)] {
                t.insert(u, v, 0.5);
            }
            t
        })
        .collect();
    let pairs: Vec<Vec<SupervisedPair>> = (0..levels)
        .map(|l| {
            [(0, 1), (1, 2), (0, 3)]
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| SupervisedPair {
                    a,
                    b,
                    target: ((i + l) % 2) as f64,
                })
                .collect()
        })
        .collect();
    let bce = cluster_loss(&probs, &pairs).unwrap();
    let bce_expected = levels as f64 * std::f64::consts::LN_2;
    let bce_ok = (bce - bce_expected).abs() <= BCE_TOL;

    // Identical rows make every similarity equal; with no singleton gold
    // clusters each anchor at each level contributes log(N - 1), and the
    // level weights average to one.
    let n = 8;
    let labels = GoldHierarchyLabels::new(vec![
        LevelLabels::from_partition(&[0, 0, 1, 1, 2, 2, 3, 3]).unwrap(),
        LevelLabels::from_partition(&[0, 0, 0, 0, 1, 1, 1, 1]).unwrap(),
    ])
    .unwrap();
    let same = Matrix::from_rows(&vec![vec![0.3, -1.2, 2.0]; n]);
    let config = ContrastConfig::default();
    let uniform = himulcon_loss(&same, &labels, &config).unwrap();
    let uniform_expected = n as f64 * ((n - 1) as f64).ln();
    let uniform_ok = (uniform - uniform_expected).abs() <= CONTRAST_TOL;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = Matrix::from_vec(n, 5, (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect());
    let base = himulcon_loss(&h, &labels, &config).unwrap();
    let worst = [1e-3, 0.5, 7.0, 1e4]
        .iter()
        .map(|&c| (himulcon_loss(&h.map(|v| v * c), &labels, &config).unwrap() - base).abs())
        .fold(0.0, f64::max);
    let scale_ok = worst <= CONTRAST_TOL;

    let pass = bce_ok && uniform_ok && scale_ok;
    report(
        "closed-form loss values",
        pass,
        format!(
            "cluster_loss {bce:.15} vs {levels}·ln2 (±{BCE_TOL:e}); uniform contrast {uniform:.12} vs N·ln(N−1) = {uniform_expected:.12} (±{CONTRAST_TOL:e}); rescale drift {worst:.2e} (±{CONTRAST_TOL:e})"
        ),
    );
    assert!(pass);
}

/// The acceptance training setup: both training and clustering score every
/// pair, at a learning rate of 0.01 for 150 epochs.
fn planted_train_config() -> TrainConfig {
    TrainConfig {
        seed: PLANTED_SEED,
        learning_rate: 0.01,
        epochs: 150,
        scope: Scope::AllPairs,
        ..TrainConfig::default()
    }
}

#[test]
fn planted_hierarchy_recovery() {
    let start = Instant::now();
    let s = synth_graph(&SynthConfig {
        branching: vec![2, 2],
        block_size: 15,
        intra: vec![0.9],
        inter: 0.05,
        noise: 0.1,
        seed: PLANTED_SEED,
        ..SynthConfig::default()
    })
    .unwrap();
    let config = planted_train_config();
    assert!(config.epochs <= PLANTED_MAX_EPOCHS);
    let (params, _) = train_clustering(&s.graph, &s.embeddings, &s.labels, &config).unwrap();
    let hc = HierarchyConfig {
        scope: Scope::AllPairs,
        ..HierarchyConfig::default()
    };
    let h = build_hierarchy(&s.graph, &s.embeddings, &params, &hc).unwrap();
    let r = evaluate(&h, &s.labels, s.embeddings.matrix(), PLANTED_SEED).unwrap();
    let t = start.elapsed();
    let (l1, l2) = (&r.levels[0], &r.levels[1]);
    let thresholds = l1.accuracy >= PLANTED_L1 && l2.accuracy >= PLANTED_L2;
    let beats = [l1, l2].map(|row| row.accuracy > row.kmeans_accuracy);
    let pass = thresholds && beats.iter().all(|&b| b) && t < PLANTED_BUDGET;
    let mut detail = format!(
        "level 1 {:.4} (≥ {PLANTED_L1}) vs k-means {:.4}; level 2 {:.4} (≥ {PLANTED_L2}) vs k-means {:.4}; {t:.1?}",
        l1.accuracy, l1.kmeans_accuracy, l2.accuracy, l2.kmeans_accuracy
    );
    for (row, b) in [l1, l2].iter().zip(beats) {
        if !b {
            detail.push_str(&format!(
                "; does not beat k-means at level {} ({:.4} vs {:.4})",
                row.level, row.accuracy, row.kmeans_accuracy
            ));
        }
    }
    report("planted-hierarchy recovery", pass, detail);
    assert!(thresholds, "accuracy thresholds missed");
    assert!(t < PLANTED_BUDGET);
    assert!(beats.iter().all(|&b| b), "HiClustering does not beat k-means at every level");
}

const WORDS: [&str; 12] = [
    "graph", "kernel", "spectral", "density", "citation", "topic", "label", "tree", "network", "embedding", "survey",
    "model",
];

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> (CitationGraph, EmbeddingMatrix) {
    let nodes: Vec<PaperNode> = (0..n)
        .map(|i| {
            let pick = |rng: &mut ChaCha8Rng| WORDS[rng.random_range(0..WORDS.len())];
            let title = format!("{} {}", pick(rng), pick(rng));
            let abs = format!("{} {} {}", pick(rng), pick(rng), pick(rng));
            PaperNode::new(format!("q{i:03}"), title, abs)
        })
        .collect();
    let p = rng.random_range(0.02..0.4);
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..u {
            if rng.random::<f64>() < p {
                edges.push((ids[u].as_str(), ids[v].as_str()));
            }
        }
    }
    let (g, _) = CitationGraph::new(nodes, edges).unwrap();
    let x = Matrix::from_vec(n, 6, (0..n * 6).map(|_| rng.random_range(-1.0..1.0)).collect());
    (g, EmbeddingMatrix::new(x).unwrap())
}

fn small_shape(dim: usize) -> EncoderShape {
    EncoderShape {
        hidden: 8,
        heads: 2,
        scorer_hidden: 8,
        ..EncoderShape::new(dim)
    }
}

/// Everything the hierarchy invariants demand, or the first violation.
fn check_invariants(h: &Hierarchy, params: &EncoderParams) -> Result<(), String> {
    let n = h.base().len();
    let cfg = &h.config;
    for (l, pair) in h.levels.windows(2).enumerate() {
        let (below, above) = (&pair[0], &pair[1]);
        let clusters = &h.assignments[l];
        if clusters.len() != above.len() {
            return Err(format!("level {} has {} nodes for {} clusters", l + 2, above.len(), clusters.len()));
        }
        for (i, c) in clusters.clusters().iter().enumerate() {
            let mut union: Vec<usize> = c.iter().flat_map(|&v| below.members(v).iter().copied()).collect();
            union.sort_unstable();
            union.dedup();
            if union != above.members(i) {
                return Err(format!("level {} node {i} members differ from its cluster's", l + 2));
            }
        }
        let mut covered: Vec<usize> = above.all_members().iter().flatten().copied().collect();
        covered.sort_unstable();
        covered.dedup();
        if covered != (0..n).collect::<Vec<_>>() {
            return Err(format!("level {} loses papers", l + 2));
        }
        if below.level() >= 2 {
            let mut seen = vec![0; below.len()];
            clusters.clusters().iter().flatten().for_each(|&v| seen[v] += 1);
            if clusters.overlap_allowed() || seen.iter().any(|&k| k != 1) {
                return Err(format!("level {} clustering is not a partition", below.level()));
            }
            if above.len() >= below.len() {
                return Err(format!("level {} did not coarsen", below.level()));
            }
        } else if above.len() > below.len() {
            return Err("level 1 grew".into());
        }
    }
    let top = h.top();
    if top.level() > cfg.max_levels {
        return Err(format!("built level {} past max_levels {}", top.level(), cfg.max_levels));
    }
    if top.len() > cfg.root_size && top.level() < cfg.max_levels {
        // The only other exit: clustering the top level merged nothing.
        if top.level() == 1 {
            return Err("stopped at level 1".into());
        }
        let scores = score_level(top, params, cfg.scope).map_err(|e| e.to_string())?;
        let again = hard_cluster(top, &scores.probs).map_err(|e| e.to_string())?;
        if again.len() != top.len() {
            return Err(format!("stopped at level {} although it still merges", top.level()));
        }
    }
    Ok(())
}

fn stub_taxonomy(h: &Hierarchy, g: &CitationGraph, instruction: &str) -> TaxonomyTree {
    let config = VerbalizeConfig {
        concurrency: 1,
        backoff_ms: 0,
        ..VerbalizeConfig::default()
    };
    let labels = verbalize_hierarchy(h, g.nodes(), instruction, &StubGenerator, &config, VerbalizeExtras::default())
        .unwrap();
    let ids: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
    assemble(h, &labels, instruction, &ids).unwrap()
}

#[test]
fn hierarchy_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    let mut depth = BTreeMap::new();
    for run in 0..RANDOM_GRAPHS {
        let n = rng.random_range(2..40);
        let (g, x) = random_corpus(&mut rng, n);
        let params = EncoderParams::init(small_shape(6), run as u64).unwrap();
        let config = HierarchyConfig {
            scope: if rng.random() { Scope::AllPairs } else { Scope::Neighbors },
            p_tau: rng.random_range(0..9) as f64 / 10.0,
            root_size: rng.random_range(1..4),
            max_levels: rng.random_range(2..6),
        };
        let h = build_hierarchy(&g, &x, &params, &config).unwrap();
        *depth.entry(h.num_levels()).or_insert(0) += 1;
        let verdict = check_invariants(&h, &params);
        if let Err(e) = verdict {
            failures.push(format!("graph {run}: {e}"));
        }
    }
    let pass = failures.is_empty();
    report(
        "hierarchy invariants",
        pass,
        format!(
            "{}/{RANDOM_GRAPHS} random graphs satisfy member conservation, hard-level partitioning, monotone coarsening and the stop rule; levels built {depth:?}{}",
            RANDOM_GRAPHS - failures.len(),
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    );
    assert!(pass);
}

fn pipeline_bytes(seed: u64) -> (String, String) {
    let s = synth_graph(&SynthConfig {
        seed,
        block_size: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let config = TrainConfig {
        epochs: 20,
        ..planted_train_config()
    };
    let config = TrainConfig { seed, ..config };
    let (params, _) = train_clustering(&s.graph, &s.embeddings, &s.labels, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("params.ckpt");
    params.save(&ck).unwrap();
    let params = EncoderParams::load(&ck).unwrap();
    let hc = HierarchyConfig {
        scope: Scope::AllPairs,
        ..HierarchyConfig::default()
    };
    let h = build_hierarchy(&s.graph, &s.embeddings, &params, &hc).unwrap();
    let tree = stub_taxonomy(&h, &s.graph, "planted survey");
    let (json, dot) = (dir.path().join("t.json"), dir.path().join("t.dot"));
    tree.export_json(&json).unwrap();
    tree.export_dot(&dot).unwrap();
    (
        std::fs::read_to_string(json).unwrap(),
        std::fs::read_to_string(dot).unwrap(),
    )
}

#[test]
fn end_to_end_determinism() {
    let a = pipeline_bytes(13);
    let b = pipeline_bytes(13);
    let same = a == b;
    let c = pipeline_bytes(14);
    let pass = same && !a.0.is_empty() && !a.1.is_empty();
    report(
        "end-to-end determinism",
        pass,
        format!(
            "synth → train → cluster → verbalize(stub) → export twice: JSON {} bytes, DOT {} bytes, identical: {same}; another seed differs: {}",
            a.0.len(),
            a.1.len(),
            a != c
        ),
    );
    assert!(pass);
}

#[test]
fn taxonomy_validity() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut checked = 0;
    let mut problems = Vec::new();
    let mut trees = Vec::new();
    for run in 0..RANDOM_GRAPHS {
        let n = rng.random_range(2..30);
        let (g, x) = random_corpus(&mut rng, n);
        let params = EncoderParams::init(small_shape(6), run as u64).unwrap();
        let config = HierarchyConfig {
            scope: if run % 2 == 0 { Scope::AllPairs } else { Scope::Neighbors },
            ..HierarchyConfig::default()
        };
        let h = build_hierarchy(&g, &x, &params, &config).unwrap();
        trees.push((run, stub_taxonomy(&h, &g, "random survey")));
    }
    let s = synth_graph(&SynthConfig::default()).unwrap();
    let (params, _) = train_clustering(
        &s.graph,
        &s.embeddings,
        &s.labels,
        &TrainConfig {
            epochs: 10,
            ..planted_train_config()
        },
    )
    .unwrap();
    for scope in [Scope::Neighbors, Scope::AllPairs] {
        let hc = HierarchyConfig {
            scope,
            ..HierarchyConfig::default()
        };
        let h = build_hierarchy(&s.graph, &s.embeddings, &params, &hc).unwrap();
        trees.push((RANDOM_GRAPHS, stub_taxonomy(&h, &s.graph, "planted survey")));
    }
    for (run, tree) in &trees {
        checked += 1;
        let v = tree.validate();
        if !v.is_valid() {
            problems.push(format!("tree {run}: {v}"));
            continue;
        }
        let json = tree.to_json().unwrap();
        let back = TaxonomyTree::from_json(&json).unwrap();
        if back.to_json().unwrap() != json || back.to_dot().unwrap() != tree.to_dot().unwrap() || &back != tree {
            problems.push(format!("tree {run}: export round trip changed bytes"));
        }
    }
    let pass = problems.is_empty();
    report(
        "taxonomy validity",
        pass,
        format!(
            "{}/{checked} driver-produced trees validate with zero violations and round-trip byte-stable{}",
            checked - problems.len(),
            problems.first().map(|p| format!("; first problem {p}")).unwrap_or_default()
        ),
    );
    assert!(pass);
}

#[test]
fn aggregation_closed_forms() {
    let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![3.0, -2.0]]);
    let d = [0.2, 0.7, 0.1];
    let singles = aggregate(&ClusterSet::new(1, vec![vec![0], vec![1], vec![2]], false), &h, &d).unwrap();
    let singleton_err = (0..3)
        .flat_map(|z| (0..2).map(move |c| (z, c)))
        .map(|(z, c)| (singles.get(z, c) - 2.0 * h.get(z, c)).abs())
        .fold(0.0, f64::max);
    // {0, 1}: mean (0.5, 0.5) plus the denser member 1, (0, 1).
    let pair = aggregate(&ClusterSet::new(1, vec![vec![0, 1], vec![2]], true), &h, &d).unwrap();
    let pair_err = (pair.get(0, 0) - 0.5).abs().max((pair.get(0, 1) - 1.5).abs());
    let pass = singleton_err <= AGG_TOL && pair_err <= AGG_TOL;
    report(
        "aggregation closed forms",
        pass,
        format!(
            "singleton vs 2·h_z max error {singleton_err:.1e}; two-member example ({}, {}) vs (0.5, 1.5) max error {pair_err:.1e} (±{AGG_TOL:e})",
            pair.get(0, 0),
            pair.get(0, 1)
        ),
    );
    assert!(pass);
}
