use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citetax_core::taxonomy::TaxonomyTree;

fn citetax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citetax"))
        .args(args)
        .output()
        .expect("run citetax")
}

fn ok(args: &[&str]) -> Output {
    let out = citetax(args);
    assert!(
        out.status.success(),
        "citetax {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

struct Planted {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Planted {
    fn new(seed: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&["synth", "--out-dir", s(&root.join("d")), "--seed", seed]);
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn data(&self, name: &str) -> String {
        s(&self.root.join("d").join(name)).to_string()
    }

    fn graph(&self) -> Vec<String> {
        vec![
            "--nodes".into(),
            self.data("nodes.jsonl"),
            "--edges".into(),
            self.data("edges.tsv"),
        ]
    }

    fn run(&self, head: &[&str], tail: &[&str]) -> Output {
        let g = self.graph();
        let mut args: Vec<&str> = head.to_vec();
        args.extend(g.iter().map(String::as_str));
        args.extend_from_slice(tail);
        ok(&args)
    }

    fn oracle_hierarchy(&self) -> PathBuf {
        let h = self.path("h.json");
        self.run(
            &["cluster"],
            &[
                "--embeddings",
                &self.data("embeddings.tsv"),
                "--oracle-labels",
                &self.data("labels.tsv"),
                "--scope",
                "all-pairs",
                "--out",
                s(&h),
            ],
        );
        h
    }
}

#[test]
fn oracle_pipeline_scores_one_at_every_level() {
    let p = Planted::new("2");
    let h = p.oracle_hierarchy();
    let out = p.run(
        &["eval"],
        &[
            "--embeddings",
            &p.data("embeddings.tsv"),
            "--hierarchy",
            s(&h),
            "--labels",
            &p.data("labels.tsv"),
            "--seed",
            "2",
        ],
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["metric"], "pairwise_same_cluster_accuracy");
    let levels = report["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    for row in levels {
        assert_eq!(row["accuracy"], 1.0);
        assert_eq!(row["predicted"], true);
    }
    assert_eq!(report["average"], 1.0);
}

#[test]
fn stub_verbalization_gives_a_valid_taxonomy() {
    let p = Planted::new("4");
    let h = p.oracle_hierarchy();
    let (labels, tax) = (p.path("labels.json"), p.path("tax.json"));
    let transcript = p.path("t.jsonl");
    p.run(
        &["verbalize"],
        &[
            "--hierarchy",
            s(&h),
            "--instruction",
            "planted topics",
            "--out",
            s(&labels),
            "--taxonomy",
            s(&tax),
            "--transcript",
            s(&transcript),
        ],
    );
    let tree = TaxonomyTree::load(&tax).unwrap();
    assert!(tree.validate().is_valid());
    assert_eq!(tree.root, "root");
    assert_eq!(tree.node("root").unwrap().label, "planted topics");
    assert_eq!(tree.len(), 4 + 2 + 1);
    assert_eq!(fs::read_to_string(&transcript).unwrap().lines().count(), 6);

    let (json, dot) = (p.path("again.json"), p.path("tax.dot"));
    ok(&[
        "export",
        "--hierarchy",
        s(&h),
        "--labels",
        s(&labels),
        "--json",
        s(&json),
        "--dot",
        s(&dot),
    ]);
    assert_eq!(fs::read(&json).unwrap(), fs::read(&tax).unwrap());
    let dot = fs::read_to_string(&dot).unwrap();
    assert_eq!(dot.matches(" -> ").count(), 6);
    assert!(dot.contains("(60 papers)"));
}

#[test]
fn trained_pipeline_is_deterministic() {
    let p = Planted::new("5");
    let config = p.path("c.toml");
    fs::write(
        &config,
        "[train]\nlearning_rate = 0.01\n[train.encoder]\nhidden = 8\nheads = 2\nscorer_hidden = 8\n[cluster]\nscope = \"all_pairs\"\n",
    )
    .unwrap();
    let run = |tag: &str| {
        let (ck, rep, h) = (p.path(&format!("{tag}.ckpt")), p.path(&format!("{tag}.r.json")), p.path(&format!("{tag}.h.json")));
        p.run(
            &["--config", s(&config), "train"],
            &[
                "--embeddings",
                &p.data("embeddings.tsv"),
                "--labels",
                &p.data("labels.tsv"),
                "--out",
                s(&ck),
                "--report",
                s(&rep),
                "--seed",
                "3",
                "--epochs",
                "3",
            ],
        );
        p.run(
            &["--config", s(&config), "cluster"],
            &["--embeddings", &p.data("embeddings.tsv"), "--params", s(&ck), "--out", s(&h)],
        );
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
        assert_eq!(report["epochs"].as_array().unwrap().len(), 3);
        (fs::read(&ck).unwrap(), fs::read(&h).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn synth_is_byte_reproducible() {
    let (a, b) = (Planted::new("9"), Planted::new("9"));
    for f in ["nodes.jsonl", "edges.tsv", "embeddings.tsv", "labels.tsv"] {
        assert_eq!(fs::read(a.data(f)).unwrap(), fs::read(b.data(f)).unwrap(), "{f}");
    }
    let c = Planted::new("10");
    assert_ne!(fs::read(a.data("edges.tsv")).unwrap(), fs::read(c.data("edges.tsv")).unwrap());
}

#[test]
fn ingest_reports_dropped_edges() {
    let dir = tempfile::tempdir().unwrap();
    let (nodes, edges) = (dir.path().join("n.jsonl"), dir.path().join("e.tsv"));
    fs::write(
        &nodes,
        "{\"id\": \"a\", \"title\": \"A\", \"abstract\": \"x\"}\n{\"id\": \"b\", \"title\": \"B\", \"abstract\": \"y\"}\n",
    )
    .unwrap();
    fs::write(&edges, "a\tb\na\ta\na\tb\n").unwrap();
    let clean = dir.path().join("clean.tsv");
    let out = ok(&["ingest", "--nodes", s(&nodes), "--edges", s(&edges), "--out-edges", s(&clean)]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["edges"], 1);
    assert_eq!(report["self_loops_dropped"], 1);
    assert_eq!(report["duplicates_dropped"], 1);
    assert_eq!(fs::read_to_string(&clean).unwrap(), "a\tb\n");
}

#[test]
fn embed_formats_load_alike() {
    let p = Planted::new("1");
    let (txt, bin) = (p.path("e.tsv"), p.path("e.bin"));
    p.run(&["embed"], &["--out", s(&txt), "--dim", "16", "--seed", "4"]);
    p.run(&["embed"], &["--out", s(&bin), "--dim", "16", "--seed", "4", "--binary"]);
    let (g, _) = citetax_core::graph::load_citation_graph(Path::new(&p.data("nodes.jsonl")), Path::new(&p.data("edges.tsv"))).unwrap();
    let a = citetax_core::graph::load_embeddings(&txt, &g).unwrap();
    let b = citetax_core::graph::load_embeddings(&bin, &g).unwrap();
    assert_eq!(a.dim(), 16);
    for (x, y) in a.matrix().as_slice().iter().zip(b.matrix().as_slice()) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = citetax(&["bogus"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = citetax(&["ingest", "--nodes", s(&missing), "--edges", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    let config = dir.path().join("bad.toml");
    fs::write(&config, "[cluster]\np_tau = 2.0\n").unwrap();
    let out = citetax(&["--config", s(&config), "synth", "--out-dir", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_tau"));

    let out = citetax(&["cluster", "--nodes", "n", "--edges", "e", "--embeddings", "x", "--out", "h"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--params"));
}

#[test]
fn hierarchy_from_other_papers_is_refused() {
    let (p, q) = (Planted::new("3"), Planted::new("3"));
    let h = p.oracle_hierarchy();
    let nodes = q.data("nodes.jsonl");
    let text = fs::read_to_string(&nodes).unwrap().replacen("\"p00\"", "\"zz\"", 1);
    fs::write(&nodes, text).unwrap();
    let edges = q.data("edges.tsv");
    let e = fs::read_to_string(&edges).unwrap().replace("\tp00\n", "\tzz\n");
    fs::write(&edges, e).unwrap();
    let out = citetax(&[
        "verbalize",
        "--nodes",
        &nodes,
        "--edges",
        &edges,
        "--hierarchy",
        s(&h),
        "--instruction",
        "q",
        "--out",
        s(&q.path("l.json")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("different paper list"));
}
