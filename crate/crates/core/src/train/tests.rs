use super::*;
use crate::labels::LevelLabels;
use crate::matrix::Matrix;

fn two_blocks() -> (LevelGraph, GoldHierarchyLabels) {
    let n = 10;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if (u < 5) == (v < 5) && (u + v) % 3 != 0 {
                edges.push((u, v));
            }
        }
    }
    edges.push((4, 5));
    let feats: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let s = if i < 5 { 1.0 } else { -1.0 };
            vec![s + 0.1 * i as f64, 0.3 * ((i * 7) % 5) as f64, -s * 0.5]
        })
        .collect();
    let g = LevelGraph::new(
        1,
        (0..n).map(|i| format!("p{i}")).collect(),
        edges,
        Matrix::from_rows(&feats),
        (0..n).map(|i| vec![i]).collect(),
    )
    .unwrap();
    let labels = GoldHierarchyLabels::new(vec![LevelLabels::from_partition(
        &(0..n).map(|i| usize::from(i >= 5)).collect::<Vec<_>>(),
    )
    .unwrap()])
    .unwrap();
    (g, labels)
}

fn small() -> TrainConfig {
    TrainConfig {
        encoder: EncoderSettings {
            hidden: 8,
            heads: 2,
            scorer_hidden: 8,
            ..Default::default()
        },
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn zero_learning_rate_keeps_parameters_and_loss() {
    let (g, labels) = two_blocks();
    let config = TrainConfig {
        learning_rate: 0.0,
        epochs: 5,
        patience: 100,
        ..small()
    };
    let (params, report) = train_level_graph(g, &labels, &config).unwrap();
    let init = EncoderParams::init(config.encoder.shape(3), config.seed).unwrap();
    assert_eq!(params, init);
    assert_eq!(report.epochs.len(), 5);
    let first = report.epochs[0].train.total;
    assert!(report.epochs.iter().all(|e| e.train.total == first));
}

#[test]
fn one_small_step_does_not_increase_loss() {
    let (g, labels) = two_blocks();
    let config = TrainConfig {
        learning_rate: 1e-4,
        epochs: 2,
        ..small()
    };
    let (_, report) = train_level_graph(g, &labels, &config).unwrap();
    assert!(report.epochs[1].train.total <= report.epochs[0].train.total);
}

#[test]
fn zero_epochs_return_initial_parameters() {
    let (g, labels) = two_blocks();
    let config = TrainConfig { epochs: 0, ..small() };
    let (params, report) = train_level_graph(g, &labels, &config).unwrap();
    assert_eq!(params, EncoderParams::init(config.encoder.shape(3), 7).unwrap());
    assert!(report.epochs.is_empty() && report.best_epoch.is_none());
}

#[test]
fn training_is_reproducible_and_reduces_loss() {
    let (g, labels) = two_blocks();
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs: 40,
        ..small()
    };
    let (a, ra) = train_level_graph(g.clone(), &labels, &config).unwrap();
    let (b, rb) = train_level_graph(g, &labels, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let first = ra.epochs[0].train.total;
    let best = ra.epochs[ra.best_epoch.unwrap()].train.total;
    assert!(best < first);
}

#[test]
fn early_stopping_honors_patience() {
    let (g, labels) = two_blocks();
    let config = TrainConfig {
        learning_rate: 0.0,
        epochs: 50,
        patience: 3,
        ..small()
    };
    let (_, report) = train_level_graph(g, &labels, &config).unwrap();
    assert!(report.stopped_early);
    assert_eq!(report.epochs.len(), 4);
    assert_eq!(report.best_epoch, Some(0));
}

#[test]
fn all_pairs_scope_supervises_every_pair() {
    let (g, labels) = two_blocks();
    let edges = g.edges().len();
    let config = TrainConfig { epochs: 3, ..small() };
    let (_, narrow) = train_level_graph(g.clone(), &labels, &config).unwrap();
    assert_eq!(narrow.train_pairs + narrow.validation_pairs, edges);
    let wide = TrainConfig {
        scope: Scope::AllPairs,
        ..config
    };
    let (_, report) = train_level_graph(g, &labels, &wide).unwrap();
    assert_eq!(report.train_pairs + report.validation_pairs, 45);
    assert_eq!(report.validation_pairs, 9);
}

#[test]
fn edge_split_is_seeded_and_disjoint() {
    let edges: Vec<(usize, usize)> = (0..20).map(|i| (i, i + 1)).collect();
    let (t1, v1) = split_edges(&edges, 0.2, 3);
    let (t2, v2) = split_edges(&edges, 0.2, 3);
    assert_eq!((&t1, &v1), (&t2, &v2));
    assert_eq!((t1.len(), v1.len()), (16, 4));
    assert!(v1.iter().all(|e| !t1.contains(e)));
    let (t, v) = split_edges(&edges[..1], 0.5, 0);
    assert_eq!((t.len(), v.len()), (1, 0));
}

#[test]
fn config_rejects_bad_values() {
    assert!(TrainConfig::default().validate().is_ok());
    for c in [
        TrainConfig { alpha: -1.0, ..Default::default() },
        TrainConfig { tau: 0.0, ..Default::default() },
        TrainConfig { delta: vec![1.0, -0.5], ..Default::default() },
        TrainConfig { validation_fraction: 1.0, ..Default::default() },
    ] {
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}

#[test]
fn report_round_trips_through_json() {
    let (g, labels) = two_blocks();
    let (_, report) = train_level_graph(g, &labels, &TrainConfig { epochs: 2, ..small() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    report.write(&p).unwrap();
    let back: TrainReport = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(back, report);
}
