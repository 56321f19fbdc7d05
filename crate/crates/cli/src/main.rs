use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use citetax_core::config::PipelineConfig;
use citetax_core::encoder::{EncoderParams, Scope};
use citetax_core::eval::{evaluate, synth_graph};
use citetax_core::graph::{
    fallback_embed, init_level_graph, load_citation_graph, load_embeddings, write_edges, write_embeddings,
    write_embeddings_binary, write_nodes, CitationGraph, EmbeddingMatrix,
};
use citetax_core::hiclust::{build_hierarchy_with, Hierarchy, OracleScorer};
use citetax_core::labels::GoldHierarchyLabels;
use citetax_core::taxonomy::{assemble, TaxonomyTree};
use citetax_core::train::train_clustering;
use citetax_core::verbalize::{
    load_labels, save_labels, verbalize_hierarchy, HttpGenerator, ProjectorParams, StubGenerator, TextGenerator,
    Transcript, VerbalizeExtras,
};

/// Turn a citation graph into a labeled topic hierarchy.
#[derive(Parser)]
#[command(name = "citetax", version)]
struct Cli {
    /// TOML settings file; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate papers and citations, drop self-loops and duplicates.
    Ingest(IngestArgs),
    /// Offline hashed bag-of-tokens embeddings.
    Embed(EmbedArgs),
    /// Pre-train the encoder and pair scorer against gold labels.
    Train(TrainArgs),
    /// Build the cluster hierarchy.
    Cluster(ClusterArgs),
    /// Label every cluster, finest level first.
    Verbalize(VerbalizeArgs),
    /// Write a labeled hierarchy as a taxonomy tree.
    Export(ExportArgs),
    /// Score a hierarchy against gold labels and a k-means baseline.
    Eval(EvalArgs),
    /// Generate a planted nested-block instance.
    Synth(SynthArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Papers, one JSON object per line.
    #[arg(long)]
    nodes: PathBuf,
    /// Citations, `citing<TAB>cited` per line.
    #[arg(long)]
    edges: PathBuf,
}

impl GraphArgs {
    fn load(&self) -> Result<CitationGraph> {
        let (g, report) = load_citation_graph(&self.nodes, &self.edges)?;
        log::info!(
            "{} papers, {} citations ({} self-loops, {} duplicates dropped)",
            report.nodes,
            report.edges,
            report.self_loops_dropped,
            report.duplicates_dropped
        );
        Ok(g)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Cleaned papers file.
    #[arg(long)]
    out_nodes: Option<PathBuf>,
    /// Cleaned citations file.
    #[arg(long)]
    out_edges: Option<PathBuf>,
    /// Ingest counts as JSON; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides `embed_dim` from the config.
    #[arg(long)]
    dim: Option<usize>,
    /// Write the binary format instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    embeddings: PathBuf,
    /// Gold labels, `level<TAB>paper<TAB>cluster[,cluster...]` per line.
    #[arg(long)]
    labels: PathBuf,
    /// Parameter checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch losses as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Neighbors,
    AllPairs,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Neighbors => Scope::Neighbors,
            ScopeArg::AllPairs => Scope::AllPairs,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    embeddings: PathBuf,
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "oracle_labels", required_unless_present = "oracle_labels")]
    params: Option<PathBuf>,
    /// Score pairs from gold labels instead of a trained model.
    #[arg(long)]
    oracle_labels: Option<PathBuf>,
    /// Overrides `cluster.scope`.
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    /// Hierarchy file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClientArg {
    /// Offline TF-IDF labels.
    Stub,
    /// JSON over HTTP, configured in `[http]`.
    Http,
}

#[derive(Args)]
struct VerbalizeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    hierarchy: PathBuf,
    #[arg(long, value_enum, default_value = "stub")]
    client: ClientArg,
    /// Review topic; labels the root.
    #[arg(long)]
    instruction: String,
    /// Labels file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the assembled taxonomy as JSON.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Append prompts and labels as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Projector checkpoint for cluster feature summaries.
    #[arg(long)]
    projector: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    hierarchy: PathBuf,
    /// Labels file from `verbalize`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, required_unless_present = "dot")]
    json: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// Gold labels.
    #[arg(long)]
    labels: PathBuf,
    /// Seed of the k-means baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Receives nodes.jsonl, edges.tsv, embeddings.tsv and labels.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides `synth.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_hierarchy(path: &Path, graph: &CitationGraph) -> Result<Hierarchy> {
    let (h, ids) = Hierarchy::load(path)?;
    let expected: Vec<&str> = graph.nodes().iter().map(|n| n.id.as_str()).collect();
    if ids.iter().map(String::as_str).ne(expected.iter().copied()) {
        bail!("{} was built from a different paper list", path.display());
    }
    Ok(h)
}

fn paper_ids(graph: &CitationGraph) -> Vec<String> {
    graph.nodes().iter().map(|n| n.id.clone()).collect()
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (g, report) = load_citation_graph(&a.graph.nodes, &a.graph.edges)?;
    if let Some(p) = &a.out_nodes {
        write_nodes(&g, p)?;
    }
    if let Some(p) = &a.out_edges {
        write_edges(&g, p)?;
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.report {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn embed(a: EmbedArgs, config: &PipelineConfig) -> Result<()> {
    let g = a.graph.load()?;
    let x = fallback_embed(&g, a.dim.unwrap_or(config.embed_dim), a.seed, config.text_source)?;
    if a.binary {
        write_embeddings_binary(&g, &x, &a.out)?;
    } else {
        write_embeddings(&g, &x, &a.out)?;
    }
    Ok(())
}

fn train(a: TrainArgs, config: &PipelineConfig) -> Result<()> {
    let g = a.graph.load()?;
    let x = load_embeddings(&a.embeddings, &g)?;
    let labels = GoldHierarchyLabels::load(&a.labels, &g)?;
    let mut tc = config.train.clone();
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    let (params, report) = train_clustering(&g, &x, &labels, &tc)?;
    log::info!(
        "{} epochs, best {:?} at epoch {:?}",
        report.epochs.len(),
        report.best_loss,
        report.best_epoch
    );
    params.save(&a.out)?;
    if let Some(p) = &a.report {
        report.write(p)?;
    }
    Ok(())
}

fn cluster(a: ClusterArgs, config: &PipelineConfig) -> Result<()> {
    let g = a.graph.load()?;
    let x: EmbeddingMatrix = load_embeddings(&a.embeddings, &g)?;
    let mut hc = config.cluster.clone();
    if let Some(s) = a.scope {
        hc.scope = s.into();
    }
    let base = init_level_graph(&g, &x)?;
    let h = match (&a.params, &a.oracle_labels) {
        (Some(p), _) => build_hierarchy_with(base, &EncoderParams::load(p)?, &hc)?,
        (None, Some(l)) => build_hierarchy_with(base, &OracleScorer::new(GoldHierarchyLabels::load(l, &g)?), &hc)?,
        (None, None) => bail!("need --params or --oracle-labels"),
    };
    log::info!(
        "{} levels: {:?} nodes",
        h.num_levels(),
        h.levels.iter().map(|l| l.len()).collect::<Vec<_>>()
    );
    h.save(&a.out, &paper_ids(&g))?;
    Ok(())
}

fn verbalize(a: VerbalizeArgs, config: &PipelineConfig) -> Result<()> {
    let g = a.graph.load()?;
    let h = load_hierarchy(&a.hierarchy, &g)?;
    let client: Box<dyn TextGenerator> = match a.client {
        ClientArg::Stub => Box::new(StubGenerator),
        ClientArg::Http => Box::new(HttpGenerator::new(config.http.clone())?),
    };
    let projector = a.projector.as_deref().map(ProjectorParams::load).transpose()?;
    let transcript = a.transcript.as_deref().map(Transcript::open).transpose()?;
    let extras = VerbalizeExtras {
        projector: projector.as_ref(),
        transcript: transcript.as_ref(),
    };
    let labels = match verbalize_hierarchy(&h, g.nodes(), &a.instruction, client.as_ref(), &config.verbalize, extras) {
        Ok(l) => l,
        Err(f) => {
            save_labels(&f.partial, &a.instruction, &a.out)?;
            bail!("{f}; {} finished labels kept in {}", f.partial.len(), a.out.display());
        }
    };
    save_labels(&labels, &a.instruction, &a.out)?;
    if let Some(p) = &a.taxonomy {
        assemble(&h, &labels, &a.instruction, &paper_ids(&g))?.export_json(p)?;
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let (h, ids) = Hierarchy::load(&a.hierarchy)?;
    let (labels, instruction) = load_labels(&a.labels)?;
    let tree: TaxonomyTree = assemble(&h, &labels, &instruction, &ids)?;
    if let Some(p) = &a.json {
        tree.export_json(p)?;
    }
    if let Some(p) = &a.dot {
        tree.export_dot(p)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let g = a.graph.load()?;
    let x = load_embeddings(&a.embeddings, &g)?;
    let h = load_hierarchy(&a.hierarchy, &g)?;
    let gold = GoldHierarchyLabels::load(&a.labels, &g)?;
    let report = evaluate(&h, &gold, x.matrix(), a.seed)?;
    match &a.out {
        Some(p) => report.write(p)?,
        None => print!("{}", report.to_json()?),
    }
    Ok(())
}

fn synth(a: SynthArgs, config: &PipelineConfig) -> Result<()> {
    let mut sc = config.synth.clone();
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    let s = synth_graph(&sc)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let d = &a.out_dir;
    write_nodes(&s.graph, &d.join("nodes.jsonl"))?;
    write_edges(&s.graph, &d.join("edges.tsv"))?;
    write_embeddings(&s.graph, &s.embeddings, &d.join("embeddings.tsv"))?;
    s.labels.write(&d.join("labels.tsv"), &s.graph)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Embed(a) => embed(a, &config),
        Command::Train(a) => train(a, &config),
        Command::Cluster(a) => cluster(a, &config),
        Command::Verbalize(a) => verbalize(a, &config),
        Command::Export(a) => export(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a, &config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
