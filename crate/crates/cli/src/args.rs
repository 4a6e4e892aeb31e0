use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "desireme", version, about = "Domain-specialized query transformation for dense retrieval")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive multi-hot domain labels for queries from document categories.
    Label(LabelArgs),
    /// Train a model from query/document embeddings, qrels and labels.
    Train(TrainArgs),
    /// Apply a trained model to query embeddings.
    Transform(TransformArgs),
    /// Exhaustive top-k retrieval, written as a TREC run.
    Retrieve(RetrieveArgs),
    /// Score a run against qrels.
    Evaluate(EvaluateArgs),
    /// Paired significance tests between two runs.
    Compare(CompareArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic benchmark directory.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Category edges, `child<TAB>parent` per line.
    #[arg(long)]
    pub graph: PathBuf,
    /// Top-level categories, one per line; order defines domain indices.
    #[arg(long)]
    pub top_categories: PathBuf,
    /// Document categories, `doc<TAB>cat1|cat2|...` per line.
    #[arg(long)]
    pub doc_categories: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Breadth-first search depth cap.
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarityArg {
    Dot,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Weighted,
    Top1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    None,
    SumToOne,
}

/// Hyperparameters; unset values fall back to the config file, then defaults.
#[derive(Debug, Args, Default)]
pub struct HyperArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Weight of the domain-classification (BCE) term.
    #[arg(long)]
    pub bce_weight: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityArg>,
    #[arg(long, value_enum)]
    pub pooling: Option<PoolingArg>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Query embeddings (DEMB).
    #[arg(long)]
    pub queries: PathBuf,
    /// Document embeddings (DEMB).
    #[arg(long)]
    pub docs: PathBuf,
    /// Training qrels; every (query, relevant doc) pair is an example.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Label file from `label`.
    #[arg(long)]
    pub labels: PathBuf,
    /// Output checkpoint.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Per-epoch loss log (tab-separated, one line per epoch).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformMode {
    Weighted,
    Top1,
    /// Learned specializers with uniformly random gate weights.
    RndG,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Query embeddings (DEMB).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Pooling to apply; defaults to the checkpoint's own.
    #[arg(long, value_enum)]
    pub mode: Option<TransformMode>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityArg>,
    /// Run tag written in the last column.
    #[arg(long, default_value = "desireme")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated metrics, e.g. `NDCG@10,P@1` (default: the six standard ones).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Directory for the record file and per-query values.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline run.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Run compared against the baseline.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated metrics (default: the six standard ones).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Number of comparisons for the Bonferroni correction.
    #[arg(long)]
    pub comparisons: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub domains: usize,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Deliberately corrupt one gradient entry; the check must then fail.
    #[arg(long)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub num_domains: Option<usize>,
    #[arg(long)]
    pub docs_per_domain: Option<usize>,
    #[arg(long)]
    pub queries_per_domain: Option<usize>,
    #[arg(long)]
    pub train_queries_per_domain: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub offset_scale: Option<f64>,
    /// Add an unlabeled out-of-domain cluster.
    #[arg(long)]
    pub out_of_domain: bool,
}
