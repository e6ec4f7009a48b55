use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const THREADS_ENV: &str = "CENTROID_SEC_THREADS";

/// Poisoning attacks against online centroid anomaly detection: bounds,
/// simulations, synthetic corpora and greedy attack traces.
#[derive(Debug, Parser)]
#[command(name = "centroid-sec", version, args_override_self = true)]
pub struct Cli {
    /// Worker threads for data-parallel loops
    #[arg(long, global = true, env = THREADS_ENV, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// Config file of `key = value` lines; keys are `<section>.<flag>`
    /// (sections: bounds, simulate, attack, corpus.generate, corpus.embed,
    /// corpus.dim) or a bare global flag. Command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Run every loop on the calling thread
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate closed-form progress bounds
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment and check it against the bounds
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Synthetic request corpora, kernel embeddings and dimension reports
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Single greedy nearest-out attack run with its per-iteration trace
    #[command(args_override_self = true)]
    Attack(AttackArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundVariant {
    /// Infinite-horizon bound ln(1 + i/n)
    Infinite,
    /// Exact average-out displacement i/n
    Finite,
    /// Limited-control expectation and variance bound
    Limited,
    /// Protected learner expectation bounds and variance bound
    Protected,
    /// Critical traffic fraction for a target displacement
    NuCrit,
    /// Heuristic progress fraction of the greedy nearest-out attack
    Voronoi,
}

/// Without --out the values at the requested point are printed as one
/// comma-separated line in the CSV column order:
/// infinite `bound`; finite `displacement`; limited `expectation,variance_bound`;
/// protected `expectation_upper,expectation_lower,variance_bound`;
/// nu-crit `nu_crit`; voronoi `slope`.
#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub variant: BoundVariant,
    /// Working-set size (window) n
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// Iteration index; with --out the curve runs over 0..=i
    #[arg(long, default_value_t = 0)]
    pub i: u64,
    /// Adversarial traffic fraction
    #[arg(long, default_value_t = 0.05)]
    pub nu: f64,
    /// False-positive threshold of the protected learner
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Second moment of innocuous displacements E(eps^2)
    #[arg(long, default_value_t = 1.0)]
    pub eps2: f64,
    /// Target relative displacement for nu-crit
    #[arg(long)]
    pub displacement: Option<f64>,
    /// Dimension for voronoi
    #[arg(long, default_value_t = 2)]
    pub d: u64,
    /// Row stride of the curve (default ceil(i/1000))
    #[arg(long)]
    pub stride: Option<u64>,
    /// Decimal places for printed values (default: shortest exact form)
    #[arg(long)]
    pub precision: Option<usize>,
    /// Write the curve as CSV instead of printing the value
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Limited control: average-out learner, adversary at c + r a
    Axiom6,
    /// Protected learner with holdout false-positive resets
    Axiom7,
    /// Greedy nearest-out attack on Gaussian data
    Greedy,
    /// Largest holdout false-positive rate per traffic fraction
    FpSensitivity,
    /// Does the mean displacement reach --dcrit for each fraction in --grid
    NuSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// Uniform in the ball of radius --source-radius
    Ball,
    /// Uniform on the sphere of radius --source-radius
    Circle,
    /// Rows of --embedding, centered and scaled to --source-radius
    Corpus,
}

/// Defaults depend on the model: greedy uses n=100, 500 iterations;
/// nu-sweep uses n=20000, 100000 iterations; the others n=1000, 50000.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dimension of the data
    #[arg(long)]
    pub d: Option<usize>,
    /// Innocuous traffic distribution
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Radius of the innocuous support (default 0.8 for axiom7, else 1)
    #[arg(long)]
    pub source_radius: Option<f64>,
    /// Embedding matrix CSV for --source corpus
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Second moment of innocuous displacements used by the bounds
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Holdout size for false-positive estimation
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Steps updates stay off after a reset; 0 means permanently
    #[arg(long)]
    pub cooldown: Option<u64>,
    /// Target false-positive rate for radius calibration
    #[arg(long)]
    pub fp_target: Option<f64>,
    /// Comma-separated traffic fractions for nu-sweep and fp-sensitivity
    #[arg(long)]
    pub grid: Option<String>,
    /// Critical displacement for nu-sweep
    #[arg(long)]
    pub dcrit: Option<f64>,
    /// Disable the auxiliary pruning step of the greedy attack
    #[arg(long)]
    pub no_prune: bool,
    /// Trace CSV path
    #[arg(long, value_name = "FILE", default_value = "trace.csv")]
    pub out: PathBuf,
    /// Summary JSON path
    #[arg(long, value_name = "FILE", default_value = "summary.json")]
    pub summary: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Write a synthetic request corpus
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Kernel PCA coordinates of a corpus as an n x m CSV matrix
    #[command(args_override_self = true)]
    Embed(EmbedArgs),
    /// Components needed for a target explained variance, plus the curve
    #[command(args_override_self = true)]
    Dim(DimArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of records
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Gram length stored in the header
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Vocabulary scale
    #[arg(long, default_value_t = 8)]
    pub diversity: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 3)]
    pub max_params: usize,
    /// Output file (default stdout)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Corpus input shared by embed and dim: a corpus file, or a freshly
/// generated corpus when --input is absent.
#[derive(Debug, Args)]
pub struct CorpusInput {
    /// Corpus file
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Gram length (default: the file's k, or 3)
    #[arg(long)]
    pub k: Option<usize>,
    /// RBF width over spectrum distances; linear kernel when absent
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use raw instead of cosine-normalized spectrum dot products
    #[arg(long)]
    pub raw: bool,
    /// Skip feature-space centering
    #[arg(long)]
    pub no_center: bool,
    /// Records to generate without --input
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    /// Seed for generation without --input
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Vocabulary scale for generation without --input
    #[arg(long, default_value_t = 8)]
    pub diversity: usize,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub corpus: CorpusInput,
    /// Number of components; columns beyond the kernel rank are zero
    #[arg(long)]
    pub pca: Option<usize>,
    /// Explained variance used when --pca is absent
    #[arg(long, default_value_t = 0.99)]
    pub variance: f64,
    /// Output file (default stdout)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DimArgs {
    #[command(flatten)]
    pub corpus: CorpusInput,
    /// Target explained variance
    #[arg(long, default_value_t = 0.99)]
    pub variance: f64,
    /// Curve CSV path; without it the curve follows m on stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Working-set size
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Dimension of the Gaussian data
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// False-positive rate that sets the radius
    #[arg(long, default_value_t = 0.001)]
    pub fp_target: f64,
    /// Working set from an embedding CSV instead of Gaussian draws
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Project data and attack points to the unit sphere
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub no_prune: bool,
    /// Disable revalidation of cached cell solutions
    #[arg(long)]
    pub no_safeguard: bool,
    /// Track the distance of each point from the representer span
    #[arg(long)]
    pub representer: bool,
    /// Trace CSV path (default stdout)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
