use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "drbn", version, about = "Deep regression Bayesian networks")]
pub struct Cli {
    /// Seed for every random choice; runs with equal seeds are identical.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Layerwise pretraining followed by global fine-tuning.
    Train(TrainArgs),
    /// Global (or, with labels, supervised) fine-tuning of a saved model.
    Finetune(FinetuneArgs),
    /// Classify with a model that carries a label head.
    Classify(ClassifyArgs),
    /// MAP inference of the latent layers for every input.
    Infer(InferArgs),
    /// Per-sample log-likelihood, exact or max-approximated.
    Loglik(LoglikArgs),
    /// Compare learning methods over a sweep of hidden-layer sizes.
    Benchmark(BenchmarkArgs),
    /// EPLL restoration of a corrupted image with a patch prior.
    Restore(RestoreArgs),
    /// Reconstruct an image through its MAP latent state.
    Reconstruct(ReconstructArgs),
    /// Draw images from the model by ancestral sampling.
    Generate(GenerateArgs),
    /// Apply a noise model to an image.
    Corrupt(CorruptArgs),
    /// Peak signal-to-noise ratio between two images.
    Psnr(PsnrArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binarize {
    Bernoulli,
    Threshold,
}

/// How input files become data vectors.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// IDX image file, PGM image, or directory of PGM images.
    #[arg(long)]
    pub data: PathBuf,
    /// IDX label file matching the images.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Binarization for binary-visible models.
    #[arg(long, value_enum, default_value = "bernoulli")]
    pub binarize: Binarize,
    /// Halve IDX images in each direction by 2x2 averaging.
    #[arg(long)]
    pub downsample: bool,
    /// Use only the first N items.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Patches to sample when PGM images are larger than the model input.
    #[arg(long, default_value_t = 10_000)]
    pub patch_count: usize,
}

#[derive(Args, Debug, Clone)]
pub struct InferenceArgs {
    #[arg(long, value_enum, default_value = "augca")]
    pub map_method: MapMethod,
    /// Maximum coordinate-ascent sweeps.
    #[arg(long, default_value_t = 50)]
    pub sweeps: usize,
    /// Coordinate-ascent starts per input.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Saved inference network. Without one, a network is trained on
    /// samples from the model when the method needs it.
    #[arg(long)]
    pub net: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapMethod {
    Ca,
    In,
    Augca,
    Exact,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON training configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Output CSV trace (defaults to the model path with `.trace.csv`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also train an inference network and save it here.
    #[arg(long)]
    pub net_out: Option<PathBuf>,
    /// Add a wall-clock column to the trace.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output CSV of predictions.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output JSON list of inference reports.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LoglikArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output CSV of per-sample values.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    Maxmax,
    Variational,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden-layer sizes to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hidden_sizes: Vec<usize>,
    /// Learning methods to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,maxmax,variational")]
    pub methods: Vec<Method>,
    /// JSON training budget shared by every method.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
pub struct RestoreArgs {
    /// Gaussian patch prior.
    #[arg(long)]
    pub model: PathBuf,
    /// Corrupted PGM image.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// gaussian:SIGMA:FRACTION, block:SIZE:SIGMA or text:MASKFILE.
    #[arg(long)]
    pub noise: String,
    /// PGM marking corrupted pixels (nonzero); their data term is dropped.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Clean reference; adds PSNR to the log.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated coupling weights.
    #[arg(long, value_delimiter = ',')]
    pub beta_schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Output CSV log of the splitting steps.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Image width; the height follows from the visible size.
    #[arg(long)]
    pub width: Option<usize>,
    /// Output directory for `sample-NNNN.pgm` files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CorruptArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub noise: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the mask of corrupted pixels as a PGM.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PsnrArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}
