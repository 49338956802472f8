use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ken::spectral::{DEFAULT_CUTOFF_ABS, DEFAULT_CUTOFF_REL};
use ken::{EigenvectorBasis, Factorization, SpectralOptions};

/// Kernel entropic novelty (KEN) scores for embedding sets.
#[derive(Parser, Debug)]
#[command(name = "ken", version, about, long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score a test set against a reference set and write the JSON report.
    Score(ScoreArgs),
    /// Same pipeline as `score`, also printing the top samples of each mode.
    Modes(ScoreArgs),
    /// Pick a Gaussian bandwidth by KEN stability under subsampling.
    Bandwidth(BandwidthArgs),
    /// Generate seeded synthetic Gaussian-mixture data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Cross-check the factor-based spectrum against the independent oracles.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Test embeddings (CSV or KENF; detected from the file header).
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    /// Reference embeddings (CSV or KENF).
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: PathBuf,
}

#[derive(Args, Debug)]
pub struct SelectionArgs {
    /// Candidate bandwidths for --select-sigma, comma separated and ascending.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub sigma_grid: Option<Vec<f64>>,
    /// Largest acceptable KEN variance across subsample trials.
    #[arg(long, default_value_t = 0.01)]
    pub variance_threshold: f64,
    /// Fraction of each set drawn per trial.
    #[arg(long, default_value_t = 0.5, value_name = "FRACTION")]
    pub subsample: f64,
    /// Number of subsample trials per candidate.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FactorArg {
    Dense,
    Pivoted,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BasisArg {
    Recovered,
    Gamma,
}

#[derive(Args, Debug)]
pub struct SpectralArgs {
    /// Absolute floor of the positive-eigenvalue cutoff.
    #[arg(long, default_value_t = DEFAULT_CUTOFF_ABS)]
    pub cutoff_abs: f64,
    /// Cutoff relative to the largest eigenvalue.
    #[arg(long, default_value_t = DEFAULT_CUTOFF_REL)]
    pub cutoff_rel: f64,
    /// Joint kernel factorization: full Cholesky or rank-revealing pivoted Cholesky.
    #[arg(long, value_enum, default_value = "dense")]
    pub factor: FactorArg,
    /// Eigenvectors to report: of the differential kernel matrix, or of Gamma.
    #[arg(long, value_enum, default_value = "recovered")]
    pub basis: BasisArg,
}

impl SpectralArgs {
    pub fn options(&self) -> SpectralOptions {
        SpectralOptions {
            cutoff_abs: self.cutoff_abs,
            cutoff_rel: self.cutoff_rel,
            factorization: match self.factor {
                FactorArg::Dense => Factorization::Dense,
                FactorArg::Pivoted => Factorization::Pivoted,
            },
            basis: match self.basis {
                BasisArg::Recovered => EigenvectorBasis::Recovered,
                BasisArg::Gamma => EigenvectorBasis::Gamma,
            },
            max_eigenvectors: None,
        }
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("bandwidth").required(true).args(["sigma", "select_sigma"])))]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Choose the bandwidth from --sigma-grid instead of giving --sigma.
    #[arg(long)]
    pub select_sigma: bool,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Reference weight eta (>= 1); larger values flag only strongly overrepresented modes.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    /// Also compute R-KEN, the score with test and reference swapped.
    #[arg(long)]
    pub rken: bool,
    /// Number of modes to report.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    /// Samples listed per mode, for each of test and reference.
    #[arg(long, default_value_t = 10)]
    pub top_r: usize,
    /// Run the oracle cross-checks and record them in the report (small inputs only).
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for every random draw; recorded in the report.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Suppress the summary line.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct BandwidthArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Reference weight eta (>= 1).
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Kenf,
}

impl Format {
    /// Explicit choice, else `.kenf` / `.bin` extensions mean KENF.
    pub fn resolve(explicit: Option<Format>, path: &Path) -> Format {
        explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("kenf") | Some("bin") => Format::Kenf,
            _ => Format::Csv,
        })
    }
}

/// A point written as comma-separated coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(pub Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad coordinate {c:?}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

#[derive(Args, Debug)]
pub struct MixtureArgs {
    /// Component weights, comma separated (default: uniform).
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub weights: Option<Vec<f64>>,
    /// Component centers, e.g. "0,1;1,0".
    #[arg(long, value_delimiter = ';', value_parser = parse_point, value_name = "POINTS")]
    pub means: Vec<Point>,
    /// Component standard deviation: one value, or one per component.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.05",
        value_name = "LIST"
    )]
    pub std: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct PairOutput {
    /// Test set output path.
    #[arg(long, value_name = "PATH")]
    pub out_test: PathBuf,
    /// Reference set output path.
    #[arg(long, value_name = "PATH")]
    pub out_ref: PathBuf,
    /// Output format (default: from the extension, CSV otherwise).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Sample one Gaussian mixture.
    Gmm {
        #[command(flatten)]
        mixture: MixtureArgs,
        /// Number of samples.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Output format (default: from the extension, CSV otherwise).
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Also write each sample's component index, one per line.
        #[arg(long, value_name = "PATH")]
        labels_out: Option<PathBuf>,
    },
    /// One of the six two-dimensional reference/novel-mode layouts.
    Figure1 {
        /// Layout number, 1 to 6.
        #[arg(long)]
        column: u32,
        /// Samples per set.
        #[arg(long, default_value_t = 5000)]
        count: usize,
        /// Test samples use this seed, reference samples seed + 1.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: PairOutput,
    },
    /// Test set mixing a novel mixture (probability alpha) into the reference mixture.
    Alpha {
        /// Probability that a test sample comes from the novel mixture.
        #[arg(long)]
        alpha: f64,
        /// Reference centers (default: (0,1);(1,0);(0,-1);(-1,0)).
        #[arg(long, value_delimiter = ';', value_parser = parse_point, value_name = "POINTS")]
        ref_means: Vec<Point>,
        /// Novel centers (default: (±0.7, ±0.7)).
        #[arg(long, value_delimiter = ';', value_parser = parse_point, value_name = "POINTS")]
        novel_means: Vec<Point>,
        /// Standard deviation of every component.
        #[arg(long, default_value_t = 0.05)]
        std: f64,
        /// Samples per set.
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Reference samples use this seed, test samples seed + 1.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: PairOutput,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Use seeded standard-normal sets instead of files.
    #[arg(long, conflicts_with_all = ["test", "reference"])]
    pub random: bool,
    /// Test set size with --random.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Reference set size with --random.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Dimension with --random.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Seed with --random (reference uses seed + 1).
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Test embeddings.
    #[arg(long, value_name = "PATH")]
    pub test: Option<PathBuf>,
    /// Reference embeddings.
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Reference weight eta (>= 1).
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[command(flatten)]
    pub spectral: SpectralArgs,
    /// Write the cross-check as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Perturb one cross-kernel entry on the factor path only (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}
