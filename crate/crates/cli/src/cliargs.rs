//! Command-line surface. Every option is optional here; defaults and config
//! file values are merged in `runs.rs` so that precedence lives in one place
//! (flags > config file > built-in defaults, and SEQLAB_SEED above all for
//! the seed).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "seqlab",
    version = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SEQLAB_GIT_DESC")),
    about = "Experiment runner for the sequence-model verification lab",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Default)]
pub struct CommonOpts {
    /// Root RNG seed (the SEQLAB_SEED environment variable overrides this).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value config file; explicit flags win over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for CSV/SVG output (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG line chart where the subcommand has an m-grid.
    #[arg(long)]
    pub plot: bool,
    /// Worker threads for grid points (default 1; output order is fixed
    /// regardless).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Recover sequences with the analytically constructed decoder.
    InvertAnalytic(InvertAnalyticArgs),
    /// Fit decoders from (hidden state, sequence) pairs and grade recovery.
    InvertLearn(InvertLearnArgs),
    /// Numerical residual suites: hidden norms, first-order coupling,
    /// single-layer inversion.
    LemmaCheck(LemmaCheckArgs),
    /// Evaluate the smoothness/accuracy complexity measures on Taylor
    /// presets.
    Complexity(ComplexityArgs),
    /// Exhaustively compare concept acceptors against language recognizers.
    ConceptVerify(ConceptVerifyArgs),
    /// Certify that no additive model reproduces the exactly-one-1 labels.
    AdditiveImpossibility(AdditiveImpossibilityArgs),
    /// Train RNN classifiers on regular-language datasets.
    LangTrain(LangTrainArgs),
    /// Assemble the target-network construction and grade pseudo-network vs
    /// concept agreement.
    ExistenceCheck(ExistenceCheckArgs),
}

impl Cmd {
    pub fn common(&self) -> &CommonOpts {
        match self {
            Cmd::InvertAnalytic(a) => &a.common,
            Cmd::InvertLearn(a) => &a.common,
            Cmd::LemmaCheck(a) => &a.common,
            Cmd::Complexity(a) => &a.common,
            Cmd::ConceptVerify(a) => &a.common,
            Cmd::AdditiveImpossibility(a) => &a.common,
            Cmd::LangTrain(a) => &a.common,
            Cmd::ExistenceCheck(a) => &a.common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cmd::InvertAnalytic(_) => "invert-analytic",
            Cmd::InvertLearn(_) => "invert-learn",
            Cmd::LemmaCheck(_) => "lemma-check",
            Cmd::Complexity(_) => "complexity",
            Cmd::ConceptVerify(_) => "concept-verify",
            Cmd::AdditiveImpossibility(_) => "additive-impossibility",
            Cmd::LangTrain(_) => "lang-train",
            Cmd::ExistenceCheck(_) => "existence-check",
        }
    }
}

#[derive(Args, Debug)]
pub struct InvertAnalyticArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// Hidden widths, comma separated.
    #[arg(long = "grid-m", value_delimiter = ',')]
    pub grid_m: Option<Vec<usize>>,
    /// Sequence length.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Token dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "eps-x")]
    pub eps_x: Option<f64>,
    /// Networks drawn per grid point.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Fresh test sequences per network.
    #[arg(long = "n-test")]
    pub n_test: Option<usize>,
    /// Decoder output slice: full or true-seq.
    #[arg(long)]
    pub variant: Option<String>,
    /// Literal experiment init W, A ~ N(0, 1) instead of N(0, 2/m)
    /// (numerically explosive at large m; kept for comparison runs).
    #[arg(long = "raw-unit-variance")]
    pub raw_unit_variance: bool,
}

#[derive(Args, Debug)]
pub struct InvertLearnArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[arg(long = "grid-m", value_delimiter = ',')]
    pub grid_m: Option<Vec<usize>>,
    /// Sequence lengths, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    pub l: Option<Vec<usize>>,
    /// Token dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long = "eps-x")]
    pub eps_x: Option<f64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long = "n-train")]
    pub n_train: Option<usize>,
    #[arg(long = "n-test")]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Literal experiment init W, A ~ N(0, 1) instead of N(0, 2/m)
    /// (numerically explosive at large m; kept for comparison runs).
    #[arg(long = "raw-unit-variance")]
    pub raw_unit_variance: bool,
}

#[derive(Args, Debug)]
pub struct LemmaCheckArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// all, norm, coupling or single-layer.
    #[arg(long)]
    pub suite: Option<String>,
    /// Overrides the per-suite default m grid.
    #[arg(long = "grid-m", value_delimiter = ',')]
    pub grid_m: Option<Vec<usize>>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "eps-x")]
    pub eps_x: Option<f64>,
    /// Overrides the per-suite default seed count.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Perturbation scale for the coupling suite.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ComplexityArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// Taylor presets (monomial:n, sin, cos, exp, quadratic_2z_minus_z2,
    /// cos_pi), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub preset: Option<Vec<String>>,
    /// Evaluation radius.
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// Target accuracy for C_eps.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ConceptVerifyArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// dl1, parity or substring:<bits>, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// Exhaustive check covers all binary strings up to this length.
    #[arg(long = "max-len")]
    pub max_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AdditiveImpossibilityArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// String lengths to certify, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    pub l: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct LangTrainArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// Language names, comma separated (tomita1..tomita7, parity, d2, d3,
    /// d4, rep00, rep0101, rep00_11).
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// Hidden width.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Independent training runs per language; the CSV keeps the best.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Output scale λ multiplying the readout logit.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// tanh or relu.
    #[arg(long)]
    pub activation: Option<String>,
    /// rmsprop or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// RMSProp smoothing constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// RMSProp denominator offset.
    #[arg(long = "rms-eps")]
    pub rms_eps: Option<f64>,
    /// SGD momentum.
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Train the readout matrix alongside W and A.
    #[arg(long = "train-readout")]
    pub train_readout: Option<bool>,
    /// Overrides every selected language's training-set size.
    #[arg(long = "n-train")]
    pub n_train: Option<usize>,
    /// Overrides every selected language's test-set size.
    #[arg(long = "n-test")]
    pub n_test: Option<usize>,
    /// Training string lengths as lo,hi.
    #[arg(long = "train-range", value_delimiter = ',')]
    pub train_range: Option<Vec<usize>>,
    /// Test string lengths as lo,hi.
    #[arg(long = "test-range", value_delimiter = ',')]
    pub test_range: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct ExistenceCheckArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[arg(long = "grid-m", value_delimiter = ',')]
    pub grid_m: Option<Vec<usize>>,
    /// Neurons per output coordinate.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "d-out")]
    pub d_out: Option<usize>,
    #[arg(long = "eps-x")]
    pub eps_x: Option<f64>,
    /// Fresh sequences graded per run.
    #[arg(long = "n-seq")]
    pub n_seq: Option<usize>,
    /// Monte Carlo samples per indicator fit.
    #[arg(long = "n-mc")]
    pub n_mc: Option<usize>,
    /// Hermite degree cap of the indicator fits.
    #[arg(long = "k-deg")]
    pub k_deg: Option<usize>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Concept activation preset.
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Force stream-regenerated recurrent weights at every width.
    #[arg(long)]
    pub streamed: bool,
}
