use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "gmkit", version, about = "Exact inference, structure queries, sequential models, learning, sampling and mean-field VI")]
pub struct Cli {
    /// Print the result envelope as JSON (the default).
    #[arg(long, global = true, conflicts_with = "table")]
    pub json: bool,
    /// Print the outputs as tab-separated `path value` lines.
    #[arg(long, global = true)]
    pub table: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure queries on the model's `dag` or `ugm` section.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Exact inference on the model's factor graph.
    #[command(subcommand)]
    Fg(FgCommand),
    /// Discrete hidden Markov model inference.
    #[command(subcommand)]
    Hmm(HmmCommand),
    /// Scalar linear-Gaussian state-space filtering.
    #[command(subcommand)]
    Kalman(KalmanCommand),
    /// Parameter estimation from CSV data.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Monte Carlo samplers; every command requires `--seed`.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Mean-field variational inference.
    #[command(subcommand)]
    Vi(ViCommand),
}

/// `var=state`, as in `--evidence x1=0,x6=1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    pub var: String,
    pub state: usize,
}

impl std::str::FromStr for Evidence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (var, state) = s.split_once('=').ok_or_else(|| format!("expected var=state, got {s:?}"))?;
        let state = state.trim().parse().map_err(|_| format!("state in {s:?} is not a non-negative integer"))?;
        let var = var.trim();
        if var.is_empty() {
            return Err(format!("missing variable name in {s:?}"));
        }
        Ok(Evidence { var: var.to_string(), state })
    }
}

impl Serialize for Evidence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}={}", self.var, self.state))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArg {
    /// Model document (JSON).
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    /// Conditioning set; empty when omitted.
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VarArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub var: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IequivArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Second model document whose `dag` is compared with the first.
    #[arg(long)]
    pub against: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OrderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub order: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// d-separation of `--x` and `--y` given `--given` in the DAG.
    Dsep(SepArgs),
    /// Graph separation in the undirected graph.
    Usep(SepArgs),
    /// Markov blanket of `--var` (DAG or undirected graph, whichever the model has).
    Mb(VarArgs),
    /// Moral graph of the DAG.
    Moralize(ModelArg),
    /// Whether the DAG is I-equivalent to the DAG of `--against`.
    Iequiv(IequivArgs),
    /// Minimal directed I-map of the model's independencies for `--order`.
    Imap(OrderArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarginalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Variables to report; all unobserved variables when omitted.
    #[arg(long, value_delimiter = ',')]
    pub var: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Root of the max-sum pass; the first unobserved variable when omitted.
    #[arg(long)]
    pub root: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EliminateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub keep: Vec<String>,
    /// Elimination order; remaining variables in declaration order when omitted.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConditionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Subcommand)]
pub enum FgCommand {
    /// Sum-product marginals, optionally conditioned on evidence.
    Marginal(MarginalArgs),
    /// Max-sum MAP assignment.
    Map(MapArgs),
    /// Variable elimination onto `--keep`.
    Eliminate(EliminateArgs),
    /// Factor tables after conditioning on evidence.
    Condition(ConditionArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HmmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Observed symbols v_1, v_2, …; overrides the model's `observations`.
    #[arg(long, value_delimiter = ',')]
    pub obs: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub hmm: HmmArgs,
    /// Target time (1-based), at least the number of observations.
    #[arg(long)]
    pub t: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FfbsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub hmm: HmmArgs,
    #[arg(long)]
    pub seed: u64,
    /// Number of posterior paths.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
}

#[derive(Debug, Subcommand)]
pub enum HmmCommand {
    /// Normalised filtering distributions and the log-likelihood.
    Filter(HmmArgs),
    /// p(h_t | v_{1:u}).
    #[command(name = "predict-h")]
    PredictH(PredictArgs),
    /// p(v_t | v_{1:u}).
    #[command(name = "predict-v")]
    PredictV(PredictArgs),
    /// Smoothed marginals.
    Smooth(HmmArgs),
    /// Most probable hidden path.
    Viterbi(HmmArgs),
    /// Posterior path draws by forward filtering, backward sampling.
    Ffbs(FfbsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KalmanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Observations v_1, v_2, …; overrides the model's `observations`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub obs: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum KalmanCommand {
    /// Filtered means, variances and gains.
    Filter(KalmanArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CptArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// CSV with one 0/1 column per DAG node.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BayesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub cpt: CptArgs,
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta0: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArg {
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// Maximum-likelihood CPTs for the model's DAG.
    #[command(name = "cpt-mle")]
    CptMle(CptArgs),
    /// Beta-posterior CPTs and predictive probabilities.
    #[command(name = "cpt-bayes")]
    CptBayes(BayesArgs),
    /// Score-matching fit of a Gaussian (first and second moment statistics) to real data.
    #[command(name = "score-matching")]
    ScoreMatching(DataArg),
    /// Coupling of the two-spin model from two ±1 columns.
    Ising2(DataArg),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MhArgs {
    /// Model with a `gaussian` section to use as the target.
    #[arg(long, required_unless_present = "data", conflicts_with = "data")]
    pub model: Option<PathBuf>,
    /// CSV with columns `x` and `y`; the target is the Poisson-regression posterior.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000)]
    pub warmup: usize,
    /// Proposal variance.
    #[arg(long, default_value_t = 1.0)]
    pub vari: f64,
    /// Start state; the origin when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub init: Vec<f64>,
    /// Write the kept states to this CSV, with run metadata in `<path>.json`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RejectionArgs {
    #[arg(long)]
    pub seed: u64,
    /// Accepted samples to collect.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Laplace proposal scale.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RbmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub seed: u64,
    /// Gibbs sweeps.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Initial visible state; all zeros when omitted.
    #[arg(long, value_delimiter = ',')]
    pub init: Vec<u8>,
}

#[derive(Debug, Subcommand)]
pub enum SampleCommand {
    /// Random-walk Metropolis-Hastings.
    Mh(MhArgs),
    /// Standard normal by rejection from a Laplace proposal.
    Rejection(RejectionArgs),
    /// Pr(x > 5) for a standard normal by importance sampling.
    Importance(ImportanceArgs),
    /// Block Gibbs sampling of the model's RBM.
    #[command(name = "gibbs-rbm")]
    GibbsRbm(RbmArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Initial means; the origin when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub init: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KlfitArgs {
    /// Variances of the factorised target.
    #[arg(long, value_delimiter = ',', required = true)]
    pub variances: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ViCommand {
    /// Coordinate-ascent mean field on the model's `gaussian` target.
    Meanfield(MeanfieldArgs),
    /// Isotropic variance closest in KL to a factorised Gaussian.
    Klfit(KlfitArgs),
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn evidence_parses_and_echoes() {
        let e: Evidence = "x1=0".parse().unwrap();
        assert_eq!(e, Evidence { var: "x1".into(), state: 0 });
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"x1=0\"");
        assert!("x1".parse::<Evidence>().is_err());
        assert!("=1".parse::<Evidence>().is_err());
        assert!("x=-1".parse::<Evidence>().is_err());
    }
}
