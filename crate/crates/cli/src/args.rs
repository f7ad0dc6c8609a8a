use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pavlab::Strategy;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pavlab", version, about = "Paving experiments over maximal abelian subalgebras")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Directory for results and manifest.json; stdout/stderr when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; `curve` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for seed sweeps and searches.
    #[arg(long, global = true, env = "PAVLAB_THREADS")]
    pub threads: Option<usize>,
    /// Drop every `elapsed_ms` field, making artifacts byte-comparable.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Search for a paving with few blocks.
    Pave(PaveArgs),
    /// Exhaustive paving number for dim <= 12.
    PaveExact(PaveExactArgs),
    /// Empirical n(eps) over an eps grid, against an eps^-6 envelope.
    Curve(CurveArgs),
    /// Build an approximately independent partition and check its block conditions.
    Indep(IndepArgs),
    /// Random-matrix norm experiments.
    Free(FreeArgs),
    /// Pave through the reduction to projections with constant diagonal.
    Reduce(ReduceArgs),
    /// Dixmier average over the W-tuple of a roots-of-unity partition.
    Dixmier(DixmierArgs),
    /// Run the free-model calibration targets.
    Calibrate(CalibrateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pave(_) => "pave",
            Command::PaveExact(_) => "pave-exact",
            Command::Curve(_) => "curve",
            Command::Indep(_) => "indep",
            Command::Free(_) => "free",
            Command::Reduce(_) => "reduce",
            Command::Dixmier(_) => "dixmier",
            Command::Calibrate(_) => "calibrate",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SeedArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long = "seeds", default_value_t = 1)]
    pub seed_count: usize,
}

impl SeedArgs {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seed_count as u64).map(|i| self.seed + i).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    Haar,
    ZeroDiagHaar,
    /// Self-adjoint part of a zero-diagonal Haar element, unit norm.
    SaZeroDiagHaar,
    Projection,
    Roots,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Diagonal,
    Fourier,
}

#[derive(Debug, Args, Serialize)]
pub struct ElementArgs {
    /// Matrix file (JSON or binary); overrides the ensemble.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Ensemble::ZeroDiagHaar)]
    pub ensemble: Ensemble,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Trace of the projection ensemble.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Root order of the roots ensemble.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = FrameKind::Diagonal)]
    pub frame: FrameKind,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: pavlab::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct PaveArgs {
    #[command(flatten)]
    pub element: ElementArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, value_parser = parse_strategy, default_value = "anneal")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long)]
    pub max_blocks: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct PaveExactArgs {
    #[command(flatten)]
    pub element: ElementArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Largest block count tried; defaults to dim.
    #[arg(long)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub element: ElementArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.5, 0.4, 0.3])]
    pub eps: Vec<f64>,
    #[arg(long, value_parser = parse_strategy, default_value = "roots_of_unity")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
    /// The envelope constant is fitted at this eps (the largest grid eps if absent from the grid).
    #[arg(long, default_value_t = 0.6)]
    pub fit_eps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct IndepArgs {
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    /// Halving rounds; the partition has 2^n blocks.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    /// Zero-diagonal Haar test elements.
    #[arg(long, default_value_t = 1)]
    pub x_count: usize,
    /// Random sign diagonals in the linear test set.
    #[arg(long, default_value_t = 0)]
    pub y_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeOp {
    Conj,
    Proj,
    HalfSplit,
    Kesten,
    Growth,
    Freeness,
}

#[derive(Debug, Args, Serialize)]
pub struct FreeArgs {
    #[arg(long, value_enum)]
    pub op: FreeOp,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    /// Block count (conj, proj).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Projection trace (proj, half-split).
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Number of unitaries (kesten, freeness).
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 32)]
    pub n_max: usize,
    /// Word level (freeness).
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Word budget (freeness).
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub element: ElementArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 0.6)]
    pub eps: f64,
    /// Candidates per block count of the projection paver.
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
    /// Write every stage matrix under this directory (one subdirectory per seed).
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DixmierArgs {
    #[command(flatten)]
    pub element: ElementArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Number of blocks.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Run only the named targets.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Override every target's seed count.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Clamp every target's dimension.
    #[arg(long)]
    pub max_dim: Option<usize>,
}
