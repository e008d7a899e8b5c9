use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use superres::basis::BasisKind;
use superres::spike::Method;

use crate::files::Kind;

#[derive(Debug, Parser)]
#[command(name = "superres", version, about = "Exact recovery of spikes and splines on [-1, 1] from polynomial moments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every verb.
#[derive(Debug, Clone, Default, Args)]
pub struct Global {
    /// Input JSON file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Seed for `gen`, master seed for `phase`.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Spike solver: pencil or lp.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// LP grid points, uniform in t on [0, pi] (per axis in 2D).
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,
    /// Relative singular-value cutoff for the pencil's model order.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Nonnegative weights (gen, phase) and the nonnegative LP.
    #[arg(long, global = true)]
    pub nonnegative: bool,
    /// Build a certificate even when the separation check fails.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for `phase`; all cores when absent.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Record wall-clock times (makes output non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a separated instance: problem file plus ground truth.
    Gen(GenArgs),
    /// Compute the moments of a ground-truth file.
    Project(ProjectArgs),
    /// Recover the signal behind a problem file.
    Recover,
    /// Build and verify a dual certificate.
    Certify(CertifyArgs),
    /// Sweep the separation factor and record recovery success rates as CSV.
    Phase(PhaseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: Kind,
    /// Number of atoms or knots.
    #[arg(short = 'M', long = "atoms", default_value_t = 10)]
    pub m: usize,
    /// Maximal polynomial degree.
    #[arg(short = 'N', long = "degree", default_value_t = 128)]
    pub n: usize,
    /// Spline degree.
    #[arg(short = 'r', long = "spline-degree", default_value_t = 0)]
    pub r: usize,
    /// Minimal separation in units of pi / N; 4 in 1D, 5.76 in 2D.
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long, default_value = "chebyshev")]
    pub basis: BasisKind,
    /// Where to write the ground truth.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Real signed weights instead of unit-modulus complex ones.
    #[arg(long)]
    pub real: bool,
    /// Place atoms on the LP grid (implies real weights).
    #[arg(long)]
    pub on_grid: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ProjectArgs {
    /// Overrides the truth file's basis.
    #[arg(long)]
    pub basis: Option<BasisKind>,
    /// Overrides the truth file's N.
    #[arg(short = 'N', long = "degree")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    /// Overrides the input's N.
    #[arg(short = 'N', long = "degree")]
    pub n: Option<usize>,
    /// 2D separation factor in units of pi / N.
    #[arg(long)]
    pub factor: Option<f64>,
    /// Verification grid points per degree; 16 in 1D, 4 in 2D.
    #[arg(long)]
    pub grid_per_degree: Option<usize>,
    /// Write samples of the certificate as CSV.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Sample count (per axis in 2D).
    #[arg(long)]
    pub sample_points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 1.0)]
    pub min_factor: f64,
    #[arg(long, default_value_t = 5.0)]
    pub max_factor: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(short = 'N', long = "degree", default_value_t = 128)]
    pub n: usize,
    #[arg(short = 'M', long = "atoms", default_value_t = 10)]
    pub m: usize,
}
