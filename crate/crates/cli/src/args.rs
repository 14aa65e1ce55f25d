use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "pspin", version, about = "Mixed p-spin glass laboratory")]
pub struct Cli {
    /// Flat key=value file; flags on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Report destination (default: stdout).
    #[arg(long, global = true, value_name = "FILE")]
    pub report: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "PSPIN_WORKERS")]
    pub workers: Option<usize>,

    /// Omit the wall-clock time from JSON reports.
    #[arg(long, global = true)]
    pub no_wall_time: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dynamical and critical temperatures, E_ALG and large-p constants.
    Thresholds(ThresholdsArgs),
    /// Write or inspect binary disorder files.
    #[command(subcommand)]
    Disorder(DisorderCommand),
    /// Exact energy table, partition function and band mass.
    Enumerate(EnumerateArgs),
    /// Cluster decomposition of the regular set.
    Shatter(ShatterArgs),
    /// Slice bound, soft-OGP event, tau = 1 event and exceptional sets.
    Ogp(OgpArgs),
    /// Correlation curve chi_N(tau) of a search algorithm.
    Chi(ChiArgs),
    /// Failure-inequality terms for a search algorithm.
    Rarity(RarityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Thresholds(_) => "thresholds",
            Command::Disorder(DisorderCommand::Dump(_)) => "disorder dump",
            Command::Disorder(DisorderCommand::Load(_)) => "disorder load",
            Command::Enumerate(_) => "enumerate",
            Command::Shatter(_) => "shatter",
            Command::Ogp(_) => "ogp",
            Command::Chi(_) => "chi",
            Command::Rarity(_) => "rarity",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Thresholds(_) | Command::Disorder(DisorderCommand::Load(_)) => None,
            Command::Disorder(DisorderCommand::Dump(a)) => Some(a.seed),
            Command::Enumerate(a) => Some(a.seed),
            Command::Shatter(a) => Some(a.seed),
            Command::Ogp(a) => Some(a.seed),
            Command::Chi(a) => Some(a.seed),
            Command::Rarity(a) => Some(a.seed),
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        let v = match self {
            Command::Thresholds(a) => serde_json::to_value(a),
            Command::Disorder(DisorderCommand::Dump(a)) => serde_json::to_value(a),
            Command::Disorder(DisorderCommand::Load(a)) => serde_json::to_value(a),
            Command::Enumerate(a) => serde_json::to_value(a),
            Command::Shatter(a) => serde_json::to_value(a),
            Command::Ogp(a) => serde_json::to_value(a),
            Command::Chi(a) => serde_json::to_value(a),
            Command::Rarity(a) => serde_json::to_value(a),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdsArgs {
    /// Mixture, e.g. `pure:3` or `2:1.0,3:0.5`.
    #[arg(long)]
    pub mixture: String,
    /// `all` or a comma list of beta_d, bar_beta_d, bar_beta_d_sph,
    /// beta_d_sph, beta_c_bounds, e_alg, large_p_limit, constant_c.
    #[arg(long, default_value = "all")]
    pub which: String,
    /// Width of the final beta bracket.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Pure degrees for a CSV sweep table (replaces --mixture in CSV output).
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<u32>,
}

#[derive(Debug, Subcommand)]
pub enum DisorderCommand {
    /// Sample disorder and write it to a file.
    Dump(DumpArgs),
    /// Read a disorder file and summarise it.
    Load(LoadArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DumpArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Plant a uniform configuration at this inverse temperature.
    #[arg(long)]
    pub planted_beta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LoadArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = pspin::disorder::DEFAULT_COUPLING_CAP)]
    pub max_couplings: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub seed: u64,
    /// Write the binary energy table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Half-width of the energy band, in units of xi(1).
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = pspin::landscape::DEFAULT_MAX_N)]
    pub max_n: usize,
    /// Random points checked against direct evaluation.
    #[arg(long, default_value_t = 64)]
    pub spot_checks: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ShatterArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Default eps' for `--auto-band p`.
    #[arg(long, default_value_t = 0.5)]
    pub eps_prime: f64,
    #[arg(long)]
    pub seed: u64,
    /// Radii `r,R`.
    #[arg(long, conflicts_with = "auto_band", required_unless_present = "auto_band")]
    pub band: Option<String>,
    /// Band from the pure-p construction: `p` or `p,eps'`.
    #[arg(long)]
    pub auto_band: Option<String>,
    #[arg(long, default_value_t = pspin::thresholds::DEFAULT_RATE)]
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OgpModeArg {
    Sf,
    Soft,
    Tau1,
    Exceptional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Null,
    Planted,
}

/// Overlap band shared by `ogp` and `rarity`.
#[derive(Debug, Args, Serialize)]
pub struct BandArgs {
    #[arg(long)]
    pub q_low: Option<f64>,
    #[arg(long)]
    pub q_high: Option<f64>,
    /// Band from the pure-p construction: `p,eps'`.
    #[arg(long, conflicts_with_all = ["q_low", "q_high"])]
    pub auto_band: Option<String>,
    /// Energy slack recorded in the band.
    #[arg(long, default_value_t = 0.1)]
    pub band_eps: f64,
    #[arg(long, default_value_t = pspin::thresholds::DEFAULT_RATE)]
    pub rate: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct OgpArgs {
    #[arg(long, value_enum)]
    pub mode: OgpModeArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub replicas: usize,
    /// Slice overlaps (mode sf).
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Energy level of the witness set (default: beta).
    #[arg(long)]
    pub beta_prime: Option<f64>,
    #[command(flatten)]
    pub band: BandArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub tau: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModelArg::Null)]
    pub model: ModelArg,
    /// Configurations tested per outer replica (mode soft).
    #[arg(long, default_value_t = 1)]
    pub inner_samples: usize,
    /// Inner disorder replicas per membership test (mode exceptional).
    #[arg(long, default_value_t = 50)]
    pub inner_replicas: usize,
    #[arg(long, default_value_t = 4)]
    pub grid_k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rate_c: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ChiArgs {
    /// constant[:bits], diagonal[:scale], greedy[:sweeps] or hash-sign[:L].
    #[arg(long)]
    pub algorithm: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub replicas: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"
    )]
    pub tau: Vec<f64>,
    /// Run the concentration check at this tau.
    #[arg(long)]
    pub concentration_tau: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub t_grid: Vec<f64>,
    /// Select an intermediate tau for the band given by --q-low/--q-high.
    #[arg(long)]
    pub select: bool,
    #[arg(long)]
    pub q_low: Option<f64>,
    #[arg(long)]
    pub q_high: Option<f64>,
    /// Default: a quarter of the window width.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Default: the algorithm's claimed constant.
    #[arg(long)]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct RarityArgs {
    #[arg(long)]
    pub algorithm: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub mixture: String,
    #[arg(long)]
    pub beta: f64,
    /// Default: beta.
    #[arg(long)]
    pub beta_prime: Option<f64>,
    #[command(flatten)]
    pub band: BandArgs,
    #[arg(long, default_value_t = 4)]
    pub grid_k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rate_c: f64,
    #[arg(long, default_value_t = 50)]
    pub replicas: usize,
    #[arg(long, default_value_t = 20)]
    pub inner_replicas: usize,
    #[arg(long)]
    pub seed: u64,
}
