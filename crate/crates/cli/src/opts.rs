//! Command-line surface. Malformed flag values are rejected during parsing
//! so they exit with the usage code, not the data-error code.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "uwphys",
    version,
    about = "Underwater image degradation, parameter estimation, restoration, and scoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Degrade a clean RGB-D corpus into underwater images plus a manifest
    Synthesize(SynthesizeArgs),
    /// Estimate degradation parameters for one degraded image
    Estimate(EstimateArgs),
    /// Invert the degradation of one image with known parameters
    Restore(RestoreArgs),
    /// Estimate, restore, and predict the re-degraded image in one pass
    Enhance(EnhanceArgs),
    /// Score one image: no-reference metrics plus optional reference losses
    Score(ScoreArgs),
    /// Fit the color-statistics model from a directory of reference images
    Stats(StatsArgs),
    /// Compare a result directory against a reference directory
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct SynthesizeArgs {
    /// Directory of clean images, each alongside a same-stem .pgm/.pfm depth
    #[arg(long)]
    pub input: PathBuf,
    /// Directory of water images supplying background-light statistics
    #[arg(long)]
    pub backlight: PathBuf,
    /// Directory that receives degraded images and manifest.json
    #[arg(long)]
    pub output: PathBuf,
    /// Master seed for all random draws
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Near-plane distance in meters
    #[arg(long, default_value_t = 0.5)]
    pub scale_min: f64,
    /// Upper bound of the sampled far-plane distance in meters
    #[arg(long, default_value_t = 10.0)]
    pub scale_max: f64,
    /// Water-type coefficient table file; defaults to the built-in table
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Depth files store proximity (bright = near); flip after normalization
    #[arg(long)]
    pub invert_depth: bool,
}

/// Estimator overrides shared by `estimate` and `enhance`.
#[derive(Args)]
pub struct EstimatorOpts {
    /// Candidate far-plane grid in meters, e.g. 2,4,6,8,10
    #[arg(long, value_name = "LIST", value_parser = parse_csv_f64)]
    pub grid_dmax: Option<CsvF64>,
    /// Near-plane distance in meters
    #[arg(long)]
    pub scale_min: Option<f64>,
    /// Objective weights as color,clip,balance
    #[arg(long, value_name = "W,W,W", value_parser = parse_weights)]
    pub weights: Option<Weights3>,
    /// How many ranked alternatives to report
    #[arg(long)]
    pub topk: Option<usize>,
    /// Keep the exhaustive-grid winner; skip local refinement
    #[arg(long)]
    pub no_refine: bool,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Degraded RGB image
    #[arg(long)]
    pub input: PathBuf,
    /// Relative depth map (.pgm or .pfm)
    #[arg(long)]
    pub depth: PathBuf,
    /// Depth file stores proximity (bright = near); flip after normalization
    #[arg(long)]
    pub invert_depth: bool,
    /// Color-statistics model JSON produced by `stats`
    #[arg(long)]
    pub lab_model: PathBuf,
    /// Water-type coefficient table file; defaults to the built-in table
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorOpts,
    /// Output parameter JSON
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct RestoreArgs {
    /// Degraded RGB image
    #[arg(long)]
    pub input: PathBuf,
    /// Relative depth map (.pgm or .pfm)
    #[arg(long)]
    pub depth: PathBuf,
    /// Depth file stores proximity (bright = near); flip after normalization
    #[arg(long)]
    pub invert_depth: bool,
    /// Parameter JSON: either an `estimate` output or bare parameters
    #[arg(long)]
    pub params: PathBuf,
    /// Output image path (.png or .ppm)
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct EnhanceArgs {
    /// Degraded RGB image
    #[arg(long)]
    pub input: PathBuf,
    /// Relative depth map (.pgm or .pfm)
    #[arg(long)]
    pub depth: PathBuf,
    /// Depth file stores proximity (bright = near); flip after normalization
    #[arg(long)]
    pub invert_depth: bool,
    /// Color-statistics model JSON produced by `stats`
    #[arg(long)]
    pub lab_model: PathBuf,
    /// Water-type coefficient table file; defaults to the built-in table
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorOpts,
    /// Directory that receives restored.png, predicted.png, estimate.json
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Image to score
    #[arg(long)]
    pub input: PathBuf,
    /// Reference image for full-reference losses
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Relative depth map weighting the reference loss by proximity
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Depth file stores proximity (bright = near); flip after normalization
    #[arg(long)]
    pub invert_depth: bool,
    /// Color-statistics model JSON enabling the color-prior score
    #[arg(long)]
    pub lab_model: Option<PathBuf>,
    /// Report JSON path; the report prints to stdout when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Directory of reference images
    #[arg(long)]
    pub input: PathBuf,
    /// Output model JSON
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of result images
    #[arg(long)]
    pub input: PathBuf,
    /// Directory of reference images paired with results by file name
    #[arg(long)]
    pub reference: PathBuf,
    /// Report JSON path; omitting it prints only the table
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Comma-separated floats, validated at parse time.
#[derive(Clone, Debug)]
pub struct CsvF64(pub Vec<f64>);

fn parse_csv_f64(s: &str) -> Result<CsvF64, String> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(CsvF64(v)),
        Ok(_) => Err("expected at least one number".into()),
        Err(e) => Err(format!("not a comma-separated number list: {e}")),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Weights3(pub [f64; 3]);

fn parse_weights(s: &str) -> Result<Weights3, String> {
    let CsvF64(v) = parse_csv_f64(s)?;
    if v.len() != 3 {
        return Err(format!("expected color,clip,balance (3 numbers), got {}", v.len()));
    }
    Ok(Weights3([v[0], v[1], v[2]]))
}
