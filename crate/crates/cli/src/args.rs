use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ici_core::solve::Method;

use crate::presets;

#[derive(Debug, Parser)]
#[command(
    name = "ici",
    version,
    about = "Arbitrary-precision rootfinding with Inverse Cubic Iteration",
    after_help = presets::help_text(),
    args_override_self = true,
    subcommand_required = true,
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve f(x) = 0 from one starting guess and print the iteration table.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Convergence diagnostics (ratios, order, fitted constant, prediction).
    #[command(args_override_self = true)]
    Order(OrderArgs),
    /// Render a basin-of-attraction image.
    #[command(args_override_self = true)]
    Basin(BasinArgs),
    /// Classify starting points along a segment by the root they reach.
    #[command(args_override_self = true)]
    Scan(ScanArgs),
    /// Run several methods on the same problem and tabulate the cost.
    #[command(args_override_self = true)]
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Function of one variable, e.g. "x^3-2*x-5".
    #[arg(long = "f", value_name = "EXPR")]
    pub f: String,
    /// Starting guess; an imaginary part ("1+2i") selects complex mode.
    #[arg(long, value_name = "NUMBER", allow_hyphen_values = true)]
    pub x0: String,
    /// Working precision in decimal digits.
    #[arg(long, default_value_t = 40)]
    pub digits: u32,
    /// Stop once |f(x)| <= tol [default: 10^(10-digits)].
    #[arg(long, value_name = "NUMBER")]
    pub tol: Option<String>,
    /// Maximum number of steps after the starting guess.
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// newton, secant, ici or ici_averaged.
    #[arg(long, default_value = "ici", value_parser = parse_method)]
    pub method: Method,
    /// Write the full-precision trace to this file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Format of the file written by --out.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Iterate in complex arithmetic even for a real starting guess.
    #[arg(long)]
    pub complex: bool,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[arg(long = "f", value_name = "EXPR", required_unless_present = "trace")]
    pub f: Option<String>,
    #[arg(long, value_name = "NUMBER", allow_hyphen_values = true, required_unless_present = "trace")]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 40)]
    pub digits: u32,
    #[arg(long, value_name = "NUMBER")]
    pub tol: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value = "ici", value_parser = parse_method)]
    pub method: Method,
    /// Analyse a saved trace (CSV or text) instead of solving.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["f", "x0"])]
    pub trace: Option<PathBuf>,
    /// Reference root, for forward-error digits.
    #[arg(long, value_name = "NUMBER", allow_hyphen_values = true)]
    pub root: Option<String>,
    /// Write the report to this file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write (k, log10|y_k|) plot data to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub complex: bool,
}

#[derive(Debug, Args)]
pub struct BasinArgs {
    /// Function of one complex variable, e.g. "z^3-1".
    #[arg(long = "f", value_name = "EXPR")]
    pub f: String,
    /// Real-axis range.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true, default_values = ["-2", "2"])]
    pub re: Vec<f64>,
    /// Imaginary-axis range.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true, default_values = ["-2", "2"])]
    pub im: Vec<f64>,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 200)]
    pub size: usize,
    /// Image width (overrides --size).
    #[arg(long)]
    pub width: Option<usize>,
    /// Image height (overrides --size).
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 13)]
    pub max_iter: usize,
    #[arg(long, value_name = "NUMBER", default_value = "1e-8")]
    pub tol: String,
    #[arg(long, default_value_t = 34)]
    pub digits: u32,
    #[arg(long, default_value = "ici", value_parser = parse_method)]
    pub method: Method,
    /// Output image (binary PPM).
    #[arg(long, value_name = "PATH", default_value = "basin.ppm")]
    pub out: PathBuf,
    /// Also write a per-pixel CSV dump.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long = "f", value_name = "EXPR")]
    pub f: String,
    /// Segment start (complex literal).
    #[arg(long, value_name = "Z", allow_hyphen_values = true)]
    pub from: String,
    /// Segment end (complex literal).
    #[arg(long, value_name = "Z", allow_hyphen_values = true)]
    pub to: String,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value_t = 13)]
    pub max_iter: usize,
    #[arg(long, value_name = "NUMBER", default_value = "1e-8")]
    pub tol: String,
    #[arg(long, default_value_t = 34)]
    pub digits: u32,
    #[arg(long, default_value = "ici", value_parser = parse_method)]
    pub method: Method,
    /// Write per-sample assignments to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "f", value_name = "EXPR")]
    pub f: String,
    #[arg(long, value_name = "NUMBER", allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, default_value_t = 40)]
    pub digits: u32,
    #[arg(long, value_name = "NUMBER")]
    pub tol: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Comma-separated list of methods to run.
    #[arg(long, value_delimiter = ',', default_value = "newton,secant,ici", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub complex: bool,
}
