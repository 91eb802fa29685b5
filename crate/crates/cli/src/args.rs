//! Command-line and config-file arguments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bicm_core::{MetricVariant, QuadratureKind, QuadratureRule, Scheme};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "bicm", version, about = "Rates, error exponents and wideband coefficients of shaped CM, MLC and BICM")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity curves against snr
    Capacity(CapacityArgs),
    /// Random-coding error exponents against rate
    Exponent(ExponentArgs),
    /// Low-snr coefficients c1, c2 and the Eb/N0 limit
    Wideband(WidebandArgs),
    /// Optimal shaping at one snr, as JSON
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapingMode {
    Uniform,
    Optimized,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Classical,
    Normalized,
}

impl From<Metric> for MetricVariant {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Classical => MetricVariant::Classical,
            Metric::Normalized => MetricVariant::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quadrature {
    Panel,
    Hermite,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Bits per QAM symbol (even)
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Quadrature order per real dimension: panels for `panel`, nodes for `hermite`
    #[arg(long, default_value_t = 64)]
    pub quadrature_order: usize,
    #[arg(long, value_enum, default_value_t = Quadrature::Panel)]
    pub quadrature: Quadrature,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file mirroring the long flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn rule(&self) -> Result<QuadratureRule, Failure> {
        let kind = match self.quadrature {
            Quadrature::Panel => QuadratureKind::Panel,
            Quadrature::Hermite => QuadratureKind::Hermite,
        };
        kind.rule(self.quadrature_order)
            .map_err(|e| Failure::Usage(format!("--quadrature-order: {e}")))
    }

    pub fn check_m(&self) -> Result<(), Failure> {
        if self.m == 0 || !self.m.is_multiple_of(2) || self.m > 16 {
            return Err(Failure::Usage(format!("--m must be even and between 2 and 16, got {}", self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:step` or a comma-separated list, in dB
    #[arg(long, allow_hyphen_values = true, default_value = "0:20:1")]
    pub snr_db: Grid,
    /// Any of cm, mlc, bicm, bicm-uniform; the Gaussian reference is always included
    #[arg(long, value_delimiter = ',', default_value = "cm,mlc,bicm,bicm-uniform")]
    pub schemes: Vec<CapacityScheme>,
    #[arg(long, value_enum, default_value_t = ShapingMode::Optimized)]
    pub shaping: ShapingMode,
    /// Bit marginals P(B_j = 0) for `--shaping file`
    #[arg(long)]
    pub marginals: Option<PathBuf>,
    /// Adds a Monte-Carlo estimate of every constellation rate when positive
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    /// Root seed of the Monte-Carlo estimates
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapacityScheme {
    Cm,
    Mlc,
    Bicm,
    BicmUniform,
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:step` or a comma-separated list, in dB
    #[arg(long, allow_hyphen_values = true, default_value = "8")]
    pub snr_db: Grid,
    /// Rates in bits per channel use, `start:stop:step` or a list
    #[arg(long, default_value = "2.0:3.0:0.02")]
    pub rates: Grid,
    /// Any of cm, bicm, parallel, mlc
    #[arg(long, value_delimiter = ',', default_value = "cm,bicm,parallel")]
    pub schemes: Vec<ExponentSchemeArg>,
    /// Uniform rows are always written; `optimized` and `file` add shaped rows
    #[arg(long, value_enum, default_value_t = ShapingMode::Optimized)]
    pub shaping: ShapingMode,
    #[arg(long)]
    pub marginals: Option<PathBuf>,
    /// Bit metric of the BICM decoder
    #[arg(long, value_enum, default_value_t = Metric::Normalized)]
    pub metric: Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExponentSchemeArg {
    Cm,
    Bicm,
    Parallel,
    Mlc,
}

#[derive(Debug, Args)]
pub struct WidebandArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fit grid in linear snr, largest first
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025,0.0125,0.00625")]
    pub grid: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true, default_value_t = 8.0)]
    pub snr_db: f64,
    #[arg(long, value_parser = parse_scheme, default_value = "bicm")]
    pub scheme: Scheme,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "cm" => Ok(Scheme::Cm),
        "mlc" => Ok(Scheme::Mlc),
        "bicm" => Ok(Scheme::Bicm),
        _ => Err(format!("unknown scheme '{s}', expected cm, mlc or bicm")),
    }
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Capacity(a) => &a.common,
            Command::Exponent(a) => &a.common,
            Command::Wideband(a) => &a.common,
            Command::Optimize(a) => &a.common,
        }
    }
}

/// A list of values given as `start:stop:step` (inclusive) or `a,b,c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty list".into());
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", t.trim()));
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [start, stop, step] = parts[..] else {
                return Err(format!("range '{s}' must be start:stop:step"));
            };
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) {
                return Err(format!("step must be positive, got {step}"));
            }
            if stop < start {
                return Err(format!("range stop {stop} is below start {start}"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| round(start + i as f64 * step)).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err("values must be finite".into());
        }
        Ok(Grid(values))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Removes the accumulation error of `start + i·step`.
fn round(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Parses the command line, splicing in `--config` entries ahead of the
/// explicit flags so that the flags win.
pub fn parse(argv: Vec<String>) -> Result<Cli, Failure> {
    let cli = Cli::try_parse_from(&argv).map_err(Failure::Clap)?;
    let Some(path) = cli.command.common().config.clone() else {
        return Ok(cli);
    };
    let sub = argv.get(1).cloned().unwrap_or_default();
    let entries = read_config(&path, &sub)?;
    let mut merged = vec![argv[0].clone(), sub];
    merged.extend(entries);
    merged.extend(argv[2..].iter().cloned());
    Cli::try_parse_from(&merged).map_err(Failure::Clap)
}

fn read_config(path: &Path, sub: &str) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let command = Cli::command();
    let known: Vec<String> = command
        .find_subcommand(sub)
        .map(|c| c.get_arguments().filter_map(|a| a.get_long().map(str::to_owned)).collect())
        .unwrap_or_default();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), n + 1);
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!("{at}: expected key = value, got '{line}'")));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" || !known.contains(&key) {
            return Err(Failure::Usage(format!("{at}: unknown key '{key}' for '{sub}'")));
        }
        let arg = format!("--{key}={value}");
        if let Err(e) = Cli::try_parse_from(["bicm", sub, arg.as_str()]) {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return Err(Failure::Usage(format!("{at}: {first}")));
        }
        out.push(arg);
    }
    Ok(out)
}

/// Marginals file: `m` probabilities separated by whitespace or commas,
/// `#` starts a comment; a JSON array is accepted as well.
pub fn read_marginals(path: &Path, m: usize) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read marginals {}: {e}", path.display())))?;
    let values: Vec<f64> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    } else {
        let mut v = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                v.push(tok.parse::<f64>().map_err(|_| {
                    Failure::Usage(format!("{}:{}: '{tok}' is not a number", path.display(), n + 1))
                })?);
            }
        }
        v
    };
    if values.len() != m {
        return Err(Failure::Usage(format!(
            "{}: expected {m} marginals, got {}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}
