use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use quasiloc::diophantine::{golden_mean, silver_mean};
use quasiloc::ModelParams;

/// `golden`, `silver` or a decimal value.
pub fn parse_omega(s: &str) -> Result<f64, String> {
    match s {
        "golden" => Ok(golden_mean()),
        "silver" => Ok(silver_mean()),
        other => other.parse::<f64>().map_err(|e| format!("expected golden, silver or a number: {e}")),
    }
}

/// `a:b:n`, `n` evenly spaced points from `a` to `b` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err("expected start:stop:count".into());
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok(Grid { start: num(a)?, stop: num(b)?, count: n.parse().map_err(|e| format!("{n}: {e}"))? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Model parameters shared by the many-body style subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ModelArgs {
    /// Chain length; the lattice has L+1 sites.
    #[arg(long = "L", default_value_t = 8)]
    pub l: usize,
    #[arg(long, default_value_t = 16.0)]
    pub beta: f64,
    /// Hopping strength.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Amplitude of the quasi-periodic potential.
    #[arg(long = "u", default_value_t = 1.0)]
    pub disorder: f64,
    /// Nearest-neighbour interaction.
    #[arg(long = "U", default_value_t = 0.0)]
    pub interaction: f64,
    #[arg(long, default_value = "golden", value_parser = parse_omega)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.2377)]
    pub theta: f64,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub xhat: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
}

impl ModelArgs {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.l)
            .with_beta(self.beta)
            .with_hopping(self.eps)
            .with_disorder(self.disorder)
            .with_interaction(self.interaction)
            .with_omega(self.omega)
            .with_theta(self.theta)
            .with_x_hat(self.xhat)
            .with_nu(self.nu)
            .with_tau(self.tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct DiophArgs {
    #[arg(long, default_value = "golden", value_parser = parse_omega)]
    pub omega: f64,
    /// Phases for which to certify the phase constant.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub qmax: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct SpectrumArgs {
    #[arg(long = "L", default_value_t = 200)]
    pub l: usize,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    #[arg(long = "u", default_value_t = 1.0)]
    pub disorder: f64,
    #[arg(long, default_value = "golden", value_parser = parse_omega)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.2377)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct LyapunovArgs {
    /// Energies, comma separated.
    #[arg(long = "E", value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub energies: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    #[arg(long = "u", default_value_t = 1.0)]
    pub disorder: f64,
    #[arg(long, default_value = "golden", value_parser = parse_omega)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.2377)]
    pub theta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Imaginary times, comma separated, each inside (-beta, beta).
    #[arg(long, value_delimiter = ',', default_value = "0", allow_negative_numbers = true)]
    pub times: Vec<f64>,
    /// Put the tadpole counterterm on the diagonal.
    #[arg(long)]
    pub tadpole: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub tadpole: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct CountertermArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Common `start:stop:count` grid for eps and U; overrides --eps and --U.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    /// Density tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ScalesArgs {
    /// Scale ratio; defaults to 2^(2 tau).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    #[arg(long, default_value_t = -8, allow_negative_numbers = true)]
    pub hmin: i32,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub xhat: i64,
    #[arg(long, default_value_t = 0.2377)]
    pub theta: f64,
    #[arg(long, default_value = "golden", value_parser = parse_omega)]
    pub omega: f64,
    /// Time window in units of the inverse scale.
    #[arg(long, default_value_t = 64)]
    pub t_units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ChainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Steps of the chain, each +1, -1 or 0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alphas: Vec<i8>,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub x1: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub k0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Tune nu by density matching before fitting (ignores --nu).
    #[arg(long)]
    pub tune: bool,
    #[arg(long, default_value_t = 2)]
    pub dmin: usize,
    #[arg(long, default_value_t = 8)]
    pub dmax: usize,
    #[arg(long, default_value_t = 2)]
    pub boundary: usize,
    /// Site pair for the temporal fit.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub x: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub y: i64,
    /// Number of time samples in [-0.9 beta/2, 0.9 beta/2] for the temporal fit.
    #[arg(long, default_value_t = 9)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long = "eps-grid", value_parser = parse_grid, default_value = "0:0.1:3")]
    pub eps_grid: Grid,
    #[arg(long = "U-grid", value_parser = parse_grid, default_value = "0:0.1:3")]
    pub u_grid: Grid,
    /// Chain lengths for the single-particle IPR scaling.
    #[arg(long = "L-list", value_delimiter = ',', default_value = "200,400,800")]
    pub l_list: Vec<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "subcommand", content = "params", rename_all = "lowercase")]
pub enum Command {
    /// Continued fraction and Diophantine constants of a frequency (JSON).
    Dioph(DiophArgs),
    /// Single-particle eigenvalues with localization length and IPR (CSV).
    Spectrum(SpectrumArgs),
    /// Lyapunov exponents of the almost-Mathieu cocycle (CSV).
    Lyapunov(LyapunovArgs),
    /// Imaginary-time two-point function by exact diagonalization (CSV).
    Correlate(CorrelateArgs),
    /// Site occupations and filling (CSV).
    Density(DensityArgs),
    /// Tune the counterterm nu by density matching (JSON).
    Counterterm(CountertermArgs),
    /// Per-scale sup and decay constants of single-scale propagators (CSV).
    Scales(ScalesArgs),
    /// Chain product of bare resolvents (JSON).
    Chain(ChainArgs),
    /// Spatial and temporal decay fits at one coupling (JSON).
    Decay(DecayArgs),
    /// Localization diagnostics over an (eps, U) grid (CSV).
    Scan(ScanArgs),
}

impl Command {
    pub fn default_format(&self) -> Format {
        match self {
            Command::Dioph(_) | Command::Counterterm(_) | Command::Chain(_) | Command::Decay(_) => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Everything that determines a run. Embedded verbatim in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    /// Runs are always deterministic; recorded for provenance.
    pub deterministic: bool,
}

/// Overlay `patch` onto `base`: objects merge key by key, anything else
/// replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Apply a JSON config file on top of the flag-derived configuration.
    pub fn with_overrides(self, json: &str) -> anyhow::Result<Self> {
        let patch: Value = serde_json::from_str(json).context("config file is not valid JSON")?;
        if !patch.is_object() {
            bail!("config file must hold a JSON object");
        }
        if let Some(sub) = patch.get("subcommand") {
            let current = serde_json::to_value(&self.command)?;
            if current.get("subcommand") != Some(sub) {
                bail!("config file is for subcommand {sub}, not {}", current["subcommand"]);
            }
        }
        let mut value = serde_json::to_value(&self)?;
        merge(&mut value, patch);
        serde_json::from_value(value).context("config file does not describe a valid run")
    }

    pub fn header(&self) -> anyhow::Result<String> {
        Ok(format!("# config: {}", serde_json::to_string(self)?))
    }

    /// Recover the configuration from an output header line.
    pub fn from_header(line: &str) -> anyhow::Result<Self> {
        let json = line.strip_prefix("# config: ").context("not a config header")?;
        Ok(serde_json::from_str(json)?)
    }
}
