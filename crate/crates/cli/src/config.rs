//! Command-line and config-file settings. Every option may come from either
//! source; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use backflow_core::extrapolate::{Profile, TruncationSchedule};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "backflow", version, about = "Quantum backflow of a Dirac fermion on a ring")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// TOML file with default settings (top-level keys as the global flags,
    /// one table per subcommand).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Truncation profile: fast = N {200,300,450,700,1000}, accurate = N {500,700,1000,1400,2000} [default: accurate]
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Explicit truncation sizes, comma separated (overrides --profile).
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_schedule: Option<Vec<usize>>,
    /// Output directory [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Result cache directory [default: <out>/.cache]
    #[arg(long, global = true, env = "BACKFLOW_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Recompute even when a cached result exists.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub no_cache: bool,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed recorded with the run (the computations themselves are deterministic).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form two-mode minimum along alpha (CSV fig1.csv).
    TwoMode(TwoModeArgs),
    /// Extrapolated backflow infimum at one parameter point.
    Infimum(InfimumArgs),
    /// Infimum over an alpha grid for several chi and beta (fig2_<panel>.csv or scan.csv).
    Scan(ScanArgs),
    /// Global minimum over chi, alpha and beta (fig3.csv).
    GlobalMin(GlobalMinArgs),
    /// Optimized infimum at large chi (table1.csv).
    Massless(MasslessArgs),
    /// Current of the minimizing state through the window (fig4a.csv, fig4b.csv).
    Current(CurrentArgs),
    /// Line-limit integral eigenvalue (line.csv).
    Line(LineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TwoMode(_) => "two-mode",
            Command::Infimum(_) => "infimum",
            Command::Scan(_) => "scan",
            Command::GlobalMin(_) => "global-min",
            Command::Massless(_) => "massless",
            Command::Current(_) => "current",
            Command::Line(_) => "line",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoModeArgs {
    /// lambda_C / R [default: 0.05]
    #[arg(long)]
    pub chi: Option<f64>,
    /// Flux values, comma separated [default: 0,-0.025,-0.05,-0.075]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Option<Vec<f64>>,
    /// Evaluate p_min at this alpha/pi in addition to the curve.
    #[arg(long)]
    pub alpha_over_pi: Option<f64>,
    /// Curve step in alpha/pi [default: 0.005]
    #[arg(long)]
    pub alpha_step: Option<f64>,
    /// Curve end in alpha/pi [default: 1.0]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Lower mode relative to ceil(beta) [default: 0]
    #[arg(long)]
    pub l1: Option<i64>,
    /// Upper mode relative to ceil(beta) [default: 1]
    #[arg(long)]
    pub l2: Option<i64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfimumArgs {
    /// lambda_C / R [default: 0.73]
    #[arg(long)]
    pub chi: Option<f64>,
    /// Flux in (-1, 0] [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Window parameter alpha/pi [default: 0.36252]
    #[arg(long)]
    pub alpha_over_pi: Option<f64>,
    /// Minimize over alpha instead of using --alpha-over-pi.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub optimize_alpha: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanArgs {
    /// Figure panel a, b, c or d; sets the default chi (0.05, 0.725, 1, 2) and names the CSV.
    #[arg(long)]
    pub panel: Option<char>,
    /// lambda_C / R values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub chi: Option<Vec<f64>>,
    /// Flux values, comma separated [default: 0,-0.25,-0.5,-0.75]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Option<Vec<f64>>,
    /// Grid step in alpha/pi [default: 0.01 max(1, chi)]
    #[arg(long)]
    pub alpha_step: Option<f64>,
    /// Grid end in alpha/pi [default: 1.5 max(1, chi)]
    #[arg(long)]
    pub alpha_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalMinArgs {
    /// Coarse chi grid start [default: 0.05]
    #[arg(long)]
    pub chi_min: Option<f64>,
    /// Coarse chi grid end [default: 2.0]
    #[arg(long)]
    pub chi_max: Option<f64>,
    /// Coarse chi grid step [default: 0.025]
    #[arg(long)]
    pub chi_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasslessArgs {
    /// lambda_C / R values [default: 20,500,1000,10000,100000]
    #[arg(long, value_delimiter = ',')]
    pub chi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentArgs {
    /// lambda_C / R [default: 0.73]
    #[arg(long)]
    pub chi: Option<f64>,
    /// Flux in (-1, 0] [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Window parameter alpha/pi [default: 0.36252]
    #[arg(long)]
    pub alpha_over_pi: Option<f64>,
    /// Points on t/T in [-0.6, 0.6] [default: 1201]
    #[arg(long)]
    pub points: Option<usize>,
    /// Points on the zoom t/T in [-0.505, -0.495] [default: 10001]
    #[arg(long)]
    pub zoom_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineArgs {
    /// Line parameters eps, comma separated [default: 0.01]
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Quadrature cutoff [default: 20]
    #[arg(long)]
    pub z_max: Option<f64>,
    /// Quadrature nodes [default: 400]
    #[arg(long)]
    pub n_nodes: Option<usize>,
    /// Also extrapolate in the cutoff.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub extrapolate: Option<bool>,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(flatten)]
    pub global: GlobalArgs,
    #[serde(rename = "two-mode")]
    pub two_mode: TwoModeArgs,
    pub infimum: InfimumArgs,
    pub scan: ScanArgs,
    #[serde(rename = "global-min")]
    pub global_min: GlobalMinArgs,
    pub massless: MasslessArgs,
    pub current: CurrentArgs,
    pub line: LineArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Field-wise `flag.or(file)`.
pub trait Overlay {
    fn overlay(self, file: Self) -> Self;
}

macro_rules! overlay {
    ($t:ty { $($f:ident),* }) => {
        impl Overlay for $t {
            fn overlay(self, file: Self) -> Self {
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

overlay!(TwoModeArgs { chi, beta, alpha_over_pi, alpha_step, alpha_max, l1, l2 });
overlay!(InfimumArgs { chi, beta, alpha_over_pi, optimize_alpha });
overlay!(ScanArgs { panel, chi, beta, alpha_step, alpha_max });
overlay!(GlobalMinArgs { chi_min, chi_max, chi_step });
overlay!(MasslessArgs { chi });
overlay!(CurrentArgs { chi, beta, alpha_over_pi, points, zoom_points });
overlay!(LineArgs { eps, z_max, n_nodes, extrapolate });

impl Overlay for GlobalArgs {
    fn overlay(self, file: Self) -> Self {
        Self {
            config: self.config,
            profile: self.profile.or(file.profile),
            n_schedule: self.n_schedule.or(file.n_schedule),
            out: self.out.or(file.out),
            cache_dir: self.cache_dir.or(file.cache_dir),
            no_cache: self.no_cache,
            workers: self.workers.or(file.workers),
            seed: self.seed.or(file.seed),
        }
    }
}

/// Resolved settings shared by all subcommands.
#[derive(Debug, Clone, Serialize)]
pub struct RunSettings {
    pub profile: Profile,
    pub schedule: TruncationSchedule,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub seed: Option<u64>,
}

impl RunSettings {
    pub fn resolve(g: &GlobalArgs) -> Result<Self> {
        let profile: Profile = g.profile.as_deref().unwrap_or("accurate").parse()?;
        let schedule = match &g.n_schedule {
            Some(n) => TruncationSchedule::new(n.clone())?,
            None => profile.schedule(),
        };
        if g.workers == Some(0) {
            bail!(backflow_core::Error::InvalidArgument("--workers must be at least 1".into()));
        }
        let out = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let cache_dir = if g.no_cache {
            None
        } else {
            Some(g.cache_dir.clone().unwrap_or_else(|| out.join(".cache")))
        };
        Ok(Self {
            profile,
            schedule,
            out,
            cache_dir,
            workers: g.workers,
            seed: g.seed,
        })
    }
}
