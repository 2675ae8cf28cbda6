use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "wva", version, about = "Error probabilities of weak-interaction detection with and without postselection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe densities over an x grid: initial, postselected, without postselection.
    Density {
        #[command(flatten)]
        common: CommonArgs,
        /// Readout grid as start:stop:steps.
        #[arg(long, default_value = "-6:6:241", allow_hyphen_values = true)]
        x_grid: String,
    },
    /// Error probabilities and powers of both modes.
    Errors {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Type-2 error and power ratios over |A_w| and g (or c).
    Contour {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo estimates against the closed forms.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Stationary point of the loss-aware test.
    #[command(name = "appendixc", visible_alias = "stationary")]
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Density { .. } => "density",
            Command::Errors { .. } => "errors",
            Command::Contour { .. } => "contour",
            Command::Montecarlo { .. } => "montecarlo",
            Command::Stationary { .. } => "appendixc",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Density { common, .. }
            | Command::Errors { common }
            | Command::Contour { common }
            | Command::Montecarlo { common }
            | Command::Stationary { common } => common,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Probe width.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Coupling strength.
    #[arg(long, default_value_t = 1.5)]
    pub g: f64,
    /// Real part of the target weak value.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub weak_value_re: f64,
    /// Imaginary part of the target weak value.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub weak_value_im: f64,
    /// Preselected state: plus, minus, balanced, or re+,im+,re-,im-.
    #[arg(long, default_value = "balanced", allow_hyphen_values = true)]
    pub i_state: String,
    /// Postselected state as re+,im+,re-,im- (overrides the weak-value flags).
    #[arg(long, allow_hyphen_values = true)]
    pub f_state: Option<String>,
    /// Critical point; derived from --alpha when absent.
    #[arg(long, conflicts_with = "alpha")]
    pub c: Option<f64>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Readout noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise_s: f64,
    /// Monte Carlo sample count per estimate.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; defaults to $WVA_OUT_DIR/<command>.csv, else stdout. `-` forces stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Swept axis as axis:start:stop:steps with axis in g, c, aw, s. At most two.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Vec<String>,
}

impl CommonArgs {
    pub const DEFAULT_ALPHA: f64 = 0.05;
}
