//! `spin-snr-synth`: data files and checks for the steady-state SNR
//! synthesis.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 I/O failure.

mod commands;
mod expr;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spin_snr_core::RelaxationPair;

use crate::expr::parse_expr;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<spin_snr_core::Error> for CliError {
    fn from(e: spin_snr_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "spin-snr-synth", version, about = "Steady-state SNR-per-unit-time synthesis for pulsed spin-1/2 ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ernst solution: optimal M and S points, flip angle and Q.
    Ernst {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Q surface on a lattice over the half-disk.
    Qsurface {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 512)]
        grid_ny: usize,
        #[arg(long, default_value_t = 512)]
        grid_nz: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Control structure, times and optimal trajectory for one M point.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Polyline of the optimal trajectory for one M point.
    Trajectory {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        point: PointArgs,
        /// Points per segment.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ernst Q and synthesis regime over a (γ, Γ) lattice.
    PhaseDiagram {
        #[arg(long = "range-gamma", num_args = 2, value_names = ["LO", "HI"], value_parser = parse_expr,
              default_values = ["0.05", "3"], allow_negative_numbers = true)]
        range_gamma: Vec<f64>,
        #[arg(long = "range-Gamma", num_args = 2, value_names = ["LO", "HI"], value_parser = parse_expr,
              default_values = ["0.05", "4"], allow_negative_numbers = true)]
        range_big_gamma: Vec<f64>,
        #[arg(long = "n-gamma", default_value_t = 120)]
        n_gamma: usize,
        #[arg(long = "n-Gamma", default_value_t = 160)]
        n_big_gamma: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the oracle suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Added to the analytic Q inside the Q-surface check.
        #[arg(long = "q-perturb", hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
        q_perturb: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Relaxation parameters, normalized or physical. Defaults to Γ = 1.8,
/// γ = 1 when neither form is given.
#[derive(Args, Debug, Clone)]
struct ParamArgs {
    /// Normalized transverse rate Γ = 2πT_d/T₂.
    #[arg(long = "Gamma", value_parser = parse_expr)]
    big_gamma: Option<f64>,
    /// Normalized longitudinal rate γ = 2πT_d/T₁.
    #[arg(long = "gamma", value_parser = parse_expr)]
    gamma: Option<f64>,
    #[arg(long = "T1", value_parser = parse_expr)]
    t1: Option<f64>,
    #[arg(long = "T2", value_parser = parse_expr)]
    t2: Option<f64>,
    /// Detection time.
    #[arg(long = "Td", value_parser = parse_expr)]
    td: Option<f64>,
    /// Accept 2Γ < γ (T₂ > 2T₁).
    #[arg(long)]
    allow_unphysical: bool,
}

impl ParamArgs {
    fn resolve(&self) -> Result<RelaxationPair, CliError> {
        let normalized = self.big_gamma.is_some() || self.gamma.is_some();
        let physical = self.t1.is_some() || self.t2.is_some() || self.td.is_some();
        let pair = match (normalized, physical) {
            (true, true) => {
                return Err(CliError::Input("give either --Gamma/--gamma or --T1/--T2/--Td, not both".into()))
            }
            (false, false) => RelaxationPair::with_override(1.8, 1.0, self.allow_unphysical),
            (true, false) => match (self.big_gamma, self.gamma) {
                (Some(g2), Some(g1)) => RelaxationPair::with_override(g2, g1, self.allow_unphysical),
                _ => return Err(CliError::Input("--Gamma and --gamma must be given together".into())),
            },
            (false, true) => match (self.t1, self.t2, self.td) {
                (Some(t1), Some(t2), Some(td)) => RelaxationPair::from_physical(t1, t2, td, self.allow_unphysical),
                _ => return Err(CliError::Input("--T1, --T2 and --Td must be given together".into())),
            },
        };
        Ok(pair?)
    }
}

#[derive(Args, Debug, Clone)]
struct PointArgs {
    /// Measurement point M = (y, z).
    #[arg(long, num_args = 2, value_names = ["Y", "Z"], value_parser = parse_expr, required = true,
          allow_negative_numbers = true)]
    point: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPIN_SNR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("SPIN_SNR_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Ernst { params, out } => commands::ernst(&params.resolve()?, &out),
        Command::Qsurface { params, grid_ny, grid_nz, out } => {
            commands::qsurface(&params.resolve()?, grid_ny, grid_nz, &out)
        }
        Command::Classify { params, point, out } => commands::classify(&params.resolve()?, &point, &out),
        Command::Trajectory { params, point, samples, out } => {
            commands::trajectory(&params.resolve()?, &point, samples, &out)
        }
        Command::PhaseDiagram { range_gamma, range_big_gamma, n_gamma, n_big_gamma, out } => commands::phase_diagram(
            (range_gamma[0], range_gamma[1]),
            (range_big_gamma[0], range_big_gamma[1]),
            n_gamma,
            n_big_gamma,
            &out,
        ),
        Command::Verify { params, seed, q_perturb, out } => commands::verify(&params.resolve()?, seed, q_perturb, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Input(m) => eprintln!("error: {m}"),
                CliError::Io(m) => eprintln!("I/O error: {m}"),
                CliError::Verification(m) => eprintln!("verification failed: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
