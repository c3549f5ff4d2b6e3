mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use shapley_core::game::{shapley_family, GameConfig};
use shapley_core::GamePair;

use output::{Format, Sink};

#[derive(Parser)]
#[command(name = "shapley-flow", version, about = "Best-response dynamics in the 3x3 Shapley family")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// family parameter in (0,1); command default when omitted
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// game file: {"family_beta": b} or {"A": [[..]], "B": [[..]]}
    #[arg(long, global = true, conflicts_with = "beta")]
    pub game: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// output directory; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Global {
    pub fn beta_or(&self, default: f64) -> f64 {
        self.beta.unwrap_or(default)
    }

    pub fn game(&self, default_beta: f64) -> Result<GamePair> {
        match &self.game {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let cfg: GameConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                Ok(cfg.build()?)
            }
            None => Ok(shapley_family(self.beta_or(default_beta))?),
        }
    }

    /// Commands built on the symmetric family only.
    pub fn family_beta(&self, default: f64) -> Result<f64> {
        anyhow::ensure!(self.game.is_none(), "this command works on the family; use --beta");
        Ok(self.beta_or(default))
    }

    pub fn sink(&self) -> Sink {
        Sink { out: self.out.clone(), format: self.format }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow from a start and record every switching event
    Simulate(commands::SimulateArgs),
    /// Itinerary, dithering code and detected cycle of a simulated orbit
    Code(commands::CodeArgs),
    /// Hexagonal boundary orbit, genuine orbit and line landmarks
    Induced,
    /// Section crossings of the induced flow
    Section(commands::SectionArgs),
    /// Solvers on the planar jitter-map model
    Jitter(commands::JitterArgs),
    /// Run the acceptance criteria
    Verify(commands::VerifyArgs),
    /// Orbit classification and radial map over a parameter grid
    Sweep(commands::SweepArgs),
    /// Persistence under random payoff perturbations
    Perturb(commands::PerturbArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StartKind {
    Random,
    Hexagon,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SHAPLEY_FLOW_THREADS") {
        let n: usize = v.parse().with_context(|| format!("SHAPLEY_FLOW_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let g = &cli.global;
    match cli.command {
        Command::Simulate(a) => commands::simulate(g, &a),
        Command::Code(a) => commands::code(g, &a),
        Command::Induced => commands::induced(g),
        Command::Section(a) => commands::section(g, &a),
        Command::Jitter(a) => commands::jitter(g, &a),
        Command::Verify(a) => commands::verify(g, &a),
        Command::Sweep(a) => commands::sweep(g, &a),
        Command::Perturb(a) => commands::perturb(g, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let integration = e
                .downcast_ref::<shapley_core::Error>()
                .is_some_and(|c| matches!(c, shapley_core::Error::Integration(_)));
            ExitCode::from(if integration { 2 } else { 1 })
        }
    }
}
