use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod report;

#[derive(Parser)]
#[command(name = "nelson", version = env!("NELSON_VERSION"), about = "Semiclassical Nelson system experiments")]
struct Cli {
    /// TOML configuration; defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `output_dir` from the configuration.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,

    /// Log level for stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Spectral-core invariants on random data.
    Selfcheck,
    /// Coulomb and harmonic-oscillator eigensolver oracles.
    EigBench,
    /// Pekar minimizer.
    Pekar,
    /// Adiabatic Klein–Gordon trajectory.
    Akg,
    /// Schrödinger–Klein–Gordon run in slow time.
    Skg,
    /// ε-sweep of SKG against aKG.
    Compare,
    /// Normal-ordering constant against the cutoff.
    Counterterm,
    /// Continuum dressing scalar identity.
    DressingCheck,
    /// Dressed against plain fluctuation kernels.
    KernelIdentity,
    /// Bogoliubov frame dynamics.
    Fluct,
    /// Hellmann–Feynman and ground-state velocity oracles.
    Adiabatic,
    /// Coercivity probe and near-minimizer gap persistence.
    Gap,
    /// Prints the default configuration.
    DefaultConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Selfcheck => "selfcheck",
            Command::EigBench => "eig-bench",
            Command::Pekar => "pekar",
            Command::Akg => "akg",
            Command::Skg => "skg",
            Command::Compare => "compare",
            Command::Counterterm => "counterterm",
            Command::DressingCheck => "dressing-check",
            Command::KernelIdentity => "kernel-identity",
            Command::Fluct => "fluct",
            Command::Adiabatic => "adiabatic",
            Command::Gap => "gap",
            Command::DefaultConfig => "default-config",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .target(env_logger::Target::Stderr)
        .init();
    if let Command::DefaultConfig = cli.command {
        print!("{}", nelson_core::config::RunConfig::default().to_toml());
        return ExitCode::SUCCESS;
    }
    let code = report::run(cli.command.name(), cli.config.as_deref(), cli.output_dir);
    ExitCode::from(code as u8)
}
