//! `vqm` experiment driver. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use vqm::config::{self, Experiment, FileConfig, Overrides};
use vqm::experiments::{self, ExperimentError};
use vqm::report::{write_plot_script, ReportError};

#[derive(Parser)]
#[command(
    name = "vqm",
    version,
    about = "Variational quantum metrology: train entangled probes and measurements \
             against noisy 3D-field sensing bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ansatz kind: star | ring | squeezing.
    #[arg(long)]
    ansatz: Option<String>,
    /// Number of probe qubits.
    #[arg(long = "n-qubits")]
    n_qubits: Option<usize>,
    /// Training restarts per grid point.
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker threads (0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and dump the iteration history.
    Train(CommonArgs),
    /// Trained bounds and tradeoff versus dephasing probability.
    SweepDephasing(CommonArgs),
    /// Gradient-variance decay versus noise over random initializations.
    BarrenPlateau(CommonArgs),
    /// Trained bounds versus sensing time under Ornstein-Uhlenbeck noise.
    OuSweep(CommonArgs),
    /// Trained best cost over a (prep layers, POVM layers) grid.
    LayerScan(CommonArgs),
    /// Train with the classical bound itself as the cost.
    CostVariant(CommonArgs),
    /// Concentratable entanglement of a reference or circuit state.
    Entanglement(CommonArgs),
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Train(_) => Experiment::Train,
            Command::SweepDephasing(_) => Experiment::SweepDephasing,
            Command::BarrenPlateau(_) => Experiment::BarrenPlateau,
            Command::OuSweep(_) => Experiment::OuSweep,
            Command::LayerScan(_) => Experiment::LayerScan,
            Command::CostVariant(_) => Experiment::CostVariant,
            Command::Entanglement(_) => Experiment::Entanglement,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Train(a)
            | Command::SweepDephasing(a)
            | Command::BarrenPlateau(a)
            | Command::OuSweep(a)
            | Command::LayerScan(a)
            | Command::CostVariant(a)
            | Command::Entanglement(a) => a,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let experiment = cli.command.experiment();
    let args = cli.command.args();

    let file = match &args.config {
        Some(path) => match config::load_file(path) {
            Ok(f) => f,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => FileConfig::default(),
    };

    let ansatz = match &args.ansatz {
        Some(s) => match vqm::ansatz::AnsatzKind::from_str(s) {
            Ok(k) => Some(k),
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => None,
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        ansatz,
        n_qubits: args.n_qubits,
        restarts: args.restarts,
        threads: args.threads,
    };

    let cfg = match config::resolve(experiment, &file, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };

    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
        {
            return fail(EXIT_CONFIG, format!("cannot size thread pool: {e}"));
        }
    }

    let doc = match experiments::run(&cfg) {
        Ok(doc) => doc,
        Err(ExperimentError::Config(e)) => return fail(EXIT_CONFIG, e),
        Err(ExperimentError::Report(ReportError::Io { path, source })) => {
            return fail(EXIT_CONFIG, format!("cannot write {path}: {source}"))
        }
        Err(e) => return fail(EXIT_NUMERICAL, e),
    };

    if let Err(e) = doc.write_to(&cfg.out) {
        return fail(EXIT_CONFIG, e);
    }
    if cfg.plot_scripts {
        let (xlabel, ylabel, plots) = experiments::plot_spec(&cfg);
        if let Err(e) = write_plot_script(&cfg.out, cfg.experiment.name(), xlabel, ylabel, &plots) {
            return fail(EXIT_CONFIG, e);
        }
    }
    println!(
        "{}: wrote {} ({} data rows)",
        cfg.experiment.name(),
        cfg.out.display(),
        doc.rows.len()
    );
    ExitCode::SUCCESS
}
