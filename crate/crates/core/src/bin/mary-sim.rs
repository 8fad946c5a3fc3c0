use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mary_walsh::sim::{run, ExperimentSpec, Mode, SimError};

/// Capacity tables, codebook dumps, BER sweeps and throughput comparisons
/// for M-ary bi-orthogonal Walsh signaling.
#[derive(Parser)]
#[command(name = "mary-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pole and degraded capacity with single-user rate bounds.
    Capacity(Common),
    /// Monte Carlo bit and symbol error rates over the full chain.
    Ber(Common),
    /// Multi-user aggregate versus single-user M-ary throughput.
    Throughput(Common),
    /// Selected codes and their bit mapping.
    Codebook(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment spec; defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CSV destination; standard output when neither this nor the spec names one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-frame diagnostics CSV (ber only).
    #[arg(long)]
    diag: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Code length N.
    #[arg(long)]
    order: Option<usize>,
    /// Bits per symbol K.
    #[arg(long)]
    bits: Option<u32>,
}

fn execute(mode: Mode, args: Common) -> Result<(), SimError> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::from_path(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if args.workers.is_some() {
        spec.workers = args.workers;
    }
    if let Some(order) = args.order {
        spec.codebook.order = order;
    }
    if let Some(bits) = args.bits {
        spec.codebook.bits_per_symbol = bits;
    }
    if args.diag.is_some() && mode != Mode::Ber {
        return Err(SimError::InvalidSpec("--diag only applies to ber".into()));
    }
    let output = run(&spec, mode)?;
    let write = |path: &PathBuf, text: &str| {
        std::fs::write(path, text)
            .map_err(|e| SimError::Runtime(format!("{}: {e}", path.display())))
    };
    match args.out.as_ref().or(spec.output.as_ref()) {
        Some(path) => write(path, &output.csv)?,
        None => print!("{}", output.csv),
    }
    if let (Some(path), Some(diag)) = (&args.diag, &output.diagnostics) {
        write(path, diag)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors share the invalid-spec exit code; 2 is reserved for runtime failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (mode, args) = match cli.command {
        Command::Capacity(a) => (Mode::Capacity, a),
        Command::Ber(a) => (Mode::Ber, a),
        Command::Throughput(a) => (Mode::Throughput, a),
        Command::Codebook(a) => (Mode::Codebook, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mary-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
