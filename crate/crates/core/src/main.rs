use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybrid_mimo::moments::{run_suite, Suite, VerifyParams};
use hybrid_mimo::sweep::{
    preset, query_thresholds, run_sweep, write_moment_csv, write_sweep_csv, write_to, NumOrText, SweepOptions,
};
use hybrid_mimo::{db_to_linear, Error};

/// Environment variable selecting the number of worker threads.
const WORKERS_ENV: &str = "HYBRID_MIMO_WORKERS";

/// Sub-connected hybrid massive-MIMO rate simulator.
#[derive(Debug, Parser)]
#[command(name = "hybrid-mimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo sweep over SNR, M or K, written as CSV.
    Sweep(SweepArgs),
    /// SNR thresholds between analog and hybrid detection.
    Thresholds {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
    },
    /// Monte Carlo verification of the moment identities.
    Verify(VerifyArgs),
    /// Re-run a figure preset (fig1a, fig1b, fig2, fig3, fig4).
    Reproduce {
        figure: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Antenna count, or start:step:stop to sweep it.
    #[arg(long)]
    m: Option<String>,
    /// User count, or start:step:stop to sweep it.
    #[arg(long)]
    k: Option<String>,
    /// SNR in dB, or start:step:stop.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Comma-separated subset of analog,mrc,zf.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// rayleigh or mmwave.
    #[arg(long)]
    channel: Option<String>,
    /// mmWave path count.
    #[arg(long)]
    paths: Option<usize>,
    /// mmWave antenna spacing over wavelength.
    #[arg(long)]
    spacing: Option<f64>,
    /// up or down.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with the same keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// SNR of the ZF suite in dB.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn text(s: Option<String>) -> Option<NumOrText> {
    s.map(NumOrText::Text)
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            SweepOptions::from_json(&body)?
        }
        None => SweepOptions::default(),
    };
    let flags = SweepOptions {
        m: text(args.m),
        k: text(args.k),
        snr_db: text(args.snr_db),
        schemes: args.schemes,
        trials: args.trials,
        seed: args.seed,
        channel: args.channel,
        paths: args.paths,
        spacing: args.spacing,
        direction: args.direction,
        out: args.out.map(|p| p.to_string_lossy().into_owned()),
    };
    let opts = file.merge(flags);
    let spec = opts.into_spec()?;
    let rows = run_sweep(&spec)?;
    let out = opts.out.map(PathBuf::from);
    write_to(out.as_deref(), |w| write_sweep_csv(&rows, w))?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let suite: Suite = args.suite.parse()?;
    let params = VerifyParams {
        n: args.n,
        k: args.k,
        gamma: args.snr_db.map(db_to_linear),
        samples: args.samples,
        seed: args.seed,
    };
    let results = run_suite(suite, &params)?;
    write_to(args.out.as_deref(), |w| write_moment_csv(&results, w))?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.ok()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        eprintln!("verification failed: {}", failed.join(", "));
        Err(Failure::Verification)
    }
}

fn reproduce(figure: &str, trials: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for mut spec in preset(figure)? {
        if let Some(t) = trials {
            spec.trials = t;
        }
        if let Some(s) = seed {
            spec.seed = s;
        }
        rows.extend(run_sweep(&spec)?);
    }
    write_to(out.as_deref(), |w| write_sweep_csv(&rows, w))?;
    Ok(())
}

fn configure_workers() -> Result<(), Failure> {
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let n: usize = value
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{value}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_workers()?;
    match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Thresholds { m, k } => {
            print!("{}", query_thresholds(m, k)?);
            Ok(())
        }
        Command::Verify(args) => verify(args),
        Command::Reproduce { figure, trials, seed, out } => reproduce(&figure, trials, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(2),
    }
}
