//! `bregman-pr`: phase retrieval from spectrograms, single runs and batch
//! benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bregman_pr::harness::{
    load_wav, measure, run_experiment, write_wav, ExperimentConfig, ExperimentReport, InputSpec,
    Overrides, Protocol, Scaling, StftSettings, SynthKind, SynthSpec,
};
use bregman_pr::metrics::{align_and_snr, spectral_convergence};
use bregman_pr::{Error, Power, StftPlan};
use clap::{Args, Parser, Subcommand};

const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "bregman-pr", version, about = "Phase retrieval with Bregman divergences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct one input from its own spectrogram and write the result.
    Reconstruct(ReconstructArgs),
    /// Run a grid of setups over several inputs and write a report.
    #[command(subcommand)]
    Bench(Bench),
    /// Compare an estimate against a reference recording.
    Metrics(MetricsArgs),
}

#[derive(Subcommand)]
enum Bench {
    /// Measurements are the exact magnitudes of the inputs.
    Exact(BenchArgs),
    /// Measurements come from noisy mixtures after oracle Wiener filtering.
    Degrade {
        /// Input SNRs in dB, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        snr: Vec<f64>,
        #[command(flatten)]
        args: BenchArgs,
    },
}

#[derive(Args)]
struct Inputs {
    /// WAV files.
    inputs: Vec<PathBuf>,
    /// Synthetic input `kind[:seed]` with kind multisine, chirp or
    /// noise-burst. Repeatable.
    #[arg(long)]
    synth: Vec<String>,
    /// Duration of synthetic inputs in seconds.
    #[arg(long, default_value_t = 0.5)]
    duration: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 2500)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step size, in the grid's scaling unless --unitary is given.
    #[arg(long)]
    step: Option<f64>,
    /// ADMM penalty, in the grid's scaling unless --unitary is given.
    #[arg(long)]
    rho: Option<f64>,
    /// Momentum of the accelerated methods.
    #[arg(long)]
    gamma: Option<f64>,
    /// Spectrogram power, 1 or 2 (gradient setups only).
    #[arg(long)]
    d: Option<u8>,
    /// Read step sizes and penalties as values for the unitary STFT.
    #[arg(long)]
    unitary: bool,
    #[arg(long, default_value_t = 1024)]
    win_len: usize,
    #[arg(long, default_value_t = 512)]
    hop: usize,
    #[arg(long, default_value_t = 22050)]
    sample_rate: u32,
    /// Iterations between recorded objective values.
    #[arg(long, default_value_t = 10)]
    trace_period: usize,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "G·QD·1")]
    algo: String,
    /// Degrade the input at this SNR (dB) instead of using exact magnitudes.
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Output WAV.
    #[arg(long)]
    out: PathBuf,
    /// Write the objective trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Setup codes, comma separated; defaults to the whole grid.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// Directory for report.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one objective trace per run.
    #[arg(long)]
    trace: bool,
    /// Also write one reconstructed WAV per run.
    #[arg(long)]
    wav: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct MetricsArgs {
    reference: PathBuf,
    estimate: PathBuf,
    #[arg(long, default_value_t = 1024)]
    win_len: usize,
    #[arg(long, default_value_t = 512)]
    hop: usize,
}

enum Failure {
    Lib(Error),
    AllDiverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Wav(_) | Error::Report(_) => EXIT_IO,
        Error::Diverged(_) => EXIT_DIVERGED,
        _ => EXIT_INVALID,
    }
}

fn parse_synth(text: &str, duration_s: f64) -> Result<SynthSpec, Error> {
    let (kind, seed) = match text.split_once(':') {
        Some((kind, seed)) => {
            let seed = seed
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad synthetic seed in {text:?}")))?;
            (kind, seed)
        }
        None => (text, 0),
    };
    Ok(SynthSpec::new(kind.parse::<SynthKind>()?, duration_s, seed))
}

fn input_specs(inputs: &Inputs) -> Result<Vec<InputSpec>, Error> {
    let mut specs: Vec<InputSpec> = inputs
        .inputs
        .iter()
        .map(|path| InputSpec::Wav { path: path.clone() })
        .collect();
    for s in &inputs.synth {
        specs.push(InputSpec::Synthetic(parse_synth(s, inputs.duration)?));
    }
    Ok(specs)
}

fn experiment(
    inputs: Vec<InputSpec>,
    protocol: Protocol,
    algorithms: Vec<String>,
    run: &RunArgs,
) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(inputs, protocol, algorithms);
    config.stft = StftSettings {
        window_len: run.win_len,
        hop: run.hop,
        sample_rate: run.sample_rate,
    };
    config.iterations = run.iters;
    config.seed = run.seed;
    config.trace_period = run.trace_period;
    config.overrides = Overrides {
        step: run.step,
        rho: run.rho,
        gamma: run.gamma,
        d: run.d,
        scaling: run.unitary.then_some(Scaling::Unitary),
    };
    config
}

fn print_csv(report: &ExperimentReport) -> Result<(), Error> {
    print!("{}", report.to_csv()?);
    Ok(())
}

fn reconstruct(args: ReconstructArgs) -> Result<(), Failure> {
    let inputs = input_specs(&args.inputs)?;
    if inputs.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "reconstruct takes exactly one input, got {}",
            inputs.len()
        ))
        .into());
    }
    let protocol = match args.snr {
        Some(db) => Protocol::Degraded { input_snr_db: vec![db] },
        None => Protocol::Exact,
    };
    let mut config = experiment(inputs, protocol, vec![args.algo.clone()], &args.run);
    config.keep_signals = true;
    config.keep_traces = args.trace.is_some();
    let report = run_experiment(&config)?;
    print_csv(&report)?;
    let artifact = &report.artifacts[0];
    if let Some(path) = &args.trace {
        let mut text = String::from("iteration,objective\n");
        for p in &artifact.trace {
            text.push_str(&format!("{},{}\n", p.iteration, p.objective));
        }
        write_file(path, &text)?;
    }
    match &artifact.signal {
        Some(signal) => write_wav(&args.out, signal)?,
        None => return Err(Failure::AllDiverged),
    }
    if report.all_diverged() {
        return Err(Failure::AllDiverged);
    }
    Ok(())
}

fn bench(protocol: Protocol, args: BenchArgs) -> Result<(), Failure> {
    let algorithms = if args.algo.is_empty() {
        ExperimentConfig::all_setups()
    } else {
        args.algo.clone()
    };
    let mut config = experiment(input_specs(&args.inputs)?, protocol, algorithms, &args.run);
    config.keep_traces = args.trace;
    config.keep_signals = args.wav;
    if (args.trace || args.wav) && args.out.is_none() {
        return Err(Error::InvalidConfig("--trace and --wav need --out".into()).into());
    }
    let report = run_experiment(&config)?;
    print_csv(&report)?;
    if let Some(dir) = &args.out {
        report.write(dir)?;
    }
    if report.all_diverged() {
        return Err(Failure::AllDiverged);
    }
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), Failure> {
    let reference = load_wav(&args.reference, None)?;
    let estimate = load_wav(&args.estimate, Some(reference.sample_rate()))?;
    let plan = StftPlan::sine_bell(args.win_len, args.hop, reference.len())?;
    let x_star = plan.pad(reference.samples())?;
    let n = estimate.len().min(reference.len());
    let x = plan.pad(&estimate.samples()[..n])?;
    let r = measure(&x_star, &plan, Power::Magnitude)?;
    let sc = spectral_convergence(&r, &x, &plan)?;
    let (snr, alignment) = align_and_snr(&x_star, &x)?;
    println!("sc,snr_db,shift,scale");
    println!("{sc},{snr},{},{}", alignment.shift, alignment.scale);
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reconstruct(args) => reconstruct(args),
        Command::Bench(Bench::Exact(args)) => bench(Protocol::Exact, args),
        Command::Bench(Bench::Degrade { snr, args }) => {
            bench(Protocol::Degraded { input_snr_db: snr }, args)
        }
        Command::Metrics(args) => metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::AllDiverged) => {
            eprintln!("error: every run diverged");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
