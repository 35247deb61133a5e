//! Batch runs over inputs × conditions × setups, with CSV/JSON reports.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Scaling, Setup, SetupGrid};
use super::protocol::{degrade, derive_seed, measure, signal_hash, WIENER_EPSILON};
use super::synth::{synth_signal, SynthSpec};
use super::wav::{load_wav, write_wav};
use crate::divergence::{Measurements, Power};
use crate::error::{Error, Result};
use crate::metrics::{align_and_snr, spectral_convergence, SNR_CAP_DB};
use crate::solvers::{random_phase_init, InitialEstimate, TracePoint};
use crate::stft::{StftPlan, TimeSignal};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_HEADER: [&str; 13] = [
    "input",
    "algo",
    "family",
    "direction",
    "d",
    "iters",
    "condition",
    "sc",
    "snr_db",
    "snr_improvement_db",
    "wall_ms",
    "seed",
    "diverged",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum InputSpec {
    Wav { path: PathBuf },
    Synthetic(SynthSpec),
}

impl InputSpec {
    pub fn id(&self) -> String {
        match self {
            Self::Wav { path } => path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
            Self::Synthetic(spec) => spec.id(),
        }
    }

    pub fn load(&self, stft: &StftSettings) -> Result<TimeSignal> {
        match self {
            Self::Wav { path } => load_wav(path, Some(stft.sample_rate)),
            Self::Synthetic(spec) => synth_signal(spec, stft.sample_rate, stft.window_len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Protocol {
    Exact,
    Degraded { input_snr_db: Vec<f64> },
}

/// One measurement condition of an input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Exact,
    Degraded(f64),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Self::Exact => "exact".into(),
            Self::Degraded(db) => format!("{db}"),
        }
    }
}

impl Protocol {
    pub fn conditions(&self) -> Vec<Condition> {
        match self {
            Self::Exact => vec![Condition::Exact],
            Self::Degraded { input_snr_db } => {
                input_snr_db.iter().map(|&db| Condition::Degraded(db)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftSettings {
    pub window_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftSettings {
    fn default() -> Self {
        Self {
            window_len: 1024,
            hop: 512,
            sample_rate: 22050,
        }
    }
}

impl StftSettings {
    pub fn plan(&self, content_len: usize) -> Result<StftPlan> {
        StftPlan::sine_bell(self.window_len, self.hop, content_len)
    }
}

/// Values that replace the grid defaults for every selected setup. `step`
/// and `rho` are read in the grid's scaling unless `scaling` is given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub step: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub d: Option<u8>,
    #[serde(default)]
    pub scaling: Option<Scaling>,
}

impl Overrides {
    pub fn apply(&self, setup: &Setup) -> Result<Setup> {
        let mut out = match self.d {
            Some(d) => setup.with_power(Power::try_from(d)?)?,
            None => setup.clone(),
        };
        if out.step.is_some() {
            out.step = self.step.or(out.step);
        }
        if out.rho.is_some() {
            out.rho = self.rho.or(out.rho);
        }
        out.gamma = self.gamma.unwrap_or(out.gamma);
        if let Some(scaling) = self.scaling {
            out.scaling = scaling;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub inputs: Vec<InputSpec>,
    pub protocol: Protocol,
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub stft: StftSettings,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    /// Iterations between recorded objective values in dumped traces.
    pub trace_period: usize,
    /// Keep each run's objective trace in the report.
    #[serde(default)]
    pub keep_traces: bool,
    /// Keep each run's final signal in the report.
    #[serde(default)]
    pub keep_signals: bool,
}

impl ExperimentConfig {
    pub fn new(inputs: Vec<InputSpec>, protocol: Protocol, algorithms: Vec<String>) -> Self {
        Self {
            inputs,
            protocol,
            algorithms,
            stft: StftSettings::default(),
            iterations: 2500,
            seed: 0,
            overrides: Overrides::default(),
            trace_period: 10,
            keep_traces: false,
            keep_signals: false,
        }
    }

    /// Every code of the built-in grid, `INIT` included.
    pub fn all_setups() -> Vec<String> {
        SetupGrid::builtin().codes().into_iter().map(String::from).collect()
    }

    pub fn validate(&self) -> Result<Vec<Setup>> {
        if self.inputs.is_empty() {
            return Err(Error::InvalidConfig("no inputs".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms".into()));
        }
        if self.trace_period == 0 {
            return Err(Error::InvalidConfig("trace period must be at least 1".into()));
        }
        if let Protocol::Degraded { input_snr_db } = &self.protocol {
            if input_snr_db.is_empty() {
                return Err(Error::InvalidConfig("degraded protocol needs input SNRs".into()));
            }
            if let Some(v) = input_snr_db.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
                return Err(Error::InvalidConfig(format!("invalid input SNR {v}")));
            }
        }
        let mut ids = HashSet::new();
        for input in &self.inputs {
            if !ids.insert(input.id()) {
                return Err(Error::InvalidConfig(format!("duplicate input id {}", input.id())));
            }
        }
        let grid = SetupGrid::builtin();
        let mut seen = HashSet::new();
        let mut setups = Vec::new();
        for code in &self.algorithms {
            let setup = self.overrides.apply(&grid.get(code)?)?;
            if !seen.insert(setup.code.clone()) {
                return Err(Error::InvalidConfig(format!("duplicate algorithm {}", setup.code)));
            }
            setups.push(setup);
        }
        Ok(setups)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub input: String,
    pub algo: String,
    pub family: String,
    pub direction: String,
    pub d: u8,
    pub iters: usize,
    pub condition: String,
    pub sc: f64,
    pub snr_db: f64,
    pub snr_improvement_db: f64,
    pub wall_ms: f64,
    pub seed: u64,
    pub diverged: bool,
}

/// The measurements and shared initialization of one input × condition.
#[derive(Debug, Clone, Serialize)]
pub struct CellContext {
    pub input: String,
    pub condition: String,
    pub phase_seed: u64,
    pub noise_seed: Option<u64>,
    pub realized_snr_db: Option<f64>,
    pub init_hash: String,
    #[serde(skip)]
    pub sample_rate: u32,
    #[serde(skip)]
    pub plan: StftPlan,
    #[serde(skip)]
    pub reference: Vec<f64>,
    #[serde(skip)]
    pub measurements: Measurements,
    #[serde(skip)]
    pub init: InitialEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunArtifact {
    pub input: String,
    pub condition: String,
    pub algo: String,
    /// Hash of the initial signal the run started from.
    pub init_hash: String,
    pub trace: Vec<TracePoint>,
    #[serde(skip)]
    pub signal: Option<TimeSignal>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub contexts: Vec<CellContext>,
    pub artifacts: Vec<RunArtifact>,
}

fn build_context(
    config: &ExperimentConfig,
    id: &str,
    signal: &TimeSignal,
    condition: Condition,
) -> Result<CellContext> {
    let plan = config.stft.plan(signal.len())?;
    let reference = plan.pad(signal.samples())?;
    let label = condition.label();
    let phase_seed = derive_seed(config.seed, id, &label, "phase");
    let (measurements, noise_seed, realized) = match condition {
        Condition::Exact => (measure(&reference, &plan, Power::Magnitude)?, None, None),
        Condition::Degraded(db) => {
            let seed = derive_seed(config.seed, id, &label, "noise");
            let d = degrade(&reference, db, &plan, seed)?;
            (d.measurements, Some(seed), Some(d.realized_snr_db))
        }
    };
    let init = random_phase_init(&measurements, &plan, phase_seed)?;
    Ok(CellContext {
        input: id.to_string(),
        condition: label,
        phase_seed,
        noise_seed,
        realized_snr_db: realized,
        init_hash: signal_hash(&init.signal),
        sample_rate: signal.sample_rate(),
        plan,
        reference,
        measurements,
        init,
    })
}

/// Spectral convergence against the magnitude measurements, SNR against the
/// clean reference. `None` when the estimate is unusable.
fn evaluate(ctx: &CellContext, x: &[f64]) -> (f64, f64) {
    if x.iter().any(|v| !v.is_finite()) {
        return (f64::NAN, f64::NAN);
    }
    let sc = spectral_convergence(&ctx.measurements, x, &ctx.plan).unwrap_or(f64::NAN);
    let snr = align_and_snr(&ctx.reference, x).map_or(f64::NAN, |(s, _)| s);
    (sc, snr)
}

fn run_cell(config: &ExperimentConfig, ctx: &CellContext, setup: &Setup) -> (ReportRow, RunArtifact) {
    let start = Instant::now();
    let (_, init_snr) = evaluate(ctx, &ctx.init.signal);
    let mut row = ReportRow {
        input: ctx.input.clone(),
        algo: setup.code.clone(),
        family: setup.family(),
        direction: setup.direction(),
        d: setup.power().as_u8(),
        iters: 0,
        condition: ctx.condition.clone(),
        sc: f64::NAN,
        snr_db: f64::NAN,
        snr_improvement_db: f64::NAN,
        wall_ms: 0.0,
        seed: ctx.phase_seed,
        diverged: false,
    };
    let mut artifact = RunArtifact {
        input: ctx.input.clone(),
        condition: ctx.condition.clone(),
        algo: setup.code.clone(),
        init_hash: ctx.init_hash.clone(),
        trace: Vec::new(),
        signal: None,
    };
    let final_signal = match &setup.method {
        None => Some(ctx.init.signal.clone()),
        Some(method) => {
            let measurements = ctx.measurements.to_power(setup.power());
            let mut solver = setup.solver_config(config.iterations, ctx.phase_seed, ctx.plan.fft_size());
            solver.trace_period = config.trace_period;
            match method.run(&measurements, &ctx.plan, &solver, &ctx.init) {
                Ok(report) => {
                    row.iters = report.iterations;
                    artifact.trace = report.loss_trace;
                    Some(report.signal)
                }
                Err(Error::Diverged(run)) => {
                    row.diverged = true;
                    row.iters = run.iteration;
                    artifact.trace = run.trace;
                    Some(run.last_signal)
                }
                Err(_) => {
                    row.diverged = true;
                    None
                }
            }
        }
    };
    if let Some(x) = final_signal {
        let (sc, snr) = evaluate(ctx, &x);
        row.sc = sc;
        row.snr_db = snr;
        row.snr_improvement_db = if snr == init_snr { 0.0 } else { snr - init_snr };
        if config.keep_signals {
            let content = ctx.plan.unpad(&x).map(<[f64]>::to_vec).unwrap_or(x);
            artifact.signal = TimeSignal::new(content, ctx.sample_rate).ok();
        }
    }
    if !config.keep_traces {
        artifact.trace.clear();
    }
    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    (row, artifact)
}

/// Runs every selected setup on every input and condition. Individual run
/// failures are recorded in the `diverged` column; configuration and input
/// errors abort the batch.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let setups = config.validate()?;
    let signals = config
        .inputs
        .iter()
        .map(|input| Ok((input.id(), input.load(&config.stft)?)))
        .collect::<Result<Vec<_>>>()?;
    let conditions = config.protocol.conditions();
    let pairs: Vec<(usize, Condition)> = (0..signals.len())
        .flat_map(|i| conditions.iter().map(move |c| (i, *c)))
        .collect();
    let contexts = pairs
        .par_iter()
        .map(|(i, c)| build_context(config, &signals[*i].0, &signals[*i].1, *c))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|c| (0..setups.len()).map(move |s| (c, s)))
        .collect();
    let mut results: Vec<(usize, usize, ReportRow, RunArtifact)> = cells
        .par_iter()
        .map(|&(c, s)| {
            let (row, artifact) = run_cell(config, &contexts[c], &setups[s]);
            (c, s, row, artifact)
        })
        .collect();
    results.sort_by_key(|(c, s, _, _)| (*c, *s));
    let (rows, artifacts) = results.into_iter().map(|(_, _, r, a)| (r, a)).unzip();
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        contexts,
        artifacts,
    })
}

#[derive(Serialize)]
struct Metadata<'a> {
    snr_cap_db: f64,
    wiener_epsilon: f64,
    stft: &'a StftSettings,
    normalization: &'static str,
    sc_reference: &'static str,
    snr_reference: &'static str,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    metadata: Metadata<'a>,
    conditions: &'a [CellContext],
    rows: &'a [ReportRow],
}

impl ExperimentReport {
    pub fn all_diverged(&self) -> bool {
        let runs: Vec<_> = self.rows.iter().filter(|r| r.algo != "INIT").collect();
        !runs.is_empty() && runs.iter().all(|r| r.diverged)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        writer.write_record(CSV_HEADER).map_err(|e| Error::Report(e.to_string()))?;
        for row in &self.rows {
            writer.serialize(row).map_err(|e| Error::Report(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        let report = JsonReport {
            version: VERSION,
            config: &self.config,
            metadata: Metadata {
                snr_cap_db: SNR_CAP_DB,
                wiener_epsilon: WIENER_EPSILON,
                stft: &self.config.stft,
                normalization: "unitary: 1/sqrt(M) in both directions, sine-bell window",
                sc_reference: "magnitude measurements of the condition (degraded ones when degraded)",
                snr_reference: "clean signal, padded length, best integer delay and real scale",
            },
            conditions: &self.contexts,
            rows: &self.rows,
        };
        serde_json::to_string_pretty(&report).map_err(|e| Error::Report(e.to_string()))
    }

    /// Writes `report.csv`, `report.json` and, when kept, one trace CSV and
    /// one WAV per run into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, self.to_csv()?).map_err(io(&csv_path))?;
        let json_path = dir.join("report.json");
        fs::write(&json_path, self.to_json()?).map_err(io(&json_path))?;
        for artifact in &self.artifacts {
            let stem = format!(
                "{}_{}_{}",
                artifact.input,
                artifact.condition,
                artifact.algo.replace('·', "-")
            );
            if self.config.keep_traces && !artifact.trace.is_empty() {
                let path = dir.join(format!("{stem}.trace.csv"));
                let mut text = String::from("iteration,objective\n");
                for p in &artifact.trace {
                    text.push_str(&format!("{},{}\n", p.iteration, p.objective));
                }
                fs::write(&path, text).map_err(io(&path))?;
            }
            if let Some(signal) = &artifact.signal {
                write_wav(dir.join(format!("{stem}.wav")), signal)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::SynthKind;

    fn small(protocol: Protocol, algorithms: &[&str]) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            vec![InputSpec::Synthetic(SynthSpec::new(SynthKind::Chirp, 0.1, 1))],
            protocol,
            algorithms.iter().map(|s| s.to_string()).collect(),
        );
        c.stft = StftSettings {
            window_len: 256,
            hop: 128,
            sample_rate: 22050,
        };
        c.iterations = 20;
        c
    }

    #[test]
    fn validation() {
        assert!(small(Protocol::Exact, &[]).validate().is_err());
        assert!(small(Protocol::Exact, &["G·XX·L1"]).validate().is_err());
        assert!(small(Protocol::Exact, &["GLA", "gla"]).validate().is_err());
        assert!(small(Protocol::Degraded { input_snr_db: vec![] }, &["GLA"]).validate().is_err());
        let mut c = small(Protocol::Exact, &["A·KL·L1"]);
        c.overrides.d = Some(2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn rows_follow_config_order_and_share_the_init() {
        let mut c = small(Protocol::Degraded { input_snr_db: vec![10.0, -20.0] }, &["INIT", "GLA", "G·KL·L1"]);
        c.keep_traces = true;
        let report = run_experiment(&c).unwrap();
        assert_eq!(report.rows.len(), 6);
        let algos: Vec<_> = report.rows.iter().map(|r| r.algo.as_str()).collect();
        assert_eq!(algos, ["INIT", "GLA", "G·KL·L1", "INIT", "GLA", "G·KL·L1"]);
        assert_eq!(report.rows[0].condition, "10");
        assert_eq!(report.rows[3].condition, "-20");
        assert_eq!(report.rows[0].snr_improvement_db, 0.0);
        for a in &report.artifacts[..3] {
            assert_eq!(a.init_hash, report.contexts[0].init_hash);
        }
        assert_ne!(report.contexts[0].init_hash, report.contexts[1].init_hash);
        assert!(!report.artifacts[1].trace.is_empty());
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(csv.lines().count(), 7);
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 6);
        assert_eq!(json["version"], VERSION);
    }

    #[test]
    fn failed_runs_are_flagged() {
        let mut c = small(Protocol::Exact, &["G·QD·2"]);
        c.overrides.step = Some(10.0);
        let report = run_experiment(&c).unwrap();
        assert!(report.rows[0].diverged);
        assert!(report.all_diverged());
    }

    #[test]
    fn artifacts_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Protocol::Exact, &["GLA"]);
        c.keep_traces = true;
        c.keep_signals = true;
        run_experiment(&c).unwrap().write(dir.path()).unwrap();
        let names: HashSet<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        for n in ["report.csv", "report.json", "chirp-1_exact_GLA.trace.csv", "chirp-1_exact_GLA.wav"] {
            assert!(names.contains(n), "{n} missing from {names:?}");
        }
    }
}
