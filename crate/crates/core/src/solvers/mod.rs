//! Iterative phase-retrieval algorithms.
//!
//! All solvers start from an [`InitialEstimate`] (typically drawn by
//! [`random_phase_init`]) and return a [`RunReport`] with the final signal and
//! a trace of the algorithm's own objective. Spectral convergence and SNR are
//! left to [`crate::metrics`].

mod admm;
mod gradient;
mod griffin_lim;

use std::f64::consts::PI;
use std::fmt;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{Measurements, Power, ProblemSpec, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::stft::{StftPlan, TfMatrix};
use crate::Complex64;

pub use admm::run_admm;
pub use gradient::run_gradient;
pub use griffin_lim::{run_fgla, run_gla, run_gladmm};

/// Objective growth factor over its initial value treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Where the gradient momentum buffer starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentumStart {
    /// `y_old = x_0`: no extrapolation on the first step.
    #[default]
    Iterate,
    /// `y_old = 0`: the first step extrapolates away from the origin.
    Zero,
}

/// Hyperparameters shared by all solvers. Which fields are required depends
/// on the method: `step` for gradient descent, `rho` for ADMM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: Option<f64>,
    pub gamma: f64,
    pub rho: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub trace_period: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub momentum_start: MomentumStart,
    /// Keep every iterate in the report.
    #[serde(default)]
    pub record_iterates: bool,
    /// GLADMM only: hold the dual variable at zero.
    #[serde(default)]
    pub force_zero_dual: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step: None,
            gamma: 0.99,
            rho: None,
            iterations: 2500,
            seed: 0,
            trace_period: 1,
            epsilon: DEFAULT_EPSILON,
            momentum_start: MomentumStart::Iterate,
            record_iterates: false,
            force_zero_dual: false,
        }
    }
}

impl SolverConfig {
    fn validate_common(&self) -> Result<()> {
        if self.trace_period == 0 {
            return Err(Error::InvalidConfig("trace period must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    fn momentum(&self) -> Result<f64> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "acceleration gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        Ok(self.gamma)
    }

    fn step_size(&self) -> Result<f64> {
        match self.step {
            Some(mu) if mu > 0.0 && mu.is_finite() => Ok(mu),
            Some(mu) => Err(Error::InvalidConfig(format!("step size must be positive, got {mu}"))),
            None => Err(Error::InvalidConfig("gradient descent requires a step size".into())),
        }
    }

    fn penalty(&self) -> Result<f64> {
        match self.rho {
            Some(rho) if rho > 0.0 && rho.is_finite() => Ok(rho),
            Some(rho) => Err(Error::InvalidConfig(format!("penalty rho must be positive, got {rho}"))),
            None => Err(Error::InvalidConfig("ADMM requires a penalty rho".into())),
        }
    }
}

/// An algorithm together with the problem it optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Gradient(ProblemSpec),
    Admm(ProblemSpec),
    Gla,
    Fgla,
    Gladmm,
}

impl Method {
    pub fn run(
        &self,
        measurements: &Measurements,
        plan: &StftPlan,
        config: &SolverConfig,
        init: &InitialEstimate,
    ) -> Result<RunReport> {
        match self {
            Self::Gradient(problem) => run_gradient(problem, measurements, plan, config, init),
            Self::Admm(problem) => run_admm(problem, measurements, plan, config, init),
            Self::Gla => run_gla(measurements, plan, config, init),
            Self::Fgla => run_fgla(measurements, plan, config, init),
            Self::Gladmm => run_gladmm(measurements, plan, config, init),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gradient(p) => write!(f, "gradient({}, {}, d={})", p.divergence, p.direction, p.power),
            Self::Admm(p) => write!(f, "admm({}, {}, d={})", p.divergence, p.direction, p.power),
            Self::Gla => f.write_str("gla"),
            Self::Fgla => f.write_str("fgla"),
            Self::Gladmm => f.write_str("gladmm"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub signal: Vec<f64>,
    pub loss_trace: Vec<TracePoint>,
    pub iterations: usize,
    pub wall_time: Duration,
    /// Measurement entries raised to the floor by the objective.
    pub floored_entries: usize,
    /// Largest relative imaginary part dropped by any inverse STFT.
    pub max_imag_residual: f64,
    /// `x_1, ..., x_T` when [`SolverConfig::record_iterates`] is set.
    pub iterates: Vec<Vec<f64>>,
}

/// State of a run that left the finite range or blew up.
#[derive(Clone)]
pub struct DivergedRun {
    pub iteration: usize,
    pub reason: String,
    pub trace: Vec<TracePoint>,
    /// Last iterate that was still finite.
    pub last_signal: Vec<f64>,
    pub wall_time: Duration,
}

impl fmt::Debug for DivergedRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivergedRun")
            .field("iteration", &self.iteration)
            .field("reason", &self.reason)
            .field("trace_len", &self.trace.len())
            .field("signal_len", &self.last_signal.len())
            .finish()
    }
}

/// Time-frequency initialization and its synthesized signal.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate {
    pub tf: TfMatrix,
    pub signal: Vec<f64>,
}

impl InitialEstimate {
    /// Starts from a known signal (its own STFT as the matrix).
    pub fn from_signal(plan: &StftPlan, signal: &[f64]) -> Result<Self> {
        Ok(Self {
            tf: plan.stft(signal)?,
            signal: plan.pad(signal)?,
        })
    }

    pub(crate) fn check(&self, plan: &StftPlan) -> Result<()> {
        if self.signal.len() != plan.padded_length()
            || self.tf.dims() != (plan.fft_size(), plan.num_frames())
        {
            return Err(Error::InvalidInput("initial estimate does not match the plan".into()));
        }
        Ok(())
    }
}

/// `X = R^(1/d) e^(i phi)` with `phi` uniform on `[0, 2 pi)`, and `x = istft(X)`.
///
/// Phases are drawn for the stored nonnegative-frequency bins; the DC and
/// Nyquist bins, which are their own mirror images, get a random sign so the
/// matrix stays frequency-Hermitian.
pub fn random_phase_init(
    measurements: &Measurements,
    plan: &StftPlan,
    seed: u64,
) -> Result<InitialEstimate> {
    if measurements.dims() != (plan.fft_size(), plan.num_frames()) {
        return Err(Error::InvalidInput("measurements do not match the plan".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = plan.num_bins();
    let m_size = plan.fft_size();
    let data = measurements
        .values()
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let m = k % bins;
            let magnitude = measurements.power().root(r);
            if m == 0 || (m_size % 2 == 0 && m == m_size / 2) {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Complex64::new(sign * magnitude, 0.0)
            } else {
                Complex64::from_polar(magnitude, rng.gen_range(0.0..2.0 * PI))
            }
        })
        .collect();
    let tf = TfMatrix::from_half(plan.fft_size(), plan.num_frames(), data)?;
    let signal = plan.istft(&tf)?;
    Ok(InitialEstimate { tf, signal })
}

/// `1/2 || |X| - R ||^2` over the full matrix, without flooring.
pub fn quadratic_loss(magnitudes: &Measurements, tf: &TfMatrix) -> f64 {
    tf.as_slice()
        .iter()
        .zip(magnitudes.values())
        .zip(tf.multiplicities())
        .map(|((c, r), w)| {
            let d = c.norm() - r;
            0.5 * w * d * d
        })
        .sum()
}

pub(crate) fn require_magnitudes(measurements: &Measurements, method: &str) -> Result<()> {
    if measurements.power() != Power::Magnitude {
        return Err(Error::InvalidInput(format!(
            "{method} operates on magnitude (d = 1) measurements"
        )));
    }
    Ok(())
}

/// Bookkeeping shared by the solver loops.
pub(crate) struct Tracker {
    start: std::time::Instant,
    period: usize,
    record_iterates: bool,
    trace: Vec<TracePoint>,
    iterates: Vec<Vec<f64>>,
    max_residual: f64,
    initial: Option<f64>,
    check_growth: bool,
}

impl Tracker {
    pub(crate) fn new(config: &SolverConfig, check_growth: bool) -> Self {
        Self {
            start: std::time::Instant::now(),
            period: config.trace_period,
            record_iterates: config.record_iterates,
            trace: Vec::new(),
            iterates: Vec::new(),
            max_residual: 0.0,
            initial: None,
            check_growth,
        }
    }

    pub(crate) fn residual(&mut self, r: f64) {
        self.max_residual = self.max_residual.max(r);
    }

    /// Records `J(x_t)`; fails if the run has diverged.
    pub(crate) fn objective(
        &mut self,
        iteration: usize,
        value: f64,
        signal: &[f64],
        force: bool,
    ) -> Result<()> {
        let initial = *self.initial.get_or_insert(value);
        let blown_up = self.check_growth && initial > 0.0 && value > DIVERGENCE_FACTOR * initial;
        if !value.is_finite() || blown_up {
            let reason = if blown_up {
                format!("objective {value:e} exceeds {DIVERGENCE_FACTOR:e} x initial {initial:e}")
            } else {
                format!("objective became {value}")
            };
            return Err(self.diverged(iteration, reason, signal));
        }
        if force || iteration % self.period == 0 {
            self.trace.push(TracePoint {
                iteration,
                objective: value,
            });
        }
        Ok(())
    }

    /// Checks a new iterate `x_t` for finiteness and stores it if requested.
    pub(crate) fn iterate(&mut self, iteration: usize, next: &[f64], last: &[f64]) -> Result<()> {
        if next.iter().any(|v| !v.is_finite()) {
            return Err(self.diverged(iteration, "iterate is not finite".into(), last));
        }
        if self.record_iterates {
            self.iterates.push(next.to_vec());
        }
        Ok(())
    }

    pub(crate) fn diverged(&self, iteration: usize, reason: String, last: &[f64]) -> Error {
        Error::Diverged(Box::new(DivergedRun {
            iteration,
            reason,
            trace: self.trace.clone(),
            last_signal: last.to_vec(),
            wall_time: self.start.elapsed(),
        }))
    }

    pub(crate) fn finish(self, signal: Vec<f64>, iterations: usize, floored: usize) -> RunReport {
        RunReport {
            signal,
            loss_trace: self.trace,
            iterations,
            wall_time: self.start.elapsed(),
            floored_entries: floored,
            max_imag_residual: self.max_residual,
            iterates: self.iterates,
        }
    }
}
