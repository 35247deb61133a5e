//! Bregman divergences, the left/right phase-retrieval objectives and their
//! gradients.
//!
//! For a generating function `psi`,
//! `D(y | z) = sum psi(y) - psi(z) - psi'(z) (y - z)`. The right problem
//! minimizes `D(r | |Ax|^d)`, the left problem `D(|Ax|^d | r)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{StftPlan, TfMatrix};

/// Default magnitude floor applied before powering `|X|`.
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "beta", rename_all = "snake_case")]
pub enum DivergenceSpec {
    Quadratic,
    KullbackLeibler,
    ItakuraSaito,
    /// Generic beta-divergence; `beta` must be finite and differ from 0 and 1
    /// (use [`KullbackLeibler`](Self::KullbackLeibler) and
    /// [`ItakuraSaito`](Self::ItakuraSaito) for those).
    Beta(f64),
}

impl DivergenceSpec {
    pub fn beta(beta: f64) -> Result<Self> {
        let spec = Self::Beta(beta);
        spec.validate()?;
        Ok(spec)
    }

    /// Resolves a beta value, mapping 2, 1 and 0 to the named forms.
    pub fn from_beta(beta: f64) -> Result<Self> {
        match beta {
            b if b == 2.0 => Ok(Self::Quadratic),
            b if b == 1.0 => Ok(Self::KullbackLeibler),
            b if b == 0.0 => Ok(Self::ItakuraSaito),
            b => Self::beta(b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Beta(beta) = *self {
            if !beta.is_finite() {
                return Err(Error::InvalidConfig(format!("beta must be finite, got {beta}")));
            }
            if beta == 1.0 {
                return Err(Error::InvalidConfig(
                    "beta = 1 is the Kullback-Leibler limit; use DivergenceSpec::KullbackLeibler"
                        .into(),
                ));
            }
            if beta == 0.0 {
                return Err(Error::InvalidConfig(
                    "beta = 0 is the Itakura-Saito limit; use DivergenceSpec::ItakuraSaito".into(),
                ));
            }
        }
        Ok(())
    }

    /// Position of the family on the beta scale.
    pub fn beta_value(&self) -> f64 {
        match *self {
            Self::Quadratic => 2.0,
            Self::KullbackLeibler => 1.0,
            Self::ItakuraSaito => 0.0,
            Self::Beta(b) => b,
        }
    }

    /// Whether `psi'` or `psi''` blows up at zero.
    fn singular_at_zero(&self) -> bool {
        !matches!(*self, Self::Quadratic) && self.beta_value() < 2.0
    }

    /// Whether `psi'` itself blows up at zero.
    fn slope_singular_at_zero(&self) -> bool {
        !matches!(*self, Self::Quadratic) && self.beta_value() <= 1.0
    }

    /// Whether `psi` itself blows up at zero.
    fn value_singular_at_zero(&self) -> bool {
        !matches!(*self, Self::Quadratic) && self.beta_value() <= 0.0
    }

    pub(crate) fn psi(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic => 0.5 * z * z,
            Self::KullbackLeibler => {
                if z == 0.0 {
                    0.0
                } else {
                    z * z.ln()
                }
            }
            Self::ItakuraSaito => -z.ln(),
            Self::Beta(b) => z.powf(b) / (b * (b - 1.0)) - z / (b - 1.0) + 1.0 / b,
        }
    }

    pub(crate) fn dpsi(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic => z,
            Self::KullbackLeibler => 1.0 + z.ln(),
            Self::ItakuraSaito => -z.recip(),
            Self::Beta(b) => (z.powf(b - 1.0) - 1.0) / (b - 1.0),
        }
    }

    pub(crate) fn ddpsi(&self, z: f64) -> f64 {
        match *self {
            Self::Quadratic => 1.0,
            Self::KullbackLeibler => z.recip(),
            Self::ItakuraSaito => (z * z).recip(),
            Self::Beta(b) => z.powf(b - 2.0),
        }
    }

    /// Scalar divergence `d(y | z)` in closed form.
    pub(crate) fn scalar(&self, y: f64, z: f64) -> f64 {
        match *self {
            Self::Quadratic => 0.5 * (y - z) * (y - z),
            Self::KullbackLeibler => {
                if y == 0.0 {
                    z
                } else {
                    y * (y / z).ln() - y + z
                }
            }
            Self::ItakuraSaito => {
                let q = y / z;
                q - q.ln() - 1.0
            }
            Self::Beta(b) => {
                (y.powf(b) + (b - 1.0) * z.powf(b) - b * y * z.powf(b - 1.0)) / (b * (b - 1.0))
            }
        }
    }

    /// Short label used in setup codes and reports.
    pub fn label(&self) -> String {
        match *self {
            Self::Quadratic => "QD".into(),
            Self::KullbackLeibler => "KL".into(),
            Self::ItakuraSaito => "IS".into(),
            Self::Beta(b) if b == 0.5 => "05".into(),
            Self::Beta(b) => format!("B{b}"),
        }
    }
}

impl fmt::Display for DivergenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Quadratic => f.write_str("quadratic"),
            Self::KullbackLeibler => f.write_str("kl"),
            Self::ItakuraSaito => f.write_str("is"),
            Self::Beta(b) => write!(f, "beta({b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Model in the first argument: `D(|Ax|^d | r)`.
    Left,
    /// Model in the second argument: `D(r | |Ax|^d)`.
    Right,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
        })
    }
}

/// Exponent applied to STFT magnitudes: 1 for magnitude, 2 for power
/// spectrograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Power {
    Magnitude,
    Power,
}

impl Power {
    pub fn exponent(self) -> f64 {
        match self {
            Self::Magnitude => 1.0,
            Self::Power => 2.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Self::Magnitude => 1,
            Self::Power => 2,
        }
    }

    /// `a^d` for a nonnegative magnitude `a`.
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Self::Magnitude => a,
            Self::Power => a * a,
        }
    }

    /// `v^(1/d)`.
    pub fn root(self, v: f64) -> f64 {
        match self {
            Self::Magnitude => v,
            Self::Power => v.sqrt(),
        }
    }
}

impl TryFrom<u8> for Power {
    type Error = Error;

    fn try_from(d: u8) -> Result<Self> {
        match d {
            1 => Ok(Self::Magnitude),
            2 => Ok(Self::Power),
            other => Err(Error::InvalidConfig(format!("power d must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Power> for u8 {
    fn from(d: Power) -> u8 {
        d.as_u8()
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Divergence, direction and power defining the objective `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub divergence: DivergenceSpec,
    pub direction: Direction,
    pub power: Power,
    pub epsilon: f64,
}

impl ProblemSpec {
    pub fn new(divergence: DivergenceSpec, direction: Direction, power: Power) -> Result<Self> {
        let spec = Self {
            divergence,
            direction,
            power,
            epsilon: DEFAULT_EPSILON,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.divergence.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Floor applied to measurements: the magnitude floor raised to `d`, so an
    /// exact measurement and the floored model agree entry by entry.
    pub fn measurement_floor(&self) -> f64 {
        self.power.apply(self.epsilon)
    }
}

/// Nonnegative spectrogram `R` in the half-spectrum layout of [`TfMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    values: Vec<f64>,
    fft_size: usize,
    num_frames: usize,
    power: Power,
}

impl Measurements {
    pub fn new(values: Vec<f64>, fft_size: usize, num_frames: usize, power: Power) -> Result<Self> {
        if values.len() != (fft_size / 2 + 1) * num_frames {
            return Err(Error::InvalidInput(format!(
                "expected {} measurements, got {}",
                (fft_size / 2 + 1) * num_frames,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "measurements must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            values,
            fft_size,
            num_frames,
            power,
        })
    }

    /// `|X|^d`.
    pub fn from_tf(tf: &TfMatrix, power: Power) -> Self {
        Self {
            values: tf.as_slice().iter().map(|c| power.apply(c.norm())).collect(),
            fft_size: tf.fft_size(),
            num_frames: tf.num_frames(),
            power,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn power(&self) -> Power {
        self.power
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.fft_size, self.num_frames)
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Entry `(m, n)` of the full `M x N` matrix.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        let bins = self.num_bins();
        let row = if m < bins { m } else { self.fft_size - m };
        self.values[n * bins + row]
    }

    pub(crate) fn multiplicities(&self) -> impl Iterator<Item = f64> + '_ {
        let bins = self.num_bins();
        let m_size = self.fft_size;
        (0..self.values.len()).map(move |k| {
            let m = k % bins;
            if m == 0 || (m_size % 2 == 0 && m == m_size / 2) {
                1.0
            } else {
                2.0
            }
        })
    }

    /// Frobenius norm of the full matrix.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.multiplicities())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Same spectrogram expressed at another power (`r^(d'/d)`).
    pub fn to_power(&self, power: Power) -> Self {
        let values = match (self.power, power) {
            (a, b) if a == b => self.values.clone(),
            (Power::Magnitude, Power::Power) => self.values.iter().map(|v| v * v).collect(),
            _ => self.values.iter().map(|v| v.sqrt()).collect(),
        };
        Self {
            values,
            power,
            ..*self
        }
    }

    /// `R^(1/d)`, the magnitude spectrogram.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| self.power.root(*v)).collect()
    }

    pub(crate) fn matches(&self, tf: &TfMatrix) -> bool {
        self.dims() == tf.dims()
    }
}

/// `(psi(z), psi'(z), psi''(z))`.
pub fn generator_eval(spec: DivergenceSpec, z: f64) -> Result<(f64, f64, f64)> {
    spec.validate()?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("generator argument must be >= 0, got {z}")));
    }
    if z == 0.0 && spec.singular_at_zero() {
        return Err(Error::Domain(format!(
            "{spec} derivatives diverge at 0; apply the epsilon floor first"
        )));
    }
    Ok((spec.psi(z), spec.dpsi(z), spec.ddpsi(z)))
}

/// `D(y | z)` summed over entries.
pub fn bregman_div(spec: DivergenceSpec, y: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if y.len() != z.len() {
        return Err(Error::InvalidInput(format!(
            "argument lengths differ: {} vs {}",
            y.len(),
            z.len()
        )));
    }
    let mut total = 0.0;
    for (&a, &b) in y.iter().zip(z) {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("entries must be finite and >= 0, got ({a}, {b})")));
        }
        if b == 0.0 && spec.slope_singular_at_zero() {
            return Err(Error::Domain(format!("{spec} requires a positive second argument")));
        }
        if a == 0.0 && spec.value_singular_at_zero() {
            return Err(Error::Domain(format!("{spec} requires a positive first argument")));
        }
        total += spec.scalar(a, b);
    }
    Ok(total)
}

/// Objective `J` bound to a measurement matrix, with the floored
/// measurements precomputed.
#[derive(Debug, Clone)]
pub struct Objective {
    problem: ProblemSpec,
    fft_size: usize,
    num_frames: usize,
    r: Vec<f64>,
    dpsi_r: Vec<f64>,
    weights: Vec<f64>,
    floored: usize,
}

/// Value and gradient of the objective at a time-domain point.
#[derive(Debug, Clone)]
pub struct GradientEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub transform: TfMatrix,
    pub imag_residual: f64,
}

impl Objective {
    pub fn new(problem: ProblemSpec, measurements: &Measurements) -> Result<Self> {
        problem.validate()?;
        if measurements.power() != problem.power {
            return Err(Error::InvalidInput(format!(
                "measurements were taken at d = {} but the problem uses d = {}",
                measurements.power(),
                problem.power
            )));
        }
        let floor = if matches!(problem.divergence, DivergenceSpec::Quadratic) {
            0.0
        } else {
            problem.measurement_floor()
        };
        let mut floored = 0;
        let r: Vec<f64> = measurements
            .values()
            .iter()
            .map(|&v| {
                if v < floor {
                    floored += 1;
                    floor
                } else {
                    v
                }
            })
            .collect();
        let dpsi_r = match problem.direction {
            Direction::Left => r.iter().map(|&v| problem.divergence.dpsi(v)).collect(),
            Direction::Right => Vec::new(),
        };
        let (fft_size, num_frames) = measurements.dims();
        Ok(Self {
            problem,
            fft_size,
            num_frames,
            r,
            dpsi_r,
            weights: measurements.multiplicities().collect(),
            floored,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    /// Number of measurement entries raised to the floor.
    pub fn floored_count(&self) -> usize {
        self.floored
    }

    fn check(&self, tf: &TfMatrix) -> Result<()> {
        if tf.dims() != (self.fft_size, self.num_frames) {
            return Err(Error::InvalidInput(format!(
                "matrix is {:?} but measurements are {:?}",
                tf.dims(),
                (self.fft_size, self.num_frames)
            )));
        }
        Ok(())
    }

    fn model(&self, magnitude: f64) -> f64 {
        self.problem.power.apply(magnitude.max(self.problem.epsilon))
    }

    pub fn value(&self, tf: &TfMatrix) -> Result<f64> {
        self.check(tf)?;
        let div = self.problem.divergence;
        let total = tf
            .as_slice()
            .iter()
            .zip(&self.r)
            .zip(&self.weights)
            .map(|((c, &r), w)| {
                let y = self.model(c.norm());
                w * match self.problem.direction {
                    Direction::Right => div.scalar(r, y),
                    Direction::Left => div.scalar(y, r),
                }
            })
            .sum();
        Ok(total)
    }

    /// Time-frequency part of the gradient, `d X |X|^(d-2) Z`.
    pub fn tf_gradient(&self, tf: &TfMatrix) -> Result<TfMatrix> {
        self.check(tf)?;
        let div = self.problem.divergence;
        let eps = self.problem.epsilon;
        let mut out = tf.clone();
        for (k, c) in out.as_mut_slice().iter_mut().enumerate() {
            let a = c.norm().max(eps);
            let y = self.problem.power.apply(a);
            let z = match self.problem.direction {
                Direction::Right => div.ddpsi(y) * (y - self.r[k]),
                Direction::Left => div.dpsi(y) - self.dpsi_r[k],
            };
            let factor = match self.problem.power {
                Power::Magnitude => z / a,
                Power::Power => 2.0 * z,
            };
            *c *= factor;
        }
        Ok(out)
    }

    /// Value and real gradient at the padded signal `x`.
    pub fn evaluate(&self, x: &[f64], plan: &StftPlan) -> Result<GradientEval> {
        let transform = plan.stft(x)?;
        let value = self.value(&transform)?;
        let (gradient, imag_residual) = plan.istft_with_residual(&self.tf_gradient(&transform)?)?;
        Ok(GradientEval {
            value,
            gradient,
            transform,
            imag_residual,
        })
    }
}

pub fn objective_value(problem: &ProblemSpec, r: &Measurements, tf: &TfMatrix) -> Result<f64> {
    if !r.matches(tf) {
        return Err(Error::InvalidInput("measurement and matrix shapes differ".into()));
    }
    Objective::new(*problem, r)?.value(tf)
}

/// Real gradient of `J` at `x`: `Re(A^H [d X |X|^(d-2) Z])`.
pub fn objective_grad(
    problem: &ProblemSpec,
    r: &Measurements,
    x: &[f64],
    plan: &StftPlan,
) -> Result<Vec<f64>> {
    Ok(Objective::new(*problem, r)?.evaluate(x, plan)?.gradient)
}
