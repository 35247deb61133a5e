//! Setup codes such as `G·KL·L1` and their default hyperparameters.

use serde::{Deserialize, Serialize};

use crate::divergence::{Direction, DivergenceSpec, Power, ProblemSpec};
use crate::error::{Error, Result};
use crate::solvers::{Method, SolverConfig};

const BUILTIN: &str = include_str!("setups.toml");

/// STFT normalization that step sizes and penalties refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `1/sqrt(M)` in both directions, as computed by this crate.
    #[default]
    Unitary,
    /// No forward normalization: magnitudes are `sqrt(M)` times larger.
    Unnormalized,
}

/// One row of the grid: an algorithm code with its defaults. `method` is
/// `None` for `INIT`, which only evaluates the initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub code: String,
    pub method: Option<Method>,
    pub step: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: f64,
    pub scaling: Scaling,
}

impl Setup {
    fn problem(&self) -> Option<&ProblemSpec> {
        match &self.method {
            Some(Method::Gradient(p)) | Some(Method::Admm(p)) => Some(p),
            _ => None,
        }
    }

    /// Loss label (`QD`, `KL`, `IS`, `05`), or `-` for the baselines.
    pub fn family(&self) -> String {
        self.problem().map_or_else(|| "-".into(), |p| p.divergence.label())
    }

    /// `left`/`right`, or `-` where the direction does not matter.
    pub fn direction(&self) -> String {
        match self.problem() {
            Some(p) if p.divergence != DivergenceSpec::Quadratic => p.direction.to_string(),
            _ => "-".into(),
        }
    }

    pub fn power(&self) -> Power {
        self.problem().map_or(Power::Magnitude, |p| p.power)
    }

    /// `s` with unitary magnitudes `|X|` corresponding to `s |X|` in the
    /// setup's scaling.
    fn scale(&self, fft_size: usize) -> f64 {
        match self.scaling {
            Scaling::Unitary => 1.0,
            Scaling::Unnormalized => (fft_size as f64).sqrt(),
        }
    }

    /// Step size for the unitary transform.
    ///
    /// The objective is homogeneous of degree `d beta` in the magnitudes and
    /// the synthesis of the other convention is `1/s` times the adjoint, so an
    /// update with step `mu` there is an update with `mu s^(d beta - 2)` here.
    pub fn effective_step(&self, fft_size: usize) -> Option<f64> {
        let p = self.problem()?;
        let exponent = p.power.exponent() * p.divergence.beta_value() - 2.0;
        Some(self.step? * self.scale(fft_size).powf(exponent))
    }

    /// ADMM penalty for the unitary transform: the prox balances a term of
    /// degree `beta` against a quadratic, so `rho` becomes `rho s^(2 - beta)`.
    pub fn effective_rho(&self, fft_size: usize) -> Option<f64> {
        let p = self.problem()?;
        Some(self.rho? * self.scale(fft_size).powf(2.0 - p.divergence.beta_value()))
    }

    /// Solver configuration with this setup's defaults, converted for an
    /// STFT of size `fft_size`.
    pub fn solver_config(&self, iterations: usize, seed: u64, fft_size: usize) -> SolverConfig {
        SolverConfig {
            step: self.effective_step(fft_size),
            rho: self.effective_rho(fft_size),
            gamma: self.gamma,
            iterations,
            seed,
            ..SolverConfig::default()
        }
    }

    /// The same setup at another power `d`. Only gradient setups and `d = 1`
    /// everywhere else are accepted.
    pub fn with_power(&self, power: Power) -> Result<Self> {
        if power == self.power() {
            return Ok(self.clone());
        }
        match self.method {
            Some(Method::Gradient(p)) => {
                let mut out = self.clone();
                out.method = Some(Method::Gradient(ProblemSpec { power, ..p }));
                Ok(out)
            }
            _ => Err(Error::InvalidConfig(format!("{} only supports d = 1", self.code))),
        }
    }
}

/// Parses a code into its canonical `·`-separated form and method.
pub fn parse_code(code: &str) -> Result<(String, Option<Method>)> {
    let normalized = code.trim().replace('.', "·").to_ascii_uppercase();
    let bad = || Error::InvalidConfig(format!("unknown setup code {code:?}"));
    let method = match normalized.as_str() {
        "GLA" => Some(Method::Gla),
        "FGLA" => Some(Method::Fgla),
        "GLADMM" => Some(Method::Gladmm),
        "INIT" => None,
        _ => {
            let parts: Vec<&str> = normalized.split('·').collect();
            let [algo, loss, tail] = parts.as_slice() else {
                return Err(bad());
            };
            let divergence = match *loss {
                "QD" => DivergenceSpec::Quadratic,
                "KL" => DivergenceSpec::KullbackLeibler,
                "IS" => DivergenceSpec::ItakuraSaito,
                "05" => DivergenceSpec::Beta(0.5),
                _ => return Err(bad()),
            };
            let (direction, d) = match (divergence, tail.as_bytes()) {
                (DivergenceSpec::Quadratic, [d]) => (None, *d),
                (DivergenceSpec::Quadratic, _) => return Err(bad()),
                (_, [b'L', d]) => (Some(Direction::Left), *d),
                (_, [b'R', d]) => (Some(Direction::Right), *d),
                _ => return Err(bad()),
            };
            let power = match d {
                b'1' => Power::Magnitude,
                b'2' => Power::Power,
                _ => return Err(bad()),
            };
            match *algo {
                "G" => Some(Method::Gradient(ProblemSpec::new(
                    divergence,
                    direction.unwrap_or(Direction::Right),
                    power,
                )?)),
                "A" => Some(Method::Admm(ProblemSpec::new(
                    divergence,
                    direction.unwrap_or(Direction::Left),
                    power,
                )?)),
                _ => return Err(bad()),
            }
        }
    };
    Ok((normalized, method))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    gamma: f64,
    #[serde(default)]
    scaling: Scaling,
    setup: Vec<SetupEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetupEntry {
    code: String,
    step: Option<f64>,
    rho: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupGrid {
    setups: Vec<Setup>,
}

impl SetupGrid {
    /// The grid shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("built-in setup grid is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: GridFile =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("setup grid: {e}")))?;
        let setups = file
            .setup
            .into_iter()
            .map(|entry| {
                let (code, method) = parse_code(&entry.code)?;
                let setup = Setup {
                    code,
                    method,
                    step: entry.step,
                    rho: entry.rho,
                    gamma: entry.gamma.unwrap_or(file.gamma),
                    scaling: file.scaling,
                };
                match (&setup.method, setup.step, setup.rho) {
                    (Some(Method::Gradient(_)), None, _) => Err(Error::InvalidConfig(format!(
                        "{} needs a step size",
                        setup.code
                    ))),
                    (Some(Method::Admm(_)), _, None) => {
                        Err(Error::InvalidConfig(format!("{} needs rho", setup.code)))
                    }
                    _ => Ok(setup),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { setups })
    }

    pub fn setups(&self) -> &[Setup] {
        &self.setups
    }

    pub fn codes(&self) -> Vec<&str> {
        self.setups.iter().map(|s| s.code.as_str()).collect()
    }

    pub fn get(&self, code: &str) -> Result<Setup> {
        let (canonical, _) = parse_code(code)?;
        self.setups
            .iter()
            .find(|s| s.code == canonical)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("setup {code:?} is not in the grid")))
    }
}
