use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::TimeSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// A handful of partials with random frequencies, amplitudes and phases.
    Multisine,
    /// Linear frequency sweep with a weaker second harmonic.
    Chirp,
    /// Filtered Gaussian noise gated into bursts separated by short gaps.
    NoiseBurst,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [Self::Multisine, Self::Chirp, Self::NoiseBurst];

    pub fn name(self) -> &'static str {
        match self {
            Self::Multisine => "multisine",
            Self::Chirp => "chirp",
            Self::NoiseBurst => "noise-burst",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown synthetic signal kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub duration_s: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, duration_s: f64, seed: u64) -> Self {
        Self {
            kind,
            duration_s,
            seed,
        }
    }

    pub fn id(&self) -> String {
        format!("{}-{}", self.kind, self.seed)
    }
}

/// Generates a unit-peak signal. `window_len` sets the minimum length: at
/// least two analysis windows.
pub fn synth_signal(spec: &SynthSpec, sample_rate: u32, window_len: usize) -> Result<TimeSignal> {
    if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid duration {}", spec.duration_s)));
    }
    let fs = f64::from(sample_rate);
    let len = (spec.duration_s * fs).round() as usize;
    if len < 2 * window_len {
        return Err(Error::InvalidConfig(format!(
            "{} s gives {len} samples, fewer than two windows of {window_len}",
            spec.duration_s
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nyquist = fs / 2.0;
    let mut x = match spec.kind {
        SynthKind::Multisine => {
            let partials: Vec<(f64, f64, f64)> = (0..rng.gen_range(4..=8))
                .map(|_| {
                    (
                        rng.gen_range(80.0..0.4 * nyquist),
                        rng.gen_range(0.2..1.0),
                        rng.gen_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            (0..len)
                .map(|n| {
                    let t = n as f64 / fs;
                    partials
                        .iter()
                        .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                        .sum()
                })
                .collect::<Vec<f64>>()
        }
        SynthKind::Chirp => {
            let f0 = rng.gen_range(80.0..300.0);
            let f1 = rng.gen_range(0.15 * nyquist..0.35 * nyquist);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let duration = len as f64 / fs;
            let rate = (f1 - f0) / duration;
            (0..len)
                .map(|n| {
                    let t = n as f64 / fs;
                    let arg = 2.0 * PI * (f0 * t + 0.5 * rate * t * t) + phase;
                    arg.sin() + 0.3 * (2.0 * arg).sin()
                })
                .collect()
        }
        SynthKind::NoiseBurst => {
            let mut gate = vec![0.0; len];
            let mut pos = 0;
            while pos < len {
                let burst = (rng.gen_range(0.06..0.2) * fs) as usize;
                let gap = (rng.gen_range(0.005..0.02) * fs) as usize;
                let level = rng.gen_range(0.3..1.0);
                let end = (pos + burst).min(len);
                gate[pos..end].fill(level);
                pos = end + gap;
            }
            let mut state = 0.0;
            gate.iter()
                .map(|g| {
                    let white: f64 = rng.sample(StandardNormal);
                    state = 0.7 * state + white;
                    g * state
                })
                .collect()
        }
    };
    // Short raised-cosine fades keep the edges free of clicks.
    let fade = ((0.005 * fs) as usize).min(len / 4);
    for n in 0..fade {
        let g = 0.5 - 0.5 * (PI * n as f64 / fade as f64).cos();
        x[n] *= g;
        x[len - 1 - n] *= g;
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    TimeSignal::new(x, sample_rate)
}
