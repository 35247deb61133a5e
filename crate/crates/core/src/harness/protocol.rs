use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::divergence::{Measurements, Power};
use crate::error::{Error, Result};
use crate::stft::{l2_norm, StftPlan};

/// Guard in the Wiener mask denominator.
pub const WIENER_EPSILON: f64 = 1e-12;

/// `R = |stft(x)|^d` for a signal of padded or content length.
pub fn measure(x: &[f64], plan: &StftPlan, power: Power) -> Result<Measurements> {
    let padded = plan.pad(x)?;
    Ok(Measurements::from_tf(&plan.stft(&padded)?, power))
}

/// Noisy observation followed by an oracle Wiener filter.
#[derive(Debug, Clone)]
pub struct Degraded {
    /// `|G stft(x + n)|`, magnitude measurements.
    pub measurements: Measurements,
    /// The padded noise signal.
    pub noise: Vec<f64>,
    pub realized_snr_db: f64,
}

/// Adds white Gaussian noise at exactly `input_snr_db` over the content
/// samples and applies the mask `|S|^2 / (|S|^2 + |N|^2 + eps)`.
///
/// `input_snr_db = +inf` adds no noise and returns the clean magnitudes.
pub fn degrade(x: &[f64], input_snr_db: f64, plan: &StftPlan, seed: u64) -> Result<Degraded> {
    let clean = plan.pad(x)?;
    let signal_norm = l2_norm(&clean);
    if signal_norm == 0.0 {
        return Err(Error::InvalidInput("cannot degrade an all-zero signal".into()));
    }
    if input_snr_db.is_nan() || input_snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("invalid input SNR {input_snr_db}")));
    }
    if input_snr_db == f64::INFINITY {
        return Ok(Degraded {
            measurements: Measurements::from_tf(&plan.stft(&clean)?, Power::Magnitude),
            noise: vec![0.0; clean.len()],
            realized_snr_db: f64::INFINITY,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = plan.content_offset();
    let content = start..start + plan.content_len();
    let mut noise = vec![0.0; clean.len()];
    for v in &mut noise[content] {
        *v = rng.sample(StandardNormal);
    }
    let target = signal_norm * 10f64.powf(-input_snr_db / 20.0);
    let scale = target / l2_norm(&noise);
    noise.iter_mut().for_each(|v| *v *= scale);
    let realized_snr_db = 20.0 * (signal_norm / l2_norm(&noise)).log10();

    let mixture: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let s = plan.stft(&clean)?;
    let n = plan.stft(&noise)?;
    let m = plan.stft(&mixture)?;
    let values = s
        .as_slice()
        .iter()
        .zip(n.as_slice())
        .zip(m.as_slice())
        .map(|((sv, nv), mv)| {
            let ps = sv.norm_sqr();
            let gain = ps / (ps + nv.norm_sqr() + WIENER_EPSILON);
            gain * mv.norm()
        })
        .collect();
    Ok(Degraded {
        measurements: Measurements::new(values, plan.fft_size(), plan.num_frames(), Power::Magnitude)?,
        noise,
        realized_snr_db,
    })
}

/// Independent 64-bit seed for one random stream of one experiment cell.
pub fn derive_seed(base: u64, input: &str, condition: &str, stream: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in [input, condition, stream] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Hex SHA-256 of the signal's bit patterns.
pub fn signal_hash(x: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in x {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
