//! Spectral convergence and delay/scale-invariant SNR.

use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::divergence::Measurements;
use crate::error::{Error, Result};
use crate::stft::{l2_norm, StftPlan};

/// Upper bound reported for the SNR, reached on exact recovery.
pub const SNR_CAP_DB: f64 = 140.0;

/// `||R^(1/d) - |stft(x)| || / ||R||`, over the full frequency range.
///
/// The denominator is the raw measurement norm, also for power
/// measurements.
pub fn spectral_convergence(measurements: &Measurements, x: &[f64], plan: &StftPlan) -> Result<f64> {
    if measurements.dims() != (plan.fft_size(), plan.num_frames()) {
        return Err(Error::InvalidInput("measurements do not match the plan".into()));
    }
    let denom = measurements.norm();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("spectral convergence of all-zero measurements".into()));
    }
    let tf = plan.stft(x)?;
    let power = measurements.power();
    let num: f64 = tf
        .as_slice()
        .iter()
        .zip(measurements.values())
        .zip(tf.multiplicities())
        .map(|((c, &r), w)| {
            let d = power.root(r) - c.norm();
            w * d * d
        })
        .sum();
    Ok(num.sqrt() / denom)
}

/// Delay and scale that best map an estimate onto the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `x` is delayed by this many samples: `shift(x, k)[n] = x[n - k]`.
    pub shift: i64,
    pub scale: f64,
    /// Normalized correlation `<x*, shift(x, k)> / (||x*|| ||shift(x, k)||)`.
    pub correlation: f64,
}

/// `shift(x, k)[n] = x[n - k]`, zero-filled, same length.
pub fn shift_signal(x: &[f64], k: i64) -> Vec<f64> {
    let len = x.len() as i64;
    (0..len)
        .map(|n| {
            let src = n - k;
            if (0..len).contains(&src) {
                x[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Cross-correlation `c(k) = sum_n a[n] b[n - k]` for `|k| < len`, indexed
/// by `k + len - 1`.
fn cross_correlation(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let len = a.len();
    let size = (2 * len - 1).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let spectrum = |x: &[f64]| -> Result<Vec<crate::Complex64>> {
        let mut buf = forward.make_input_vec();
        buf[..len].copy_from_slice(x);
        let mut out = forward.make_output_vec();
        forward
            .process(&mut buf, &mut out)
            .map_err(|e| Error::NumericIntegrity(e.to_string()))?;
        Ok(out)
    };
    let fa = spectrum(a)?;
    let fb = spectrum(b)?;
    let mut product: Vec<_> = fa.iter().zip(&fb).map(|(p, q)| p * q.conj()).collect();
    // The real inverse ignores these imaginary parts; they are zero up to rounding.
    product[0].im = 0.0;
    if let Some(last) = product.last_mut() {
        last.im = 0.0;
    }
    let mut corr = inverse.make_output_vec();
    inverse
        .process(&mut product, &mut corr)
        .map_err(|e| Error::NumericIntegrity(e.to_string()))?;
    let scale = (size as f64).recip();
    let lag = |k: i64| corr[k.rem_euclid(size as i64) as usize] * scale;
    Ok((-(len as i64 - 1)..len as i64).map(lag).collect())
}

/// SNR of `x` against `x_star` after the best integer delay and real scale,
/// searched over all delays. Returns `-inf` for an all-zero estimate.
pub fn align_and_snr(x_star: &[f64], x: &[f64]) -> Result<(f64, Alignment)> {
    align_and_snr_within(x_star, x, x_star.len().saturating_sub(1))
}

/// [`align_and_snr`] with delays restricted to `|k| <= max_lag`.
pub fn align_and_snr_within(x_star: &[f64], x: &[f64], max_lag: usize) -> Result<(f64, Alignment)> {
    if x_star.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "signal lengths differ: {} vs {}",
            x_star.len(),
            x.len()
        )));
    }
    if x_star.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signals must be finite".into()));
    }
    let ref_norm = l2_norm(x_star);
    if ref_norm == 0.0 {
        return Err(Error::UndefinedMetric("SNR against an all-zero reference".into()));
    }
    let zero = Alignment {
        shift: 0,
        scale: 0.0,
        correlation: 0.0,
    };
    if l2_norm(x) == 0.0 {
        return Ok((f64::NEG_INFINITY, zero));
    }
    let len = x.len() as i64;
    // prefix[i] = sum of x[..i]^2, for the norms of the truncated shifts.
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v * v);
    }
    let shifted_energy = |k: i64| -> f64 {
        let (lo, hi) = if k >= 0 { (0, len - k) } else { (-k, len) };
        (prefix[hi as usize] - prefix[lo as usize]).max(0.0)
    };
    let corr = cross_correlation(x_star, x)?;
    let max_lag = (max_lag as i64).min(len - 1);
    let mut best = (0_i64, f64::NEG_INFINITY);
    for k in -max_lag..=max_lag {
        let energy = shifted_energy(k);
        if energy <= 0.0 {
            continue;
        }
        let score = corr[(k + len - 1) as usize].abs() / energy.sqrt();
        // Ties go to the smaller delay.
        let better = score > best.1 * (1.0 + 1e-12)
            || (score >= best.1 * (1.0 - 1e-12) && k.abs() < best.0.abs());
        if better {
            best = (k, score.max(best.1));
        }
    }
    let shift = best.0;
    let s = shift_signal(x, shift);
    let inner: f64 = x_star.iter().zip(&s).map(|(a, b)| a * b).sum();
    let s_norm = l2_norm(&s);
    if s_norm == 0.0 {
        return Ok((f64::NEG_INFINITY, zero));
    }
    let scale = inner / (s_norm * s_norm);
    let residual: Vec<f64> = x_star.iter().zip(&s).map(|(a, b)| a - scale * b).collect();
    let res_norm = l2_norm(&residual);
    let snr = if res_norm == 0.0 {
        SNR_CAP_DB
    } else {
        (20.0 * (ref_norm / res_norm).log10()).min(SNR_CAP_DB)
    };
    Ok((
        snr,
        Alignment {
            shift,
            scale,
            correlation: inner / (ref_norm * s_norm),
        },
    ))
}

/// `SNR(x*, x_final) - SNR(x*, x_init)`, each aligned on its own.
pub fn snr_improvement(x_star: &[f64], x_init: &[f64], x_final: &[f64]) -> Result<f64> {
    let (initial, _) = align_and_snr(x_star, x_init)?;
    let (last, _) = align_and_snr(x_star, x_final)?;
    if initial == last {
        return Ok(0.0);
    }
    Ok(last - initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::Power;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn sc_examples() {
        let plan = StftPlan::sine_bell(32, 16, 300).unwrap();
        let x = plan.pad(&random(1, 300)).unwrap();
        let tf = plan.stft(&x).unwrap();
        for power in [Power::Magnitude, Power::Power] {
            let r = Measurements::from_tf(&tf, power);
            assert!(spectral_convergence(&r, &x, &plan).unwrap() < 1e-12);
        }
        let r = Measurements::from_tf(&tf, Power::Magnitude);
        let zero = vec![0.0; x.len()];
        assert!((spectral_convergence(&r, &zero, &plan).unwrap() - 1.0).abs() < 1e-12);
        let silent = Measurements::from_tf(&plan.stft(&zero).unwrap(), Power::Magnitude);
        assert!(matches!(
            spectral_convergence(&silent, &x, &plan),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn sc_is_scale_covariant_for_magnitudes() {
        let plan = StftPlan::sine_bell(32, 16, 300).unwrap();
        let x = plan.pad(&random(2, 300)).unwrap();
        let y = plan.pad(&random(3, 300)).unwrap();
        let r = Measurements::from_tf(&plan.stft(&x).unwrap(), Power::Magnitude);
        let a = 3.7;
        let scaled_r = Measurements::new(
            r.values().iter().map(|v| a * v).collect(),
            plan.fft_size(),
            plan.num_frames(),
            Power::Magnitude,
        )
        .unwrap();
        let scaled_y: Vec<f64> = y.iter().map(|v| a * v).collect();
        let sc = spectral_convergence(&r, &y, &plan).unwrap();
        let sc_scaled = spectral_convergence(&scaled_r, &scaled_y, &plan).unwrap();
        assert!((sc - sc_scaled).abs() < 1e-12);
    }

    #[test]
    fn exact_and_inverted_copies_hit_the_cap() {
        let x = random(4, 500);
        let (snr, al) = align_and_snr(&x, &x).unwrap();
        assert_eq!(snr, SNR_CAP_DB);
        assert_eq!(al.shift, 0);
        assert!((al.scale - 1.0).abs() < 1e-12);

        let mut padded = vec![0.0; 20];
        padded.extend(random(5, 400));
        padded.extend(vec![0.0; 20]);
        let est: Vec<f64> = shift_signal(&padded, 7).iter().map(|v| -0.5 * v).collect();
        let (snr, al) = align_and_snr(&padded, &est).unwrap();
        assert_eq!(snr, SNR_CAP_DB);
        assert_eq!(al.shift, -7);
        assert!((al.scale + 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_estimate_and_reference() {
        let x = random(6, 64);
        let (snr, _) = align_and_snr(&x, &[0.0; 64]).unwrap();
        assert_eq!(snr, f64::NEG_INFINITY);
        assert!(matches!(align_and_snr(&[0.0; 64], &x), Err(Error::UndefinedMetric(_))));
        assert!(matches!(align_and_snr(&x, &x[..10]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let a = random(7, 37);
        let b = random(8, 37);
        let corr = cross_correlation(&a, &b).unwrap();
        for k in -36..=36_i64 {
            let s = shift_signal(&b, k);
            let direct: f64 = a.iter().zip(&s).map(|(p, q)| p * q).sum();
            assert!((corr[(k + 36) as usize] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_and_scale_invariance() {
        let mut x_star = vec![0.0; 30];
        x_star.extend(random(9, 300));
        x_star.extend(vec![0.0; 30]);
        let noise = random(10, 360);
        let x: Vec<f64> = x_star.iter().zip(&noise).map(|(a, b)| a + 0.3 * b).collect();
        let (base, _) = align_and_snr(&x_star, &x).unwrap();
        let mut zero_padded = x.clone();
        zero_padded[..20].fill(0.0);
        zero_padded[340..].fill(0.0);
        let (trimmed, _) = align_and_snr(&x_star, &zero_padded).unwrap();
        for (k, c) in [(5, 2.0), (-11, -0.25), (19, 1e3)] {
            let moved: Vec<f64> = shift_signal(&zero_padded, k).iter().map(|v| c * v).collect();
            let (snr, al) = align_and_snr(&x_star, &moved).unwrap();
            assert_eq!(al.shift, -k);
            assert!((snr - trimmed).abs() < 1e-9, "k={k} c={c}");
        }
        assert!(base.is_finite());
    }

    #[test]
    fn improvement_examples() {
        let x_star = random(11, 200);
        let init = random(12, 200);
        assert_eq!(snr_improvement(&x_star, &init, &init).unwrap(), 0.0);
        let (init_snr, _) = align_and_snr(&x_star, &init).unwrap();
        let gain = snr_improvement(&x_star, &init, &x_star).unwrap();
        assert!((gain - (SNR_CAP_DB - init_snr)).abs() < 1e-12);
        assert!(gain > 0.0);
    }
}
