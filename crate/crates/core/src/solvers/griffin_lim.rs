//! Griffin-Lim baselines. All three start from the consistent matrix
//! `A x_0` of the initial signal.

use crate::divergence::Measurements;
use crate::error::Result;
use crate::stft::{StftPlan, TfMatrix};

use super::{quadratic_loss, require_magnitudes, InitialEstimate, RunReport, SolverConfig, Tracker};

/// `P_M`: keep the phase, impose the measured magnitude (`x/|x| = 1` at zero).
fn project_magnitude(tf: &mut TfMatrix, r: &[f64], epsilon: f64) {
    for (c, &rv) in tf.as_mut_slice().iter_mut().zip(r) {
        let a = c.norm();
        *c = if a > 0.0 {
            *c * (rv / a.max(epsilon))
        } else {
            crate::Complex64::new(rv, 0.0)
        };
    }
}

struct Sweep<'a> {
    plan: &'a StftPlan,
    r: &'a [f64],
    epsilon: f64,
}

impl Sweep<'_> {
    /// `istft(P_M(tf))`, returning the signal and the imaginary residual.
    fn synthesize(&self, mut tf: TfMatrix) -> Result<(Vec<f64>, f64)> {
        project_magnitude(&mut tf, self.r, self.epsilon);
        self.plan.istft_with_residual(&tf)
    }
}

fn prepare<'a>(
    measurements: &'a Measurements,
    plan: &'a StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
    name: &str,
) -> Result<Sweep<'a>> {
    config.validate_common()?;
    require_magnitudes(measurements, name)?;
    init.check(plan)?;
    if measurements.dims() != (plan.fft_size(), plan.num_frames()) {
        return Err(crate::Error::InvalidInput("measurements do not match the plan".into()));
    }
    Ok(Sweep {
        plan,
        r: measurements.values(),
        epsilon: config.epsilon,
    })
}

/// `x_{t+1} = istft(R X / max(|X|, eps))` with `X = stft(x_t)`.
pub fn run_gla(
    measurements: &Measurements,
    plan: &StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
) -> Result<RunReport> {
    let sweep = prepare(measurements, plan, config, init, "GLA")?;
    let mut tracker = Tracker::new(config, false);
    let mut x = init.signal.clone();
    let mut ax = plan.stft(&x)?;
    for t in 0..config.iterations {
        tracker.objective(t, quadratic_loss(measurements, &ax), &x, t == 0)?;
        let (next, residual) = sweep.synthesize(ax)?;
        tracker.residual(residual);
        tracker.iterate(t + 1, &next, &x)?;
        x = next;
        ax = plan.stft(&x)?;
    }
    tracker.objective(config.iterations, quadratic_loss(measurements, &ax), &x, true)?;
    Ok(tracker.finish(x, config.iterations, 0))
}

/// Fast Griffin-Lim: `s_{t+1} = istft(P_M(stft(z_t)))`,
/// `z_{t+1} = s_{t+1} + gamma (s_{t+1} - s_t)`, with `z_0 = s_0 = x_0`.
///
/// Every matrix involved is consistent, so this is the usual
/// time-frequency momentum carried out on signals. The trace records the
/// loss at the extrapolated point `z_t`; the final entry is at `s_T`.
pub fn run_fgla(
    measurements: &Measurements,
    plan: &StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
) -> Result<RunReport> {
    let sweep = prepare(measurements, plan, config, init, "FGLA")?;
    let gamma = config.momentum()?;
    let mut tracker = Tracker::new(config, false);
    let mut s = init.signal.clone();
    let mut z = s.clone();
    for t in 0..config.iterations {
        let az = plan.stft(&z)?;
        tracker.objective(t, quadratic_loss(measurements, &az), &s, t == 0)?;
        let (next, residual) = sweep.synthesize(az)?;
        tracker.residual(residual);
        tracker.iterate(t + 1, &next, &s)?;
        for ((zi, &ni), si) in z.iter_mut().zip(&next).zip(&s) {
            *zi = ni + gamma * (ni - si);
        }
        s = next;
    }
    let last = quadratic_loss(measurements, &plan.stft(&s)?);
    tracker.objective(config.iterations, last, &s, true)?;
    Ok(tracker.finish(s, config.iterations, 0))
}

/// GLADMM: `X = P_M(Y - W)`, `Y = P_C(X + W)`, `W += X - Y`, `W_0 = 0`.
///
/// `Y` stays in the range of the STFT and is tracked by its signal `y`,
/// which is also the output.
pub fn run_gladmm(
    measurements: &Measurements,
    plan: &StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
) -> Result<RunReport> {
    let sweep = prepare(measurements, plan, config, init, "GLADMM")?;
    let mut tracker = Tracker::new(config, false);
    let mut y = init.signal.clone();
    let mut ay = plan.stft(&y)?;
    let mut w = TfMatrix::zeros(plan.fft_size(), plan.num_frames());
    for t in 0..config.iterations {
        tracker.objective(t, quadratic_loss(measurements, &ay), &y, t == 0)?;
        let mut x = ay.clone();
        for (xi, wi) in x.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *xi -= wi;
        }
        project_magnitude(&mut x, sweep.r, sweep.epsilon);
        let mut sum = x.clone();
        for (si, wi) in sum.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *si += wi;
        }
        let (next, residual) = plan.istft_with_residual(&sum)?;
        tracker.residual(residual);
        tracker.iterate(t + 1, &next, &y)?;
        y = next;
        ay = plan.stft(&y)?;
        if !config.force_zero_dual {
            for ((wi, xi), yi) in w.as_mut_slice().iter_mut().zip(x.as_slice()).zip(ay.as_slice()) {
                *wi += xi - yi;
            }
        }
    }
    tracker.objective(config.iterations, quadratic_loss(measurements, &ay), &y, true)?;
    Ok(tracker.finish(y, config.iterations, 0))
}
