use crate::divergence::{Measurements, Objective, Power, ProblemSpec};
use crate::error::{Error, Result};
use crate::prox::ProxSpec;
use crate::stft::{StftPlan, TfMatrix};
use crate::Complex64;

use super::{require_magnitudes, InitialEstimate, RunReport, SolverConfig, Tracker};

/// ADMM on the splitting `A x = u e^(i theta)`, magnitude measurements only.
///
/// Each sweep: `H = X + L/rho`, `U = prox(|H|)`, `Z = U H/|H|`,
/// `x = istft(Z - L/rho)`, `L += rho (stft(x) - Z)`.
pub fn run_admm(
    problem: &ProblemSpec,
    measurements: &Measurements,
    plan: &StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
) -> Result<RunReport> {
    config.validate_common()?;
    let rho = config.penalty()?;
    if problem.power != Power::Magnitude {
        return Err(Error::Unsupported(format!(
            "ADMM is only defined for d = 1, got d = {}",
            problem.power
        )));
    }
    require_magnitudes(measurements, "ADMM")?;
    init.check(plan)?;
    let problem = problem.with_epsilon(config.epsilon)?;
    let prox = ProxSpec::new(problem.divergence, problem.direction, rho)?.with_epsilon(config.epsilon)?;
    let objective = Objective::new(problem, measurements)?;
    let r = measurements.values();
    let mut tracker = Tracker::new(config, false);

    let mut x = init.signal.clone();
    let mut ax = plan.stft(&x)?;
    let mut lambda = TfMatrix::zeros(plan.fft_size(), plan.num_frames());
    let mut z = ax.clone();
    let mut target = ax.clone();
    for t in 0..config.iterations {
        tracker.objective(t, objective.value(&ax)?, &x, t == 0)?;
        for (k, ((zk, tk), (&a, &l))) in z
            .as_mut_slice()
            .iter_mut()
            .zip(target.as_mut_slice())
            .zip(ax.as_slice().iter().zip(lambda.as_slice()))
            .enumerate()
        {
            let scaled = l / rho;
            let h = a + scaled;
            let magnitude = h.norm();
            let u = prox.apply(r[k], magnitude);
            *zk = if magnitude > 0.0 {
                h * (u / magnitude)
            } else {
                Complex64::new(u, 0.0)
            };
            *tk = *zk - scaled;
        }
        let (next, residual) = plan.istft_with_residual(&target)?;
        tracker.residual(residual);
        tracker.iterate(t + 1, &next, &x)?;
        x = next;
        ax = plan.stft(&x)?;
        for ((l, a), zk) in lambda.as_mut_slice().iter_mut().zip(ax.as_slice()).zip(z.as_slice()) {
            *l += rho * (a - zk);
        }
        if !lambda.is_finite() {
            return Err(tracker.diverged(t + 1, "multipliers are not finite".into(), &x));
        }
    }
    tracker.objective(config.iterations, objective.value(&ax)?, &x, true)?;
    Ok(tracker.finish(x, config.iterations, objective.floored_count()))
}
