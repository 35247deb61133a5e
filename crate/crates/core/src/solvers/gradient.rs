use crate::divergence::{Measurements, Objective, ProblemSpec};
use crate::error::Result;
use crate::stft::StftPlan;

use super::{InitialEstimate, MomentumStart, RunReport, SolverConfig, Tracker};

/// Accelerated gradient descent on `J`:
/// `y_{t+1} = x_t - mu grad J(x_t)`, `x_{t+1} = y_{t+1} + gamma (y_{t+1} - y_t)`.
pub fn run_gradient(
    problem: &ProblemSpec,
    measurements: &Measurements,
    plan: &StftPlan,
    config: &SolverConfig,
    init: &InitialEstimate,
) -> Result<RunReport> {
    config.validate_common()?;
    let mu = config.step_size()?;
    let gamma = config.momentum()?;
    init.check(plan)?;
    let problem = problem.with_epsilon(config.epsilon)?;
    let objective = Objective::new(problem, measurements)?;
    let mut tracker = Tracker::new(config, true);

    let mut x = init.signal.clone();
    let mut y_old = match config.momentum_start {
        MomentumStart::Iterate => x.clone(),
        MomentumStart::Zero => vec![0.0; x.len()],
    };
    for t in 0..config.iterations {
        let eval = objective.evaluate(&x, plan)?;
        tracker.residual(eval.imag_residual);
        tracker.objective(t, eval.value, &x, t == 0)?;
        let mut next = Vec::with_capacity(x.len());
        for ((xi, gi), yo) in x.iter().zip(&eval.gradient).zip(y_old.iter_mut()) {
            let y = xi - mu * gi;
            next.push(y + gamma * (y - *yo));
            *yo = y;
        }
        tracker.iterate(t + 1, &next, &x)?;
        x = next;
    }
    let last = objective.value(&plan.stft(&x)?)?;
    tracker.objective(config.iterations, last, &x, true)?;
    Ok(tracker.finish(x, config.iterations, objective.floored_count()))
}
