//! Reference computations that share no code with the library: a naive
//! full-spectrum DFT, textbook beta-divergences, finite differences and a
//! golden-section minimizer.
#![allow(dead_code)]

use std::f64::consts::PI;

use bregman_pr::harness::{InputSpec, SynthKind, SynthSpec};
use bregman_pr::{Complex64, Direction, DivergenceSpec, Measurements, Power, ProblemSpec, StftPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn relative_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// The three desk-scale synthetic inputs.
pub fn desk_inputs() -> Vec<InputSpec> {
    SynthKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| InputSpec::Synthetic(SynthSpec::new(*k, 0.5, i as u64 + 1)))
        .collect()
}

/// The eleven gradient setups: (code, divergence, direction, d).
pub fn gradient_setups() -> Vec<(&'static str, DivergenceSpec, Direction, Power)> {
    use Direction::{Left, Right};
    use DivergenceSpec::{Beta, ItakuraSaito as Is, KullbackLeibler as Kl, Quadratic as Qd};
    use Power::{Magnitude as D1, Power as D2};
    vec![
        ("G·05·R1", Beta(0.5), Right, D1),
        ("G·05·L1", Beta(0.5), Left, D1),
        ("G·KL·R1", Kl, Right, D1),
        ("G·KL·L1", Kl, Left, D1),
        ("G·QD·1", Qd, Right, D1),
        ("G·IS·R2", Is, Right, D2),
        ("G·05·R2", Beta(0.5), Right, D2),
        ("G·05·L2", Beta(0.5), Left, D2),
        ("G·KL·R2", Kl, Right, D2),
        ("G·KL·L2", Kl, Left, D2),
        ("G·QD·2", Qd, Right, D2),
    ]
}

// ---------------------------------------------------------------------------
// STFT by direct summation

/// Full `M x N` unitary STFT of a padded signal, frame-major, samples outside
/// the plan's interior treated as zero.
pub fn naive_stft(plan: &StftPlan, x: &[f64]) -> Vec<Vec<Complex64>> {
    let m_size = plan.fft_size();
    let w = plan.analysis_window().coefficients();
    let interior = plan.interior();
    let scale = 1.0 / (m_size as f64).sqrt();
    (0..plan.num_frames())
        .map(|n| {
            (0..m_size)
                .map(|m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, wt) in w.iter().enumerate() {
                        let idx = n * plan.hop() + t;
                        if !interior.contains(&idx) {
                            continue;
                        }
                        let phase = -2.0 * PI * (m * t) as f64 / m_size as f64;
                        acc += Complex64::from_polar(x[idx] * wt, phase);
                    }
                    acc * scale
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Divergences

/// `d_beta(a | b)`, written from the beta-divergence definition.
pub fn beta_divergence(beta: f64, a: f64, b: f64) -> f64 {
    if beta == 1.0 {
        a * (a / b).ln() - a + b
    } else if beta == 0.0 {
        a / b - (a / b).ln() - 1.0
    } else {
        (a.powf(beta) + (beta - 1.0) * b.powf(beta) - beta * a * b.powf(beta - 1.0))
            / (beta * (beta - 1.0))
    }
}

fn family_beta(spec: DivergenceSpec) -> f64 {
    match spec {
        DivergenceSpec::Quadratic => 2.0,
        DivergenceSpec::KullbackLeibler => 1.0,
        DivergenceSpec::ItakuraSaito => 0.0,
        DivergenceSpec::Beta(b) => b,
    }
}

/// Objective summed over every entry of the full matrix. The quadratic loss
/// is `1/2 (a - b)^2`, which is also `d_2`.
pub fn naive_objective(problem: &ProblemSpec, r_full: &[Vec<f64>], plan: &StftPlan, x: &[f64]) -> f64 {
    let beta = family_beta(problem.divergence);
    let d = problem.power.exponent();
    naive_stft(plan, x)
        .iter()
        .zip(r_full)
        .flat_map(|(frame, r)| frame.iter().zip(r))
        .map(|(c, &r)| {
            let y = c.norm().powf(d);
            match problem.direction {
                Direction::Right => beta_divergence(beta, r, y),
                Direction::Left => beta_divergence(beta, y, r),
            }
        })
        .sum()
}

/// Random positive measurements in half-spectrum storage, and the same values
/// expanded to the full Hermitian-symmetric matrix.
pub fn random_measurements(
    rng: &mut ChaCha8Rng,
    plan: &StftPlan,
    power: Power,
) -> (Measurements, Vec<Vec<f64>>) {
    let m_size = plan.fft_size();
    let bins = m_size / 2 + 1;
    let half: Vec<f64> = (0..bins * plan.num_frames())
        .map(|_| rng.gen_range(0.2f64..1.5).powf(power.exponent()))
        .collect();
    let full = (0..plan.num_frames())
        .map(|n| {
            (0..m_size)
                .map(|m| half[n * bins + if m < bins { m } else { m_size - m }])
                .collect()
        })
        .collect();
    let r = Measurements::new(half, m_size, plan.num_frames(), power).unwrap();
    (r, full)
}

/// Central differences of `f` along each interior coordinate of `x`, with one
/// Richardson step (steps `h` and `h/2`) to cancel the `h^2` error term. Plain
/// central differences lose accuracy where some `|X|` nearly vanishes.
pub fn finite_difference(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    coords: std::ops::Range<usize>,
    h: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    let mut central = |i: usize, step: f64| {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * step)
    };
    for i in coords {
        let coarse = central(i, h);
        let fine = central(i, 0.5 * h);
        grad[i] = (4.0 * fine - coarse) / 3.0;
    }
    grad
}

// ---------------------------------------------------------------------------
// Proximal operators by brute force

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarLoss {
    Quadratic,
    KlRight,
    KlLeft,
    IsLeft,
}

/// `f(u1) - f(u2)` for `f(u) = D(u) + rho/2 (u - y)^2`, arranged so that close
/// arguments do not cancel.
pub fn prox_objective_diff(loss: ScalarLoss, rho: f64, r: f64, y: f64, u1: f64, u2: f64) -> f64 {
    let du = u1 - u2;
    let log_ratio = (du / u2).ln_1p();
    let data = match loss {
        ScalarLoss::Quadratic => 0.5 * du * (u1 + u2 - 2.0 * r),
        // r ln(r/u) - r + u
        ScalarLoss::KlRight => du - r * log_ratio,
        // u ln(u/r) - u + r
        ScalarLoss::KlLeft => du * (u1 / r).ln() + u2 * log_ratio - du,
        // u/r - ln(u/r) - 1
        ScalarLoss::IsLeft => du / r - log_ratio,
    };
    data + 0.5 * rho * du * (u1 + u2 - 2.0 * y)
}

/// Minimizer of `D(u) + rho/2 (u - y)^2` over `u >= 0` by golden-section
/// search on `[0, max(y, 0) + r + 10]`.
pub fn golden_section_prox(loss: ScalarLoss, rho: f64, r: f64, y: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, y.max(0.0) + r + 10.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    while b - a > 1e-12 * (1.0 + b) {
        if prox_objective_diff(loss, rho, r, y, c, d) < 0.0 {
            b = d;
            d = c;
            c = b - inv_phi * (b - a);
        } else {
            a = c;
            c = d;
            d = a + inv_phi * (b - a);
        }
    }
    0.5 * (a + b)
}

/// Omega constant, `W(1)`.
pub const OMEGA: f64 = 0.567_143_290_409_783_8;

/// The fixed Lambert W test points.
pub fn lambert_grid() -> Vec<f64> {
    vec![
        0.0, 1e-300, 1e-12, 1e-6, 1e-3, 0.1, 0.5, 1.0, std::f64::consts::E, 5.0, 10.0, 100.0,
        1e3, 1e6, 1e12, 1e50, 1e100, 1e200, 1e300,
    ]
}
