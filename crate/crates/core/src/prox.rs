//! Proximal operators `prox_{f/rho}(y) = argmin_u f(u) + rho/2 (u - y)^2` of
//! Bregman divergences with a fixed measurement `r`, entrywise.
//!
//! Each closed form comes from the scalar stationarity condition; where it is
//! a quadratic the nonnegative root is taken, evaluated in the
//! cancellation-free arrangement for the sign of the linear coefficient.

use crate::divergence::{Direction, DivergenceSpec, DEFAULT_EPSILON};
use crate::error::{Error, Result};

const LAMBERT_MAX_ITER: usize = 50;

/// Principal branch `W0(z)` for `z >= 0`, by Halley iteration.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if z.is_nan() || z < 0.0 {
        return Err(Error::Domain(format!("lambert_w0 requires z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if z < std::f64::consts::E {
        z.ln_1p()
    } else {
        let lz = z.ln();
        lz - lz.ln()
    };
    // Iterate to a relative step at machine precision rather than stopping at
    // the identity residual: callers divide W by small penalties.
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// `W0(e^a)`, valid when `e^a` overflows: solves `w + ln w = a` by Newton.
fn lambert_w0_exp(a: f64) -> f64 {
    if a < 500.0 {
        return lambert_w0(a.exp()).unwrap_or(0.0);
    }
    let mut w = a - a.ln();
    for _ in 0..LAMBERT_MAX_ITER {
        let f = w + w.ln() - a;
        let step = f / (1.0 + w.recip());
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProxKind {
    /// `1/2 (u - r)^2`, either direction.
    Quadratic,
    /// `D_KL(r | u)`.
    KlRight,
    /// `D_KL(u | r)`.
    KlLeft,
    /// `D_IS(u | r)`.
    IsLeft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSpec {
    kind: ProxKind,
    rho: f64,
    epsilon: f64,
}

impl ProxSpec {
    pub fn new(divergence: DivergenceSpec, direction: Direction, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
        }
        let kind = match (divergence, direction) {
            (DivergenceSpec::Quadratic, _) => ProxKind::Quadratic,
            (DivergenceSpec::KullbackLeibler, Direction::Right) => ProxKind::KlRight,
            (DivergenceSpec::KullbackLeibler, Direction::Left) => ProxKind::KlLeft,
            (DivergenceSpec::ItakuraSaito, Direction::Left) => ProxKind::IsLeft,
            (other, dir) => {
                return Err(Error::Unsupported(format!(
                    "no closed-form proximal operator for {other} ({dir})"
                )))
            }
        };
        Ok(Self {
            kind,
            rho,
            epsilon: DEFAULT_EPSILON,
        })
    }

    /// Floor applied to `r` where the formula inverts it.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn kind(&self) -> ProxKind {
        self.kind
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Scalar proximal step for measurement `r >= 0` and point `y`.
    pub fn apply(&self, r: f64, y: f64) -> f64 {
        let rho = self.rho;
        match self.kind {
            ProxKind::Quadratic => ((rho * y + r) / (rho + 1.0)).max(0.0),
            ProxKind::KlRight => {
                // rho u^2 + (1 - rho y) u - r = 0
                positive_root(rho, 1.0 - rho * y, r)
            }
            ProxKind::KlLeft => {
                if r == 0.0 {
                    0.0
                } else {
                    lambert_w0_exp((rho * r).ln() + rho * y) / rho
                }
            }
            ProxKind::IsLeft => {
                // rho u^2 + (1/r - rho y) u - 1 = 0
                positive_root(rho, r.max(self.epsilon).recip() - rho * y, 1.0)
            }
        }
    }
}

/// Nonnegative root of `a u^2 + b u - c = 0` with `a > 0`, `c >= 0`.
fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    let sq = (b * b + 4.0 * a * c).sqrt();
    if b <= 0.0 {
        (sq - b) / (2.0 * a)
    } else if c == 0.0 {
        0.0
    } else {
        2.0 * c / (b + sq)
    }
}

pub fn prox_div(spec: &ProxSpec, r: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if r.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "measurement and point lengths differ: {} vs {}",
            r.len(),
            y.len()
        )));
    }
    if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidInput(format!("measurements must be >= 0, found {v}")));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("point must be finite, found {v}")));
    }
    Ok(r.iter().zip(y).map(|(&rv, &yv)| spec.apply(rv, yv)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn all_kinds(rho: f64) -> Vec<ProxSpec> {
        vec![
            ProxSpec::new(DivergenceSpec::Quadratic, Direction::Right, rho).unwrap(),
            ProxSpec::new(DivergenceSpec::KullbackLeibler, Direction::Right, rho).unwrap(),
            ProxSpec::new(DivergenceSpec::KullbackLeibler, Direction::Left, rho).unwrap(),
            ProxSpec::new(DivergenceSpec::ItakuraSaito, Direction::Left, rho).unwrap(),
        ]
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_9).abs() < 1e-15);
        assert!(matches!(lambert_w0(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn lambert_identity_grid() {
        for z in [0.0, 1e-8, 1.0, E, 10.0, 1e3, 1e8] {
            let w = lambert_w0(z).unwrap();
            assert!(w >= 0.0);
            assert!((w * w.exp() - z).abs() <= 1e-12 * (1.0 + z), "z = {z}");
        }
    }

    #[test]
    fn lambert_of_exponential_in_overflow_regime() {
        for a in [10.0, 100.0, 600.0, 1e4] {
            let w = lambert_w0_exp(a);
            assert!((w + w.ln() - a).abs() <= 1e-12 * a, "a = {a}");
        }
    }

    #[test]
    fn closed_form_examples() {
        let q = ProxSpec::new(DivergenceSpec::Quadratic, Direction::Left, 1.0).unwrap();
        assert_eq!(prox_div(&q, &[0.0], &[2.0]).unwrap(), vec![1.0]);
        let kl = ProxSpec::new(DivergenceSpec::KullbackLeibler, Direction::Left, 1.0).unwrap();
        assert!((kl.apply(1.0, 1.0) - 1.0).abs() < 1e-15);
        let is = ProxSpec::new(DivergenceSpec::ItakuraSaito, Direction::Left, 1.0).unwrap();
        assert!((is.apply(1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_is_a_fixed_point() {
        for rho in [0.01, 0.1, 1.0, 10.0] {
            for spec in all_kinds(rho) {
                for r in [0.05, 1.0, 3.5, 9.0] {
                    let u = spec.apply(r, r);
                    assert!((u - r).abs() <= 1e-12 * (1.0 + r), "{:?} rho={rho} r={r}", spec.kind());
                }
            }
        }
    }

    #[test]
    fn unsupported_pairs() {
        assert!(matches!(
            ProxSpec::new(DivergenceSpec::ItakuraSaito, Direction::Right, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            ProxSpec::new(DivergenceSpec::Beta(0.5), Direction::Left, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            ProxSpec::new(DivergenceSpec::Quadratic, Direction::Left, 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn input_validation() {
        let q = ProxSpec::new(DivergenceSpec::Quadratic, Direction::Left, 1.0).unwrap();
        assert!(matches!(prox_div(&q, &[1.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(prox_div(&q, &[-1.0], &[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_measurement_edge_cases() {
        let kl_left = ProxSpec::new(DivergenceSpec::KullbackLeibler, Direction::Left, 2.0).unwrap();
        assert_eq!(kl_left.apply(0.0, 5.0), 0.0);
        let kl_right =
            ProxSpec::new(DivergenceSpec::KullbackLeibler, Direction::Right, 2.0).unwrap();
        // u = max(rho y - 1, 0) / rho
        assert!((kl_right.apply(0.0, 5.0) - 4.5).abs() < 1e-15);
        assert_eq!(kl_right.apply(0.0, -5.0), 0.0);
    }

    #[test]
    fn large_penalty_tracks_the_point() {
        for spec in all_kinds(1e6) {
            for (r, y) in [(1.0, 2.0), (3.0, 0.5), (0.2, 7.0)] {
                assert!((spec.apply(r, y) - y).abs() <= 1e-3, "{:?}", spec.kind());
            }
        }
    }

    proptest! {
        #[test]
        fn outputs_are_nonnegative(
            rho in 1e-2f64..10.0, r in 0.0f64..10.0, y in -10.0f64..10.0, kind in 0usize..4,
        ) {
            let spec = all_kinds(rho)[kind];
            let u = spec.apply(r, y);
            prop_assert!(u >= 0.0 && u.is_finite());
        }

        #[test]
        fn nonexpansive(
            rho in 1e-2f64..10.0, r in 0.0f64..10.0,
            y1 in -10.0f64..10.0, y2 in -10.0f64..10.0, kind in 0usize..4,
        ) {
            let spec = all_kinds(rho)[kind];
            let d = (spec.apply(r, y1) - spec.apply(r, y2)).abs();
            prop_assert!(d <= (y1 - y2).abs() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
