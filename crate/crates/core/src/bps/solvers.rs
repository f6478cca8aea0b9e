//! Closed-form first-arrival times for each factor kind, and the reflection.
//!
//! Every solver takes an energy gap `c = -log E` with `E ~ U(0, 1)` and returns
//! the `t` solving `int_0^t max(0, <grad U_f(w + v s), v>) ds = c`, or infinity.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::factorgraph::{Factor, FactorKind};

fn check_gap(c: f64) -> Result<()> {
    if c > 0.0 && !c.is_nan() {
        Ok(())
    } else {
        Err(Error::arg(format!("energy gap must be positive, got {c}")))
    }
}

/// Draws an energy gap `-log E`.
pub fn sample_energy_gap<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let c: f64 = rng.sample(Exp1);
        if c > 0.0 {
            return c;
        }
    }
}

/// Sojourn factor `U(t) = h q0 exp(dot t)`: `log(1 + c / (h q0)) / dot` when `dot > 0`.
pub fn solve_bounce_sojourn(h: f64, q0: f64, dot: f64, c: f64) -> Result<f64> {
    check_gap(c)?;
    if h < 0.0 || q0 < 0.0 {
        return Err(Error::arg(format!("sojourn time and rate must be non-negative, got {h}, {q0}")));
    }
    let mass = h * q0;
    if !(dot > 0.0) || mass == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((c / mass).ln_1p() / dot)
}

/// Transition-count factor `U(t) = U(0) - count dot t`: `-c / (count dot)` when `dot < 0`.
pub fn solve_bounce_transition(count: f64, dot: f64, c: f64) -> Result<f64> {
    check_gap(c)?;
    if !(count > 0.0) {
        return Err(Error::arg(format!("transition count must be positive, got {count}")));
    }
    if dot < 0.0 {
        Ok(-c / (count * dot))
    } else {
        Ok(f64::INFINITY)
    }
}

/// Normal factor with intensity `max(0, a + b t)`, `a = kappa <w, v>`, `b = kappa |v|^2`.
pub fn solve_bounce_normal(a: f64, b: f64, c: f64) -> Result<f64> {
    check_gap(c)?;
    if !(b > 0.0) {
        return Err(Error::arg(format!("normal factor needs b > 0, got {b}")));
    }
    if a >= 0.0 {
        // (-a + sqrt(a^2 + 2bc)) / b without cancellation.
        Ok(2.0 * c / (a + (a * a + 2.0 * b * c).sqrt()))
    } else {
        Ok(-a / b + (2.0 * c / b).sqrt())
    }
}

/// `v - 2 (<g, v> / |g|^2) g`.
pub fn reflect(v: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_dim("gradient", v.len(), grad.len())?;
    let gg: f64 = grad.iter().map(|g| g * g).sum();
    if !(gg > 0.0) || !gg.is_finite() {
        return Err(Error::pre("cannot reflect on a zero or non-finite gradient"));
    }
    let gv: f64 = grad.iter().zip(v).map(|(g, v)| g * v).sum();
    let s = 2.0 * gv / gg;
    Ok(v.iter().zip(grad).map(|(v, g)| v - s * g).collect())
}

/// First arrival time for one factor with positions `at(k)` and velocities `vel(k)`.
pub fn factor_bounce_time(
    factor: &Factor,
    at: impl Fn(usize) -> f64,
    vel: impl Fn(usize) -> f64,
    c: f64,
) -> Result<f64> {
    let dot = || factor.phi.iter().map(|&(k, p)| p * vel(k)).sum::<f64>();
    match factor.kind {
        FactorKind::Sojourn { h, pi_to, .. } => {
            let lin: f64 = factor.phi.iter().map(|&(k, p)| p * at(k)).sum();
            solve_bounce_sojourn(h, pi_to * lin.exp(), dot(), c)
        }
        FactorKind::TransitionCount { count, .. } => solve_bounce_transition(count, dot(), c),
        FactorKind::NormalPrior { coord, kappa } => {
            let v = vel(coord);
            let b = kappa * v * v;
            if b == 0.0 {
                check_gap(c)?;
                return Ok(f64::INFINITY);
            }
            solve_bounce_normal(kappa * at(coord) * v, b, c)
        }
        FactorKind::InitialCount { .. } => {
            check_gap(c)?;
            Ok(f64::INFINITY)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert_eq!(solve_bounce_sojourn(1.0, 1.0, -1.0, 1.0).unwrap(), f64::INFINITY);
        assert_close!(solve_bounce_sojourn(1.0, 1.0, 1.0, 1.0).unwrap(), 2f64.ln(), 1e-15);
        assert_eq!(solve_bounce_sojourn(0.0, 1.0, 1.0, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(solve_bounce_transition(2.0, 1.0, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(solve_bounce_transition(2.0, 0.0, 1.0).unwrap(), f64::INFINITY);
        assert_close!(solve_bounce_transition(2.0, -1.0, 1.0).unwrap(), 0.5, 1e-15);
        assert_close!(solve_bounce_normal(0.0, 1.0, 0.5).unwrap(), 1.0, 1e-15);
        assert_close!(solve_bounce_normal(-1.0, 1.0, 0.5).unwrap(), 2.0, 1e-15);
    }

    #[test]
    fn gaps_near_zero_give_times_near_zero() {
        assert!(solve_bounce_sojourn(1.0, 2.0, 0.5, 1e-12).unwrap() < 1e-11);
        assert!(solve_bounce_transition(3.0, -0.5, 1e-12).unwrap() < 1e-11);
        assert!(solve_bounce_normal(1.0, 1.0, 1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn invalid_arguments() {
        assert!(solve_bounce_sojourn(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(solve_bounce_transition(1.0, -1.0, -1.0).is_err());
        assert!(solve_bounce_normal(1.0, 0.0, 1.0).is_err());
        assert!(solve_bounce_normal(1.0, 1.0, f64::NAN).is_err());
        assert!(reflect(&[1.0, 2.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(reflect(&[1.0, 2.0], &[1.0, 0.0]).unwrap(), vec![-1.0, 2.0]);
        assert_eq!(reflect(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), vec![-2.0, -4.0]);
        assert_eq!(reflect(&[2.0, -1.0], &[1.0, 2.0]).unwrap(), vec![2.0, -1.0]);
    }

    fn integrated_normal(a: f64, b: f64, t: f64) -> f64 {
        // int_0^t max(0, a + b s) ds
        let start = (-a / b).clamp(0.0, t);
        let f = |s: f64| a * s + 0.5 * b * s * s;
        f(t) - f(start)
    }

    proptest! {
        #[test]
        fn normal_solver_inverts_integrated_intensity(a in -10.0..10.0f64, b in 0.01..10.0f64, c in 0.001..10.0f64) {
            let t = solve_bounce_normal(a, b, c).unwrap();
            prop_assert!((integrated_normal(a, b, t) - c).abs() <= 1e-10 * c.max(1.0));
        }

        #[test]
        fn sojourn_solver_hits_energy_gap(h in 0.01..5.0f64, q0 in 0.01..5.0f64, dot in 0.01..5.0f64, c in 0.001..10.0f64) {
            let t = solve_bounce_sojourn(h, q0, dot, c).unwrap();
            let gap = h * q0 * ((dot * t).exp() - 1.0);
            prop_assert!((gap - c).abs() <= 1e-8 * c);
        }

        #[test]
        fn reflection_is_an_isometric_involution(
            v in proptest::collection::vec(-5.0..5.0f64, 3),
            g in proptest::collection::vec(0.1..5.0f64, 3),
        ) {
            let once = reflect(&v, &g).unwrap();
            let twice = reflect(&once, &g).unwrap();
            let n0: f64 = v.iter().map(|x| x * x).sum();
            let n1: f64 = once.iter().map(|x| x * x).sum();
            prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
            for (a, b) in v.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
