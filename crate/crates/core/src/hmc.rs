//! Leapfrog HMC and the potentials it runs on.
//!
//! Potentials are negated augmented log-densities:
//! `U(w) = kappa |w|^2 / 2 + sum_x h_x sum_{x'} q_{x,x'} - sum c_{x,x'} log q_{x,x'} - sum n_x log pi_x`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::paths::SuffStats;
use crate::ratematrix::{sparse_dot, stationary_dist, FeatureSet, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    /// Leapfrog steps per trajectory.
    pub steps: usize,
    pub step_size: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig { steps: 40, step_size: 0.001 }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::arg("HMC needs at least one leapfrog step"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::arg(format!("HMC step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

fn check_inputs(z: &SuffStats, features: &FeatureSet, wu: &[f64]) -> Result<()> {
    check_dim("sufficient statistics", features.n_states(), z.n_states())?;
    check_dim("univariate weights", features.p1(), wu.len())
}

/// Per-state weight `alpha_y = sum_x h_x q_{x,y} - sum_x c_{x,y} - n_y`, so that
/// the data part of the `wu` gradient is `sum_y alpha_y (psi(y) - grad A)`.
fn state_weights(z: &SuffStats, pi: &[f64], theta_of: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let s = pi.len();
    (0..s)
        .map(|y| {
            let mut a = -(z.n(y) as f64);
            for x in (0..s).filter(|&x| x != y) {
                a += z.h(x) * pi[y] * theta_of(x, y) - z.c(x, y) as f64;
            }
            a
        })
        .collect()
}

fn univariate_gradient(features: &FeatureSet, wu: &[f64], kappa: f64, pi: &[f64], alpha: &[f64]) -> Vec<f64> {
    let p1 = features.p1();
    let mut grad_a = vec![0.0; p1];
    for (x, &p) in pi.iter().enumerate() {
        for (g, f) in grad_a.iter_mut().zip(features.psi(x)) {
            *g += p * f;
        }
    }
    let total: f64 = alpha.iter().sum();
    let mut g: Vec<f64> = wu.iter().zip(&grad_a).map(|(w, a)| kappa * w - total * a).collect();
    for (y, &a) in alpha.iter().enumerate() {
        for (gk, f) in g.iter_mut().zip(features.psi(y)) {
            *gk += a * f;
        }
    }
    g
}

fn data_potential(z: &SuffStats, pi: &[f64], theta_of: impl Fn(usize, usize) -> f64) -> f64 {
    let s = pi.len();
    let mut u = 0.0;
    for x in 0..s {
        if z.n(x) > 0 {
            u -= z.n(x) as f64 * pi[x].ln();
        }
        for y in (0..s).filter(|&y| y != x) {
            let q = pi[y] * theta_of(x, y);
            u += z.h(x) * q;
            if z.c(x, y) > 0 {
                u -= z.c(x, y) as f64 * q.ln();
            }
        }
    }
    u
}

/// `U(wu)` with the exchangeable parameters `theta` (by pair rank) held fixed.
pub fn potential_wu(z: &SuffStats, wu: &[f64], theta: &[f64], features: &FeatureSet, kappa: f64) -> Result<f64> {
    check_inputs(z, features, wu)?;
    check_dim("exchangeable parameters", features.ordering().len(), theta.len())?;
    let pi = stationary_dist(wu, features)?;
    let ord = features.ordering();
    let prior = 0.5 * kappa * wu.iter().map(|w| w * w).sum::<f64>();
    Ok(prior + data_potential(z, &pi, |x, y| theta[ord.rank(x, y)]))
}

/// Gradient of [`potential_wu`].
pub fn grad_wu(z: &SuffStats, wu: &[f64], theta: &[f64], features: &FeatureSet, kappa: f64) -> Result<Vec<f64>> {
    check_inputs(z, features, wu)?;
    check_dim("exchangeable parameters", features.ordering().len(), theta.len())?;
    let pi = stationary_dist(wu, features)?;
    let ord = features.ordering();
    let alpha = state_weights(z, &pi, |x, y| theta[ord.rank(x, y)]);
    Ok(univariate_gradient(features, wu, kappa, &pi, &alpha))
}

fn theta_all(wb: &[f64], features: &FeatureSet) -> Vec<f64> {
    (0..features.ordering().len()).map(|r| sparse_dot(wb, features.phi_rank(r)).exp()).collect()
}

/// `U(wu, wb)` for the HMC-only sampler.
pub fn potential_full(z: &SuffStats, w: &WeightVector, features: &FeatureSet) -> Result<f64> {
    check_dim("bivariate weights", features.p2(), w.wb.len())?;
    let theta = theta_all(&w.wb, features);
    let prior_wb = 0.5 * w.kappa * w.wb.iter().map(|x| x * x).sum::<f64>();
    Ok(potential_wu(z, &w.wu, &theta, features, w.kappa)? + prior_wb)
}

/// Gradient of [`potential_full`], `wu` block first.
pub fn grad_full(z: &SuffStats, w: &WeightVector, features: &FeatureSet) -> Result<Vec<f64>> {
    check_inputs(z, features, &w.wu)?;
    check_dim("bivariate weights", features.p2(), w.wb.len())?;
    let theta = theta_all(&w.wb, features);
    let pi = stationary_dist(&w.wu, features)?;
    let ord = features.ordering();
    let alpha = state_weights(z, &pi, |x, y| theta[ord.rank(x, y)]);
    let mut g = univariate_gradient(features, &w.wu, w.kappa, &pi, &alpha);
    let mut gb: Vec<f64> = w.wb.iter().map(|x| w.kappa * x).collect();
    let s = features.n_states();
    for x in 0..s {
        for y in (0..s).filter(|&y| y != x) {
            let q = pi[y] * theta[ord.rank(x, y)];
            let coef = z.h(x) * q - z.c(x, y) as f64;
            if coef != 0.0 {
                for &(k, v) in features.phi(x, y) {
                    gb[k] += coef * v;
                }
            }
        }
    }
    g.extend(gb);
    Ok(g)
}

/// `steps` leapfrog steps of size `eps` with identity mass.
pub fn leapfrog(
    mut grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    q0: &[f64],
    p0: &[f64],
    steps: usize,
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim("momentum", q0.len(), p0.len())?;
    let mut q = q0.to_vec();
    let mut p = p0.to_vec();
    let mut g = grad(&q)?;
    for _ in 0..steps {
        for (pk, gk) in p.iter_mut().zip(&g) {
            *pk -= 0.5 * eps * gk;
        }
        for (qk, pk) in q.iter_mut().zip(&p) {
            *qk += eps * pk;
        }
        g = grad(&q)?;
        for (pk, gk) in p.iter_mut().zip(&g) {
            *pk -= 0.5 * eps * gk;
        }
    }
    Ok((q, p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcStep {
    pub position: Vec<f64>,
    pub accepted: bool,
    /// `H(proposal) - H(start)`; infinite when the proposal was not finite.
    pub energy_change: f64,
}

/// One Metropolis-corrected HMC trajectory from `q0`.
pub fn hmc_step<R: Rng + ?Sized>(
    potential: impl Fn(&[f64]) -> Result<f64>,
    grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    q0: &[f64],
    config: &HmcConfig,
    rng: &mut R,
) -> Result<HmcStep> {
    config.validate()?;
    let p0: Vec<f64> = (0..q0.len()).map(|_| rng.sample(StandardNormal)).collect();
    let kinetic = |p: &[f64]| 0.5 * p.iter().map(|x| x * x).sum::<f64>();
    let h0 = potential(q0)? + kinetic(&p0);
    if !h0.is_finite() {
        return Err(Error::Numerical(format!("HMC started from a state with energy {h0}")));
    }
    let (q1, p1) = leapfrog(grad, q0, &p0, config.steps, config.step_size)?;
    let h1 = if q1.iter().chain(&p1).all(|x| x.is_finite()) {
        potential(&q1).map(|u| u + kinetic(&p1)).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let dh = if h1.is_finite() { h1 - h0 } else { f64::INFINITY };
    let u: f64 = rng.random();
    let accepted = dh.is_finite() && u.ln() < -dh;
    Ok(HmcStep {
        position: if accepted { q1 } else { q0.to_vec() },
        accepted,
        energy_change: dh,
    })
}
