//! Plain BPS: every event moves and reflects the whole velocity vector.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use super::solvers::{factor_bounce_time, reflect, sample_energy_gap, solve_bounce_normal};
use super::trajectory::{Trajectory, Triplet};
use crate::error::{check_dim, Error, Result};
use crate::factorgraph::FactorGraph;

/// A potential the global sampler can move under.
///
/// `bounce_time` returns the first arrival of a Poisson process whose
/// intensity dominates `max(0, <grad U, v>)` along the ray. When the bound is
/// not tight, `acceptance` gives the thinning probability at the arrival.
pub trait BouncePotential {
    fn dim(&self) -> usize;
    fn energy(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
    fn bounce_time<R: Rng + ?Sized>(&self, w: &[f64], v: &[f64], rng: &mut R) -> Result<f64>;
    fn acceptance(&self, _w: &[f64], _v: &[f64]) -> f64 {
        1.0
    }
}

/// `kappa |w|^2 / 2`, with exact bounce times.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicGaussian {
    pub dim: usize,
    pub kappa: f64,
}

impl BouncePotential for IsotropicGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn energy(&self, w: &[f64]) -> f64 {
        0.5 * self.kappa * w.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        w.iter().map(|x| self.kappa * x).collect()
    }

    fn bounce_time<R: Rng + ?Sized>(&self, w: &[f64], v: &[f64], rng: &mut R) -> Result<f64> {
        let b = self.kappa * v.iter().map(|x| x * x).sum::<f64>();
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        let a = self.kappa * w.iter().zip(v).map(|(w, v)| w * v).sum::<f64>();
        solve_bounce_normal(a, b, sample_energy_gap(rng))
    }
}

/// Sum of factors: superposition of exact per-factor times, thinned by the
/// ratio of the total intensity to the sum of factor intensities.
impl BouncePotential for FactorGraph {
    fn dim(&self) -> usize {
        self.num_vars()
    }

    fn energy(&self, w: &[f64]) -> f64 {
        self.total_energy(w)
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.total_gradient(w)
    }

    fn bounce_time<R: Rng + ?Sized>(&self, w: &[f64], v: &[f64], rng: &mut R) -> Result<f64> {
        let mut best = f64::INFINITY;
        for f in self.factors() {
            let t = factor_bounce_time(f, |k| w[k], |k| v[k], sample_energy_gap(rng))?;
            best = best.min(t);
        }
        Ok(best)
    }

    fn acceptance(&self, w: &[f64], v: &[f64]) -> f64 {
        let mut bound = 0.0;
        for f in self.factors() {
            let d: f64 = f.gradient(|k| w[k]).iter().map(|&(k, g)| g * v[k]).sum();
            bound += d.max(0.0);
        }
        let total: f64 = self.total_gradient(w).iter().zip(v).map(|(g, v)| g * v).sum();
        if bound > 0.0 {
            (total.max(0.0) / bound).min(1.0)
        } else {
            0.0
        }
    }
}

/// Global BPS on `[0, t_end]` with full refreshment at rate `refresh_rate`.
pub fn bps_run_global<P: BouncePotential, R: Rng + ?Sized>(
    potential: &P,
    w0: &[f64],
    v0: &[f64],
    t_end: f64,
    refresh_rate: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let d = potential.dim();
    check_dim("initial position", d, w0.len())?;
    check_dim("initial velocity", d, v0.len())?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::arg(format!("trajectory length must be positive, got {t_end}")));
    }
    if !(refresh_rate >= 0.0 && refresh_rate.is_finite()) {
        return Err(Error::arg(format!("refresh rate must be non-negative, got {refresh_rate}")));
    }
    let refresh = (refresh_rate > 0.0).then(|| Exp::new(refresh_rate).expect("positive rate"));
    let mut w = w0.to_vec();
    let mut v = v0.to_vec();
    let mut traj = Trajectory::new(w0, v0);
    let mut t = 0.0;
    loop {
        let tau_bounce = potential.bounce_time(&w, &v, rng)?;
        let tau_ref = refresh.map_or(f64::INFINITY, |e| rng.sample(e));
        let tau = tau_bounce.min(tau_ref);
        if t + tau >= t_end {
            let rest = t_end - t;
            for k in 0..d {
                w[k] += v[k] * rest;
                traj.push(k, Triplet { w: w[k], v: v[k], t: t_end });
            }
            return Ok(traj);
        }
        t += tau;
        for k in 0..d {
            w[k] += v[k] * tau;
        }
        if tau_bounce <= tau_ref {
            let accept = potential.acceptance(&w, &v);
            if accept < 1.0 && rng.random::<f64>() >= accept {
                continue;
            }
            v = reflect(&v, &potential.gradient(&w))?;
        } else {
            for x in v.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
        }
        for k in 0..d {
            traj.push(k, Triplet { w: w[k], v: v[k], t });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorgraph::{Factor, FactorKind};
    use crate::ratematrix::SparseFeature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(traj: &Trajectory, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let rows = traj.discretize(n).unwrap();
        let d = traj.dim();
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
        let cov = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / n as f64)
                    .collect()
            })
            .collect();
        (mean, cov)
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = IsotropicGaussian { dim: 2, kappa: 1.0 };
        let traj = bps_run_global(&target, &[0.0, 0.0], &[1.0, 0.3], 20_000.0, 1.0, &mut rng).unwrap();
        let (mean, cov) = moments(&traj, 100_000);
        for i in 0..2 {
            assert!(mean[i].abs() < 0.05, "mean {mean:?}");
            assert!((cov[i][i] - 1.0).abs() < 0.1, "cov {cov:?}");
        }
        assert!(cov[0][1].abs() < 0.1);
    }

    #[test]
    fn zero_potential_only_refreshes() {
        let g = FactorGraph::new(2, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = bps_run_global(&g, &[0.0, 0.0], &[1.0, 1.0], 5.0, 2.0, &mut rng).unwrap();
        assert!(traj.triplets(0).len() > 2);
    }

    #[test]
    fn short_horizon_is_one_segment() {
        let target = IsotropicGaussian { dim: 1, kappa: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = bps_run_global(&target, &[-5.0], &[1.0], 1e-6, 1e-6, &mut rng).unwrap();
        assert_eq!(traj.triplets(0).len(), 2);
        assert_close!(traj.endpoint()[0], -5.0 + 1e-6, 1e-15);
    }

    #[test]
    fn factor_sum_with_thinning_matches_gaussian() {
        // Two factors on the same variable: kappa 0.5 each, joint precision 1.
        let f = |k| Factor::new(FactorKind::NormalPrior { coord: 0, kappa: 0.5 }, vec![k], SparseFeature::new()).unwrap();
        let g = FactorGraph::new(1, vec![f(0), f(0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let traj = bps_run_global(&g, &[0.0], &[1.0], 20_000.0, 1.0, &mut rng).unwrap();
        let (mean, cov) = moments(&traj, 100_000);
        assert!(mean[0].abs() < 0.05);
        assert!((cov[0][0] - 1.0).abs() < 0.1, "variance {}", cov[0][0]);
    }
}
