//! Local BPS over a factor graph.
//!
//! Each factor holds one candidate bounce time in a priority queue. Positions
//! are stored lazily as `w_k + v_k (t - t_k)`; only variables touched by an
//! event are advanced. Refreshment runs on its own Poisson clock and resamples
//! the velocities of one uniformly chosen factor.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::Serialize;

use super::queue::EventQueue;
use super::solvers::{factor_bounce_time, reflect, sample_energy_gap};
use super::trajectory::{Trajectory, Triplet};
use crate::error::{check_dim, Error, Result};
use crate::factorgraph::FactorGraph;

/// Relative slack when checking that a popped bounce has positive intensity.
const INTENSITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbpsConfig {
    pub trajectory_length: f64,
    pub refresh_rate: f64,
    /// Keep every triplet. When false only the start and end of each variable
    /// are kept, so only the endpoint of the trajectory is meaningful.
    pub record_trajectory: bool,
}

impl Default for LbpsConfig {
    fn default() -> Self {
        LbpsConfig { trajectory_length: 0.1, refresh_rate: 1.0, record_trajectory: false }
    }
}

/// Cost counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounters {
    pub collisions: u64,
    pub refreshments: u64,
    /// Bounce times computed, initial scheduling included.
    pub recomputations: u64,
    /// Bounce times computed in response to collisions.
    pub collision_recomputations: u64,
    pub max_recomputations_per_event: u64,
    pub queue_pushes: u64,
    pub queue_pops: u64,
    pub stale_pops: u64,
}

impl EventCounters {
    pub fn merge(&mut self, other: &EventCounters) {
        self.collisions += other.collisions;
        self.refreshments += other.refreshments;
        self.recomputations += other.recomputations;
        self.collision_recomputations += other.collision_recomputations;
        self.max_recomputations_per_event = self.max_recomputations_per_event.max(other.max_recomputations_per_event);
        self.queue_pushes += other.queue_pushes;
        self.queue_pops += other.queue_pops;
        self.stale_pops += other.stale_pops;
    }

    pub fn recomputations_per_collision(&self) -> f64 {
        if self.collisions == 0 {
            0.0
        } else {
            self.collision_recomputations as f64 / self.collisions as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LbpsEvent {
    Collision { factor: usize, time: f64, recomputed: usize },
    Refresh { factor: usize, time: f64, recomputed: usize },
}

/// Step-wise LBPS run; [`lbps_run`] drives it to the end.
#[derive(Debug)]
pub struct LbpsEngine<'g> {
    graph: &'g FactorGraph,
    pos: Vec<f64>,
    vel: Vec<f64>,
    last: Vec<f64>,
    t: f64,
    end: f64,
    refresh_rate: f64,
    next_refresh: f64,
    queue: EventQueue,
    traj: Trajectory,
    record: bool,
    counters: EventCounters,
    finished: bool,
}

impl<'g> LbpsEngine<'g> {
    pub fn new<R: Rng + ?Sized>(
        graph: &'g FactorGraph,
        w0: &[f64],
        v0: &[f64],
        config: &LbpsConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let p = graph.num_vars();
        check_dim("initial position", p, w0.len())?;
        check_dim("initial velocity", p, v0.len())?;
        if w0.iter().chain(v0).any(|x| !x.is_finite()) {
            return Err(Error::arg("initial position and velocity must be finite"));
        }
        if !(config.trajectory_length > 0.0 && config.trajectory_length.is_finite()) {
            return Err(Error::arg(format!("trajectory length must be positive, got {}", config.trajectory_length)));
        }
        if !(config.refresh_rate >= 0.0 && config.refresh_rate.is_finite()) {
            return Err(Error::arg(format!("refresh rate must be non-negative, got {}", config.refresh_rate)));
        }
        let mut engine = LbpsEngine {
            graph,
            pos: w0.to_vec(),
            vel: v0.to_vec(),
            last: vec![0.0; p],
            t: 0.0,
            end: config.trajectory_length,
            refresh_rate: config.refresh_rate,
            next_refresh: f64::INFINITY,
            queue: EventQueue::new(graph.num_factors()),
            traj: Trajectory::new(w0, v0),
            record: config.record_trajectory,
            counters: EventCounters::default(),
            finished: false,
        };
        engine.next_refresh = engine.refresh_after(0.0, rng);
        for f in 0..graph.num_factors() {
            engine.reschedule(f, rng)?;
        }
        Ok(engine)
    }

    fn refresh_after<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        if self.refresh_rate > 0.0 {
            t + rng.sample(Exp::new(self.refresh_rate).expect("positive rate"))
        } else {
            f64::INFINITY
        }
    }

    /// Current global time.
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Position of variable `k` at the current time.
    pub fn position(&self, k: usize) -> f64 {
        self.pos[k] + self.vel[k] * (self.t - self.last[k])
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.pos.len()).map(|k| self.position(k)).collect()
    }

    pub fn velocities(&self) -> &[f64] {
        &self.vel
    }

    /// Candidate bounce time of every factor (infinite when none).
    pub fn scheduled_times(&self) -> &[f64] {
        self.queue.scheduled()
    }

    pub fn counters(&self) -> EventCounters {
        let mut c = self.counters;
        c.queue_pushes = self.queue.pushes;
        c.queue_pops = self.queue.pops;
        c.stale_pops = self.queue.stale_pops;
        c
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn reschedule<R: Rng + ?Sized>(&mut self, f: usize, rng: &mut R) -> Result<()> {
        let factor = &self.graph.factors()[f];
        let c = sample_energy_gap(rng);
        let dt = factor_bounce_time(factor, |k| self.position(k), |k| self.vel[k], c)?;
        self.queue.schedule(f, self.t + dt);
        self.counters.recomputations += 1;
        Ok(())
    }

    fn advance(&mut self, k: usize) {
        self.pos[k] = self.position(k);
        self.last[k] = self.t;
    }

    fn record(&mut self, k: usize) {
        let triplet = Triplet { w: self.pos[k], v: self.vel[k], t: self.t };
        if self.record {
            self.traj.push(k, triplet);
        } else {
            self.traj.set_latest(k, triplet);
        }
    }

    fn reschedule_neighbourhood<R: Rng + ?Sized>(&mut self, f: usize, rng: &mut R) -> Result<usize> {
        let graph = self.graph;
        let ext = graph.ext_factors_unchecked(f);
        for &g in ext {
            self.reschedule(g, rng)?;
        }
        let n = ext.len() as u64;
        self.counters.max_recomputations_per_event = self.counters.max_recomputations_per_event.max(n);
        Ok(ext.len())
    }

    /// Processes the next event. Returns `None` once the run has reached its end
    /// time, after flushing every variable there.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<LbpsEvent>> {
        if self.finished {
            return Ok(None);
        }
        let bounce = self.queue.peek();
        let bounce_time = bounce.map_or(f64::INFINITY, |(t, _)| t);
        let next = bounce_time.min(self.next_refresh);
        if next >= self.end {
            self.t = self.end;
            for k in 0..self.pos.len() {
                self.advance(k);
                self.record(k);
            }
            self.finished = true;
            return Ok(None);
        }

        let graph = self.graph;
        if bounce_time <= self.next_refresh {
            let (time, f) = self.queue.pop().expect("peeked entry");
            self.t = time;
            for &k in graph.ext_vars_unchecked(f) {
                self.advance(k);
            }
            let factor = &graph.factors()[f];
            let grad = factor.gradient(|k| self.pos[k]);
            let gv: f64 = grad.iter().map(|&(k, g)| g * self.vel[k]).sum();
            let scale = grad.iter().map(|&(k, g)| (g * self.vel[k]).abs()).sum::<f64>();
            if gv < -INTENSITY_TOLERANCE * scale || (gv <= 0.0 && scale == 0.0) {
                return Err(Error::Internal(format!(
                    "factor {f} ({}) bounced at t = {time} with intensity {gv}",
                    factor.kind.label()
                )));
            }
            let g: Vec<f64> = grad.iter().map(|&(_, g)| g).collect();
            let v: Vec<f64> = grad.iter().map(|&(k, _)| self.vel[k]).collect();
            let reflected = reflect(&v, &g).map_err(|e| Error::Internal(format!("factor {f}: {e}")))?;
            for (&(k, _), v) in grad.iter().zip(reflected) {
                self.vel[k] = v;
            }
            for &k in graph.ext_vars_unchecked(f) {
                self.record(k);
            }
            self.counters.collisions += 1;
            let n = self.reschedule_neighbourhood(f, rng)?;
            self.counters.collision_recomputations += n as u64;
            Ok(Some(LbpsEvent::Collision { factor: f, time, recomputed: n }))
        } else {
            let time = self.next_refresh;
            self.t = time;
            self.next_refresh = self.refresh_after(time, rng);
            self.counters.refreshments += 1;
            if graph.num_factors() == 0 {
                return Ok(Some(LbpsEvent::Refresh { factor: usize::MAX, time, recomputed: 0 }));
            }
            let f = rng.random_range(0..graph.num_factors());
            for &k in &graph.factors()[f].vars {
                self.advance(k);
                self.vel[k] = rng.sample(StandardNormal);
                self.record(k);
            }
            let n = self.reschedule_neighbourhood(f, rng)?;
            Ok(Some(LbpsEvent::Refresh { factor: f, time, recomputed: n }))
        }
    }

    /// Runs to the end time.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        while self.step(rng)?.is_some() {}
        Ok(())
    }

    pub fn into_parts(self) -> (Trajectory, EventCounters) {
        let counters = self.counters();
        (self.traj, counters)
    }
}

/// Runs LBPS for `config.trajectory_length` from `w0` with velocities `v0`.
pub fn lbps_run<R: Rng + ?Sized>(
    graph: &FactorGraph,
    w0: &[f64],
    v0: &[f64],
    config: &LbpsConfig,
    rng: &mut R,
) -> Result<(Trajectory, EventCounters)> {
    let mut engine = LbpsEngine::new(graph, w0, v0, config, rng)?;
    engine.run(rng)?;
    Ok(engine.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorgraph::{Factor, FactorKind};
    use crate::ratematrix::SparseFeature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn priors(p: usize, kappa: f64) -> FactorGraph {
        let factors = (0..p)
            .map(|k| Factor::new(FactorKind::NormalPrior { coord: k, kappa }, vec![k], SparseFeature::new()).unwrap())
            .collect();
        FactorGraph::new(p, factors).unwrap()
    }

    #[test]
    fn prior_only_graph_has_unit_variance() {
        let g = priors(2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = LbpsConfig { trajectory_length: 20_000.0, refresh_rate: 1.0, record_trajectory: true };
        let (traj, counters) = lbps_run(&g, &[0.0, 0.0], &[1.0, 1.0], &cfg, &mut rng).unwrap();
        let rows = traj.discretize(100_000).unwrap();
        for k in 0..2 {
            let m = rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
            let v = rows.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / rows.len() as f64;
            assert!((v - 1.0).abs() < 0.1, "variance {v}");
            assert!(m.abs() < 0.1, "mean {m}");
        }
        assert!(counters.collisions > 0 && counters.refreshments > 0);
        assert!(counters.max_recomputations_per_event <= 1);
    }

    #[test]
    fn disconnected_components_do_not_interact() {
        let g = priors(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = LbpsConfig { trajectory_length: 50.0, refresh_rate: 0.5, record_trajectory: false };
        let mut e = LbpsEngine::new(&g, &[0.3, -0.2, 1.0], &[1.0, -1.0, 0.5], &cfg, &mut rng).unwrap();
        loop {
            let before = e.scheduled_times().to_vec();
            match e.step(&mut rng).unwrap() {
                None => break,
                Some(LbpsEvent::Collision { factor, .. }) | Some(LbpsEvent::Refresh { factor, .. }) => {
                    for (f, (a, b)) in before.iter().zip(e.scheduled_times()).enumerate() {
                        if f != factor {
                            assert_eq!(a.to_bits(), b.to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn no_factors_moves_in_straight_lines() {
        let g = FactorGraph::new(2, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = LbpsConfig { trajectory_length: 2.0, refresh_rate: 0.0, record_trajectory: true };
        let (traj, c) = lbps_run(&g, &[1.0, 2.0], &[0.5, -1.0], &cfg, &mut rng).unwrap();
        assert_eq!(traj.endpoint(), vec![2.0, 0.0]);
        assert_eq!(c.collisions, 0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let g = priors(2, 1.0);
        let cfg = LbpsConfig { trajectory_length: 10.0, refresh_rate: 1.0, record_trajectory: true };
        let a = lbps_run(&g, &[0.0, 1.0], &[1.0, 0.0], &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = lbps_run(&g, &[0.0, 1.0], &[1.0, 0.0], &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let g = priors(1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = LbpsConfig { trajectory_length: 0.0, ..Default::default() };
        assert!(LbpsEngine::new(&g, &[0.0], &[1.0], &bad, &mut rng).is_err());
        assert!(LbpsEngine::new(&g, &[0.0, 1.0], &[1.0], &LbpsConfig::default(), &mut rng).is_err());
    }
}
