//! The LBPS-HMC sampler and the HMC-only benchmark.
//!
//! One iteration of either kernel augments every observed segment under the
//! current rate matrix, then updates the weights given the sufficient
//! statistics. LBPS-HMC moves `wu` by one HMC trajectory with the exchangeable
//! parameters held fixed, then moves `wb` by an LBPS run of fixed length on the
//! sparse factor graph. HMC-only moves all of `w` by one HMC trajectory.

use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bps::{lbps_run, EventCounters, LbpsConfig};
use crate::error::{Error, Result};
use crate::factorgraph::{build_posterior_graph, Factor, FactorGraph, FactorKind, Scheme};
use crate::hmc::{grad_full, grad_wu, hmc_step, potential_full, potential_wu, HmcConfig};
use crate::paths::{augment_dataset, ObservedSeries, SuffStats};
use crate::ratematrix::{build_rate_matrix, exchangeable_params, stationary_dist, FeatureSet, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    LbpsHmc,
    HmcOnly,
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lbps_hmc" | "lbps" => Ok(Kernel::LbpsHmc),
            "hmc_only" | "hmc" => Ok(Kernel::HmcOnly),
            other => Err(Error::arg(format!("unknown kernel '{other}' (expected lbps_hmc or hmc)"))),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kernel::LbpsHmc => "lbps_hmc",
            Kernel::HmcOnly => "hmc_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: Kernel,
    pub iterations: usize,
    /// LBPS trajectory length per iteration.
    pub trajectory_length: f64,
    pub refresh_rate: f64,
    pub hmc: HmcConfig,
    pub kappa: f64,
    /// Fraction of samples discarded by downstream summaries.
    pub burn_in: f64,
    pub seed: u64,
    /// Keep every `thin`-th iteration.
    pub thin: usize,
    /// Multiplies every gradient the kernels see. Anything but 1 breaks the
    /// sampler; it exists to check that the invariance test catches it.
    pub gradient_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: Kernel::LbpsHmc,
            iterations: 1000,
            trajectory_length: 0.1,
            refresh_rate: 1.0,
            hmc: HmcConfig::default(),
            kappa: 1.0,
            burn_in: 0.3,
            seed: 0,
            thin: 1,
            gradient_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::arg("iterations must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::arg(format!("burn-in fraction must be in [0, 1), got {}", self.burn_in)));
        }
        if self.kernel == Kernel::LbpsHmc && !(self.trajectory_length > 0.0 && self.trajectory_length.is_finite()) {
            return Err(Error::arg(format!("trajectory length must be positive, got {}", self.trajectory_length)));
        }
        if !(self.refresh_rate >= 0.0 && self.refresh_rate.is_finite()) {
            return Err(Error::arg(format!("refresh rate must be non-negative, got {}", self.refresh_rate)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::arg(format!("prior precision must be positive, got {}", self.kappa)));
        }
        if self.thin == 0 {
            return Err(Error::arg("thinning must be at least 1"));
        }
        if !(self.gradient_scale > 0.0 && self.gradient_scale.is_finite()) {
            return Err(Error::arg("gradient scale must be positive"));
        }
        self.hmc.validate()
    }

    fn lbps(&self) -> LbpsConfig {
        LbpsConfig {
            trajectory_length: self.trajectory_length,
            refresh_rate: self.refresh_rate,
            record_trajectory: false,
        }
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub augmentation: f64,
    pub hmc: f64,
    pub lbps: f64,
    pub total: f64,
}

impl PhaseTimes {
    fn add(&mut self, other: &PhaseTimes) {
        self.augmentation += other.augmentation;
        self.hmc += other.hmc;
        self.lbps += other.lbps;
        self.total += other.total;
    }
}

/// Result of one kernel application.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub weights: WeightVector,
    pub stats: SuffStats,
    pub hmc_accepted: bool,
    pub counters: EventCounters,
    pub times: PhaseTimes,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn check_finite(w: &WeightVector) -> Result<()> {
    if w.wu.iter().chain(&w.wb).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite weights: wu = {:?}, wb = {:?}", w.wu, w.wb)))
    }
}

fn augment<R: Rng + ?Sized>(
    w: &WeightVector,
    data: &[ObservedSeries],
    features: &FeatureSet,
    rng: &mut R,
) -> Result<SuffStats> {
    let rate = build_rate_matrix(w, features)?;
    augment_dataset(data, &rate, rng)
}

/// Multiplies every factor energy by `s`, which scales the whole gradient.
fn scale_graph(graph: FactorGraph, s: f64) -> Result<FactorGraph> {
    if s == 1.0 {
        return Ok(graph);
    }
    let p = graph.num_vars();
    let factors = graph
        .factors()
        .iter()
        .map(|f| {
            let kind = match f.kind {
                FactorKind::NormalPrior { coord, kappa } => FactorKind::NormalPrior { coord, kappa: kappa * s },
                FactorKind::Sojourn { from, to, h, pi_to } => FactorKind::Sojourn { from, to, h: h * s, pi_to },
                FactorKind::TransitionCount { from, to, count, log_pi_to } => {
                    FactorKind::TransitionCount { from, to, count: count * s, log_pi_to }
                }
                FactorKind::InitialCount { state, count } => FactorKind::InitialCount { state, count: count * s },
            };
            Factor::new(kind, f.vars.clone(), f.phi.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    FactorGraph::new(p, factors)
}

/// Moves `wu` by HMC given fixed statistics and exchangeable parameters, then
/// `wb` by LBPS. Returns the new weights, the HMC outcome and LBPS counters.
pub fn lbps_hmc_update<R: Rng + ?Sized>(
    w_prev: &WeightVector,
    z: &SuffStats,
    features: &FeatureSet,
    config: &RunConfig,
    rng: &mut R,
) -> Result<(WeightVector, bool, EventCounters, f64, f64)> {
    let kappa = w_prev.kappa;
    let scale = config.gradient_scale;
    let start = Instant::now();
    let theta = exchangeable_params(&w_prev.wb, features)?;
    let step = hmc_step(
        |wu| potential_wu(z, wu, &theta, features, kappa),
        |wu| Ok(grad_wu(z, wu, &theta, features, kappa)?.into_iter().map(|g| g * scale).collect()),
        &w_prev.wu,
        &config.hmc,
        rng,
    )?;
    let hmc_time = secs(start.elapsed());

    let start = Instant::now();
    let pi = stationary_dist(&step.position, features)?;
    let graph = build_posterior_graph(z, features, &pi, kappa, Scheme::Combined)?;
    let graph = scale_graph(graph, scale)?;
    let v0: Vec<f64> = (0..w_prev.wb.len()).map(|_| rng.sample(StandardNormal)).collect();
    let (traj, counters) = lbps_run(&graph, &w_prev.wb, &v0, &config.lbps(), rng)?;
    let lbps_time = secs(start.elapsed());

    let w = WeightVector { wu: step.position, wb: traj.endpoint(), kappa };
    check_finite(&w)?;
    Ok((w, step.accepted, counters, hmc_time, lbps_time))
}

/// One HMC trajectory on the full weight vector given fixed statistics.
pub fn hmc_only_update<R: Rng + ?Sized>(
    w_prev: &WeightVector,
    z: &SuffStats,
    features: &FeatureSet,
    config: &RunConfig,
    rng: &mut R,
) -> Result<(WeightVector, bool)> {
    let (p1, kappa, scale) = (features.p1(), w_prev.kappa, config.gradient_scale);
    let step = hmc_step(
        |q| potential_full(z, &WeightVector::from_flat(q, p1, kappa), features),
        |q| {
            Ok(grad_full(z, &WeightVector::from_flat(q, p1, kappa), features)?
                .into_iter()
                .map(|g| g * scale)
                .collect())
        },
        &w_prev.to_flat(),
        &config.hmc,
        rng,
    )?;
    let w = WeightVector::from_flat(&step.position, p1, kappa);
    check_finite(&w)?;
    Ok((w, step.accepted))
}

/// Augmentation followed by the LBPS-HMC update.
pub fn lbps_hmc_iteration<R: Rng + ?Sized>(
    w_prev: &WeightVector,
    data: &[ObservedSeries],
    features: &FeatureSet,
    config: &RunConfig,
    rng: &mut R,
) -> Result<Iteration> {
    let t0 = Instant::now();
    let z = augment(w_prev, data, features, rng)?;
    let augmentation = secs(t0.elapsed());
    let (weights, hmc_accepted, counters, hmc, lbps) = lbps_hmc_update(w_prev, &z, features, config, rng)?;
    let times = PhaseTimes { augmentation, hmc, lbps, total: secs(t0.elapsed()) };
    Ok(Iteration { weights, stats: z, hmc_accepted, counters, times })
}

/// Augmentation followed by one HMC trajectory on all weights.
pub fn hmc_only_iteration<R: Rng + ?Sized>(
    w_prev: &WeightVector,
    data: &[ObservedSeries],
    features: &FeatureSet,
    config: &RunConfig,
    rng: &mut R,
) -> Result<Iteration> {
    let t0 = Instant::now();
    let z = augment(w_prev, data, features, rng)?;
    let augmentation = secs(t0.elapsed());
    let t1 = Instant::now();
    let (weights, hmc_accepted) = hmc_only_update(w_prev, &z, features, config, rng)?;
    let hmc = secs(t1.elapsed());
    let times = PhaseTimes { augmentation, hmc, lbps: 0.0, total: secs(t0.elapsed()) };
    Ok(Iteration { weights, stats: z, hmc_accepted, counters: EventCounters::default(), times })
}

pub fn kernel_iteration<R: Rng + ?Sized>(
    w_prev: &WeightVector,
    data: &[ObservedSeries],
    features: &FeatureSet,
    config: &RunConfig,
    rng: &mut R,
) -> Result<Iteration> {
    match config.kernel {
        Kernel::LbpsHmc => lbps_hmc_iteration(w_prev, data, features, config, rng),
        Kernel::HmcOnly => hmc_only_iteration(w_prev, data, features, config, rng),
    }
}

/// Standard normal initial weights.
pub fn initial_weights<R: Rng + ?Sized>(features: &FeatureSet, kappa: f64, rng: &mut R) -> WeightVector {
    let mut draw = |n: usize| (0..n).map(|_| rng.sample(StandardNormal)).collect();
    WeightVector { wu: draw(features.p1()), wb: draw(features.p2()), kappa }
}

/// Recorded output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainOutput {
    pub kernel: Kernel,
    pub p1: usize,
    pub p2: usize,
    /// Iteration number (1-based) of each retained sample.
    pub iterations: Vec<usize>,
    /// Retained weights, `wu` then `wb`.
    pub samples: Vec<Vec<f64>>,
    pub times: PhaseTimes,
    pub counters: EventCounters,
    pub hmc_accepted: u64,
    pub burn_in: f64,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weights(&self, i: usize) -> WeightVector {
        WeightVector::from_flat(&self.samples[i], self.p1, 1.0)
    }

    /// Index of the first sample kept after burn-in.
    pub fn burn_in_index(&self) -> usize {
        ((self.samples.len() as f64) * self.burn_in).floor() as usize
    }

    /// Exchangeable parameters of every retained sample, by pair rank.
    pub fn theta_samples(&self, features: &FeatureSet) -> Result<Vec<Vec<f64>>> {
        self.samples
            .iter()
            .map(|s| exchangeable_params(&s[self.p1..], features))
            .collect()
    }

    pub fn pi_samples(&self, features: &FeatureSet) -> Result<Vec<Vec<f64>>> {
        self.samples.iter().map(|s| stationary_dist(&s[..self.p1], features)).collect()
    }

    /// Post-burn-in mean of each exchangeable parameter.
    pub fn theta_means(&self, features: &FeatureSet) -> Result<Vec<f64>> {
        let theta = self.theta_samples(features)?;
        let kept = &theta[self.burn_in_index()..];
        if kept.is_empty() {
            return Err(Error::arg("no samples left after burn-in"));
        }
        let n = kept.len() as f64;
        Ok((0..features.p2()).map(|k| kept.iter().map(|t| t[k]).sum::<f64>() / n).collect())
    }
}

/// Runs one chain from standard normal initial weights.
pub fn run_chain(data: &[ObservedSeries], features: &FeatureSet, config: &RunConfig) -> Result<ChainOutput> {
    config.validate()?;
    for s in data {
        s.check_states(features.n_states())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = initial_weights(features, config.kappa, &mut rng);
    let mut out = ChainOutput {
        kernel: config.kernel,
        p1: features.p1(),
        p2: features.p2(),
        iterations: Vec::new(),
        samples: Vec::new(),
        times: PhaseTimes::default(),
        counters: EventCounters::default(),
        hmc_accepted: 0,
        burn_in: config.burn_in,
    };
    for it in 1..=config.iterations {
        let step = kernel_iteration(&w, data, features, config, &mut rng)?;
        out.times.add(&step.times);
        out.counters.merge(&step.counters);
        out.hmc_accepted += u64::from(step.hmc_accepted);
        w = step.weights;
        if it % config.thin == 0 {
            out.iterations.push(it);
            out.samples.push(w.to_flat());
        }
    }
    Ok(out)
}
