//! CTMC paths: simulation, discrete observation, sufficient statistics,
//! likelihoods, and end-point conditioned sampling by uniformization.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Open01};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::ratematrix::RateMatrix;

/// Cumulative Poisson mass after which the jump-count mixture is truncated.
const POISSON_TAIL: f64 = 1e-10;
/// Hard cap on the number of cached powers of the uniformized kernel.
const MAX_UNIFORMIZED_JUMPS: usize = 200_000;

/// A fully observed, right-continuous path on `[start_time, end_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPath {
    start_time: f64,
    end_time: f64,
    states: Vec<usize>,
    jump_times: Vec<f64>,
}

impl FullPath {
    pub fn new(start_time: f64, end_time: f64, states: Vec<usize>, jump_times: Vec<f64>) -> Result<Self> {
        if !(start_time.is_finite() && end_time.is_finite() && start_time <= end_time) {
            return Err(Error::arg(format!("invalid path interval [{start_time}, {end_time}]")));
        }
        if states.len() != jump_times.len() + 1 {
            return Err(Error::arg(format!(
                "path has {} states but {} jump times",
                states.len(),
                jump_times.len()
            )));
        }
        let mut prev = start_time;
        for &t in &jump_times {
            if !(t > prev && t < end_time) {
                return Err(Error::arg(format!("jump time {t} out of order or outside the interval")));
            }
            prev = t;
        }
        if states.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("consecutive path states must differ"));
        }
        Ok(FullPath { start_time, end_time, states, jump_times })
    }

    /// A jump-free path.
    pub fn constant(state: usize, start_time: f64, end_time: f64) -> Self {
        FullPath { start_time, end_time, states: vec![state], jump_times: Vec::new() }
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn num_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn first_state(&self) -> usize {
        self.states[0]
    }

    pub fn last_state(&self) -> usize {
        *self.states.last().expect("paths have at least one state")
    }

    /// State at time `t`; at a jump time this is the state entered.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k]
    }

    /// Time spent in each visited state, in visiting order.
    pub fn sojourns(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.states.len();
        (0..n).map(move |k| {
            let from = if k == 0 { self.start_time } else { self.jump_times[k - 1] };
            let to = if k + 1 == n { self.end_time } else { self.jump_times[k] };
            (self.states[k], to - from)
        })
    }
}

/// States recorded at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    times: Vec<f64>,
    states: Vec<usize>,
}

impl ObservedSeries {
    pub fn new(times: Vec<f64>, states: Vec<usize>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::arg("observed series must have at least one observation"));
        }
        check_dim("observation states", times.len(), states.len())?;
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::arg("observation times must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("observation times must be strictly increasing"));
        }
        Ok(ObservedSeries { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Consecutive `(from, to, delta)` triples.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..self.times.len()).map(move |k| {
            (self.states[k - 1], self.states[k], self.times[k] - self.times[k - 1])
        })
    }

    pub(crate) fn check_states(&self, n_states: usize) -> Result<()> {
        match self.states.iter().find(|&&s| s >= n_states) {
            Some(s) => Err(Error::arg(format!("state index {s} out of range for {n_states} states"))),
            None => Ok(()),
        }
    }
}

/// Initial counts `n`, sojourn times `h` and transition counts `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    n: Vec<u64>,
    h: Vec<f64>,
    c: Vec<u64>,
}

impl SuffStats {
    pub fn zeros(n_states: usize) -> Self {
        SuffStats { n: vec![0; n_states], h: vec![0.0; n_states], c: vec![0; n_states * n_states] }
    }

    pub fn from_parts(n: Vec<u64>, h: Vec<f64>, c: Vec<u64>) -> Result<Self> {
        let s = n.len();
        check_dim("sojourn times", s, h.len())?;
        check_dim("transition counts", s * s, c.len())?;
        if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg("sojourn times must be finite and non-negative"));
        }
        if (0..s).any(|x| c[x * s + x] != 0) {
            return Err(Error::arg("self-transition counts must be zero"));
        }
        Ok(SuffStats { n, h, c })
    }

    pub fn n_states(&self) -> usize {
        self.n.len()
    }

    pub fn initial_counts(&self) -> &[u64] {
        &self.n
    }

    pub fn sojourn_times(&self) -> &[f64] {
        &self.h
    }

    pub fn n(&self, x: usize) -> u64 {
        self.n[x]
    }

    pub fn h(&self, x: usize) -> f64 {
        self.h[x]
    }

    pub fn c(&self, x: usize, y: usize) -> u64 {
        self.c[x * self.n.len() + y]
    }

    pub fn num_paths(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn total_time(&self) -> f64 {
        self.h.iter().sum()
    }

    pub fn total_transitions(&self) -> u64 {
        self.c.iter().sum()
    }

    /// Adds a whole path, counting its initial state.
    pub fn add_path(&mut self, path: &FullPath) {
        self.n[path.first_state()] += 1;
        self.add_segment(path);
    }

    /// Adds sojourns and transitions of a path without counting its start.
    pub fn add_segment(&mut self, path: &FullPath) {
        let s = self.n.len();
        for (x, dt) in path.sojourns() {
            self.h[x] += dt;
        }
        for w in path.states.windows(2) {
            self.c[w[0] * s + w[1]] += 1;
        }
    }

    pub fn merge(&mut self, other: &SuffStats) {
        for (a, b) in self.n.iter_mut().zip(&other.n) {
            *a += b;
        }
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            *a += b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
    }
}

fn check_distribution(initial: &[f64], n_states: usize) -> Result<()> {
    check_dim("initial distribution", n_states, initial.len())?;
    if initial.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::arg("initial distribution entries must be finite and non-negative"));
    }
    if (initial.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
        return Err(Error::arg("initial distribution must sum to one"));
    }
    Ok(())
}

/// Exact (Gillespie) simulation on `[0, t_end]`.
pub fn simulate_path<R: Rng + ?Sized>(
    rate: &RateMatrix,
    initial: &[f64],
    t_end: f64,
    rng: &mut R,
) -> Result<FullPath> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::arg(format!("path length must be positive, got {t_end}")));
    }
    let s = rate.n_states();
    check_distribution(initial, s)?;
    let start = WeightedIndex::new(initial).map_err(|e| Error::arg(e.to_string()))?;
    let mut x = start.sample(rng);
    let mut states = vec![x];
    let mut jump_times = Vec::new();
    let mut t = 0.0;
    loop {
        let exit = -rate.rate(x, x);
        if exit <= 0.0 {
            break;
        }
        t += Exp::new(exit).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
        if t >= t_end {
            break;
        }
        let weights: Vec<f64> = (0..s).map(|y| if y == x { 0.0 } else { rate.rate(x, y) }).collect();
        x = WeightedIndex::new(&weights).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
        states.push(x);
        jump_times.push(t);
    }
    Ok(FullPath { start_time: 0.0, end_time: t_end, states, jump_times })
}

/// Records the path state at `start, start + mesh, ...` and always at the end time.
pub fn observe(path: &FullPath, mesh: f64) -> Result<ObservedSeries> {
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::arg(format!("observation mesh must be positive, got {mesh}")));
    }
    let (t0, t1) = (path.start_time, path.end_time);
    let snap = 1e-9 * mesh;
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t0 + k as f64 * mesh;
        if t >= t1 - snap {
            break;
        }
        times.push(t);
        k += 1;
    }
    if times.is_empty() || t1 > *times.last().unwrap() {
        times.push(t1);
    }
    let states = times.iter().map(|&t| path.state_at(t)).collect();
    Ok(ObservedSeries { times, states })
}

pub fn sufficient_stats(paths: &[FullPath], n_states: usize) -> Result<SuffStats> {
    let mut z = SuffStats::zeros(n_states);
    for p in paths {
        if let Some(&bad) = p.states.iter().find(|&&x| x >= n_states) {
            return Err(Error::arg(format!("state index {bad} out of range for {n_states} states")));
        }
        z.add_path(p);
    }
    Ok(z)
}

/// `sum n_x log rho_x + sum c_{xy} log q_{xy} + sum h_x q_{xx}`.
pub fn log_density_full(z: &SuffStats, rate: &RateMatrix, initial: &[f64]) -> Result<f64> {
    let s = rate.n_states();
    check_dim("sufficient statistics", s, z.n_states())?;
    check_dim("initial distribution", s, initial.len())?;
    let mut total = 0.0;
    for x in 0..s {
        if z.n(x) > 0 {
            total += z.n(x) as f64 * initial[x].ln();
        }
        total += z.h(x) * rate.rate(x, x);
        for y in 0..s {
            if y != x && z.c(x, y) > 0 {
                total += z.c(x, y) as f64 * rate.rate(x, y).ln();
            }
        }
    }
    Ok(total)
}

/// `log rho(y_0) + sum_k log [exp(Q delta_k)]_{y_{k-1}, y_k}`.
pub fn log_density_partial(series: &ObservedSeries, rate: &RateMatrix, initial: &[f64]) -> Result<f64> {
    let s = rate.n_states();
    check_dim("initial distribution", s, initial.len())?;
    series.check_states(s)?;
    let prop = rate.propagator();
    let mut total = initial[series.states[0]].ln();
    for (a, b, delta) in series.segments() {
        total += prop.transition(delta)?[(a, b)].ln();
    }
    Ok(total)
}

/// End-point conditioned path sampler for one generator.
///
/// Holds `B = I + Q / Omega` and its powers. The powers are shared by every
/// segment sampled with this sampler, which is how a sampler iteration reuses
/// work across segments.
#[derive(Debug, Clone)]
pub struct EndpointSampler {
    omega: f64,
    powers: Vec<DMatrix<f64>>,
}

impl EndpointSampler {
    /// Prepares powers of the uniformized kernel for intervals up to `max_delta`.
    pub fn new(rate: &RateMatrix, max_delta: f64) -> Result<Self> {
        let s = rate.n_states();
        let omega = rate.max_exit_rate();
        let mut sampler = EndpointSampler { omega, powers: vec![DMatrix::identity(s, s)] };
        if omega > 0.0 {
            sampler.powers.push(DMatrix::identity(s, s) + rate.q() / omega);
            let needed = sampler.max_jumps(max_delta.max(0.0))?;
            sampler.extend_to(needed);
        }
        Ok(sampler)
    }

    /// Uniformization rate `max_x |q_xx|`.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn cached_powers(&self) -> usize {
        self.powers.len()
    }

    fn extend_to(&mut self, n: usize) {
        while self.powers.len() <= n {
            let next = &self.powers[self.powers.len() - 1] * &self.powers[1];
            self.powers.push(next);
        }
    }

    /// Smallest `n` with Poisson(`omega delta`) CDF above `1 - 1e-10`.
    fn max_jumps(&self, delta: f64) -> Result<usize> {
        let lambda = self.omega * delta;
        if lambda == 0.0 {
            return Ok(0);
        }
        let mut log_p = -lambda;
        let mut cdf = log_p.exp();
        let mut n = 0usize;
        // Past the mode the pmf is decreasing, so the remaining tail is small once
        // the summed mass is close to one (computed in log space for large lambda).
        while cdf < 1.0 - POISSON_TAIL {
            n += 1;
            if n > MAX_UNIFORMIZED_JUMPS {
                return Err(Error::Numerical(format!(
                    "uniformization needs more than {MAX_UNIFORMIZED_JUMPS} jumps (omega * delta = {lambda})"
                )));
            }
            log_p += lambda.ln() - (n as f64).ln();
            cdf += log_p.exp();
        }
        Ok(n)
    }

    /// Draws a path on `[0, delta]` with `X(0) = a` and `X(delta) = b`.
    pub fn sample<R: Rng + ?Sized>(&self, a: usize, b: usize, delta: f64, rng: &mut R) -> Result<FullPath> {
        let s = self.powers[0].nrows();
        if a >= s || b >= s {
            return Err(Error::arg(format!("end points ({a}, {b}) out of range for {s} states")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::arg(format!("interval must be finite and >= 0, got {delta}")));
        }
        if delta == 0.0 || self.omega == 0.0 {
            return if a == b {
                Ok(FullPath::constant(a, 0.0, delta))
            } else if delta == 0.0 {
                Err(Error::pre("zero-length interval with distinct end points"))
            } else {
                Err(Error::pre("generator has no dynamics but end points differ"))
            };
        }

        let n_max = self.max_jumps(delta)?;
        let extended;
        let powers = if n_max < self.powers.len() {
            &self.powers
        } else {
            let mut more = self.clone();
            more.extend_to(n_max);
            extended = more.powers;
            &extended
        };

        let lambda = self.omega * delta;
        let mut weights = Vec::with_capacity(n_max + 1);
        let mut log_p = -lambda;
        for n in 0..=n_max {
            if n > 0 {
                log_p += lambda.ln() - (n as f64).ln();
            }
            weights.push(log_p.exp() * powers[n][(a, b)]);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::pre(format!(
                "end point {b} unreachable from {a} in time {delta}"
            )));
        }
        let mut u = rng.random::<f64>() * total;
        let mut n_jumps = n_max;
        for (n, &w) in weights.iter().enumerate() {
            if u < w {
                n_jumps = n;
                break;
            }
            u -= w;
        }
        while weights[n_jumps] == 0.0 {
            // Only reachable through rounding in the subtraction above.
            n_jumps -= 1;
        }

        // Forward bridge: P(x_k = y | x_{k-1} = x, x_n = b) ∝ B_{xy} (B^{n-k})_{yb}.
        let kernel = &powers[1];
        let mut chain = Vec::with_capacity(n_jumps + 1);
        chain.push(a);
        let mut x = a;
        let mut probs = vec![0.0; s];
        for k in 1..n_jumps {
            let rest = &powers[n_jumps - k];
            for (y, p) in probs.iter_mut().enumerate() {
                *p = kernel[(x, y)] * rest[(y, b)];
            }
            x = WeightedIndex::new(&probs)
                .map_err(|e| Error::Numerical(format!("bridge step {k}: {e}")))?
                .sample(rng);
            chain.push(x);
        }
        if n_jumps > 0 {
            chain.push(b);
        }

        let times = loop {
            let mut t: Vec<f64> = (0..n_jumps).map(|_| rng.sample::<f64, _>(Open01) * delta).collect();
            t.sort_by(f64::total_cmp);
            if t.windows(2).all(|w| w[0] < w[1]) && t.last().is_none_or(|&v| v < delta) {
                break t;
            }
        };

        let mut states = vec![a];
        let mut jump_times = Vec::new();
        for k in 1..chain.len() {
            if chain[k] != chain[k - 1] {
                states.push(chain[k]);
                jump_times.push(times[k - 1]);
            }
        }
        debug_assert_eq!(*states.last().unwrap(), b);
        Ok(FullPath { start_time: 0.0, end_time: delta, states, jump_times })
    }
}

/// One-shot end-point conditioned sample.
pub fn endpoint_sample<R: Rng + ?Sized>(
    rate: &RateMatrix,
    a: usize,
    b: usize,
    delta: f64,
    rng: &mut R,
) -> Result<FullPath> {
    EndpointSampler::new(rate, delta)?.sample(a, b, delta, rng)
}

/// Deterministic random stream for one numbered unit of work.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Augments every inter-observation segment and aggregates the statistics.
///
/// Segments are sampled in parallel; segment `k` (numbered across all series
/// in order) uses its own stream keyed by a seed drawn from `rng`, so results
/// do not depend on the thread count.
pub fn augment_dataset<R: Rng + ?Sized>(
    series: &[ObservedSeries],
    rate: &RateMatrix,
    rng: &mut R,
) -> Result<SuffStats> {
    let s = rate.n_states();
    let mut max_delta: f64 = 0.0;
    let mut jobs = Vec::new();
    let mut z = SuffStats::zeros(s);
    for (i, ser) in series.iter().enumerate() {
        ser.check_states(s)?;
        z.n[ser.states[0]] += 1;
        for (k, (a, b, delta)) in ser.segments().enumerate() {
            max_delta = max_delta.max(delta);
            jobs.push((i, k, a, b, delta));
        }
    }
    let sampler = EndpointSampler::new(rate, max_delta)?;
    let seed: u64 = rng.random();
    let parts: Vec<Result<FullPath>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(i, k, a, b, delta))| {
            let mut r = stream_rng(seed, j as u64);
            sampler.sample(a, b, delta, &mut r).map_err(|e| Error::Augmentation {
                series: i,
                segment: k,
                source: Box::new(e),
            })
        })
        .collect();
    for part in parts {
        z.add_segment(&part?);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratematrix::RateMatrix;
    use nalgebra::dmatrix;

    fn two_state(a: f64, b: f64) -> RateMatrix {
        RateMatrix::from_generator(dmatrix![-a, a; b, -b]).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn path_validation() {
        assert!(FullPath::new(0.0, 1.0, vec![0, 1], vec![0.5]).is_ok());
        assert!(FullPath::new(0.0, 1.0, vec![0, 0], vec![0.5]).is_err());
        assert!(FullPath::new(0.0, 1.0, vec![0, 1], vec![1.0]).is_err());
        assert!(FullPath::new(0.0, 1.0, vec![0, 1, 0], vec![0.6, 0.5]).is_err());
        assert!(FullPath::new(0.0, 1.0, vec![0], vec![0.5]).is_err());
    }

    #[test]
    fn hand_counted_stats() {
        let p = FullPath::new(0.0, 1.0, vec![0, 1, 0], vec![0.3, 0.7]).unwrap();
        let z = sufficient_stats(&[p.clone()], 2).unwrap();
        assert_close!(z.h(0), 0.6, 1e-12);
        assert_close!(z.h(1), 0.4, 1e-12);
        assert_eq!((z.c(0, 1), z.c(1, 0), z.n(0)), (1, 1, 1));
        let z2 = sufficient_stats(&[p.clone(), p], 2).unwrap();
        assert_eq!(z2.c(0, 1), 2);
        assert_close!(z2.h(0), 1.2, 1e-12);
    }

    #[test]
    fn jump_free_stats_and_density() {
        let p = FullPath::constant(0, 0.0, 2.5);
        let z = sufficient_stats(&[p], 2).unwrap();
        assert_eq!((z.n(0), z.total_transitions()), (1, 0));
        assert_close!(z.h(0), 2.5, 0.0);
        let q = two_state(1.0, 1.0);
        let ld = log_density_full(&z, &q, &[0.5, 0.5]).unwrap();
        assert_close!(ld, 0.5f64.ln() - 2.5, 1e-12);
        assert_eq!(log_density_full(&SuffStats::zeros(2), &q, &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn impossible_transition_is_minus_infinity() {
        let q = RateMatrix::from_generator(dmatrix![-1.0, 1.0, 0.0; 0.0, -1.0, 1.0; 1.0, 0.0, -1.0]).unwrap();
        let z = SuffStats::from_parts(vec![1, 0, 0], vec![1.0, 0.0, 0.0], vec![0, 0, 1, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(log_density_full(&z, &q, &[1.0, 0.0, 0.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn partial_density_closed_form() {
        let q = two_state(1.0, 1.0);
        let s = ObservedSeries::new(vec![0.0, 0.7], vec![1, 1]).unwrap();
        let ld = log_density_partial(&s, &q, &[0.5, 0.5]).unwrap();
        let expect = 0.5f64.ln() + ((1.0 + (-1.4f64).exp()) / 2.0).ln();
        assert_close!(ld, expect, 1e-12);
        let single = ObservedSeries::new(vec![3.0], vec![0]).unwrap();
        assert_close!(log_density_partial(&single, &q, &[0.25, 0.75]).unwrap(), 0.25f64.ln(), 1e-15);
    }

    #[test]
    fn partial_density_marginalizes_middle_state() {
        let q = RateMatrix::from_generator(dmatrix![-1.0, 0.6, 0.4; 0.3, -0.5, 0.2; 0.5, 0.5, -1.0]).unwrap();
        let rho = [0.2, 0.3, 0.5];
        let two = ObservedSeries::new(vec![0.0, 1.3], vec![0, 2]).unwrap();
        let direct = log_density_partial(&two, &q, &rho).unwrap().exp();
        let summed: f64 = (0..3)
            .map(|m| {
                let s = ObservedSeries::new(vec![0.0, 0.4, 1.3], vec![0, m, 2]).unwrap();
                log_density_partial(&s, &q, &rho).unwrap().exp()
            })
            .sum();
        assert_close!(summed, direct, 1e-12);
    }

    #[test]
    fn observe_includes_end_time() {
        let p = FullPath::new(0.0, 1.2, vec![0, 1], vec![0.55]).unwrap();
        let s = observe(&p, 0.5).unwrap();
        assert_eq!(s.times(), &[0.0, 0.5, 1.0, 1.2]);
        assert_eq!(s.states(), &[0, 0, 1, 1]);
        let wide = observe(&p, 5.0).unwrap();
        assert_eq!(wide.times(), &[0.0, 1.2]);
        let exact = observe(&FullPath::constant(2, 0.0, 1.0), 0.5).unwrap();
        assert_eq!(exact.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(exact.states(), &[2, 2, 2]);
        assert!(observe(&p, 0.0).is_err());
    }

    #[test]
    fn observing_at_jump_times_reproduces_states() {
        let p = FullPath::new(0.0, 3.0, vec![0, 2, 1, 2], vec![0.4, 1.1, 2.5]).unwrap();
        let seen: Vec<usize> = std::iter::once(0.0)
            .chain(p.jump_times().iter().copied())
            .map(|t| p.state_at(t))
            .collect();
        assert_eq!(seen, p.states());
    }

    #[test]
    fn gillespie_mean_sojourn() {
        let q = two_state(2.0, 0.5);
        let mut r = rng(11);
        let mut first = Vec::new();
        for _ in 0..4000 {
            let p = simulate_path(&q, &[1.0, 0.0], 50.0, &mut r).unwrap();
            if p.num_jumps() > 0 {
                first.push(p.jump_times()[0]);
            }
        }
        let n = first.len() as f64;
        let mean = first.iter().sum::<f64>() / n;
        // Exponential with rate 2: sd of the mean is 0.5 / sqrt(n).
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / n.sqrt(), "mean sojourn {mean}");
    }

    #[test]
    fn gillespie_occupancy_matches_stationary() {
        let q = two_state(2.0, 0.5);
        let p = simulate_path(&q, &[0.5, 0.5], 20_000.0, &mut rng(3)).unwrap();
        let z = sufficient_stats(&[p], 2).unwrap();
        assert_close!(z.h(0) / z.total_time(), 0.2, 0.01);
        assert_close!(z.total_time(), 20_000.0, 1e-8);
    }

    #[test]
    fn absorbing_and_single_state() {
        let q = RateMatrix::from_generator(dmatrix![0.0, 0.0; 1.0, -1.0]).unwrap();
        let p = simulate_path(&q, &[1.0, 0.0], 10.0, &mut rng(1)).unwrap();
        assert_eq!(p.num_jumps(), 0);
        let one = RateMatrix::from_generator(dmatrix![0.0]).unwrap();
        let e = endpoint_sample(&one, 0, 0, 2.0, &mut rng(1)).unwrap();
        assert_eq!(e.num_jumps(), 0);
    }

    #[test]
    fn endpoint_degenerate_cases() {
        let zero = RateMatrix::from_generator(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(endpoint_sample(&zero, 1, 1, 1.0, &mut rng(0)).unwrap().num_jumps(), 0);
        assert!(matches!(endpoint_sample(&zero, 0, 1, 1.0, &mut rng(0)), Err(Error::Precondition(_))));
        let q = two_state(1.0, 1.0);
        assert!(matches!(endpoint_sample(&q, 0, 1, 0.0, &mut rng(0)), Err(Error::Precondition(_))));
        assert_eq!(endpoint_sample(&q, 1, 1, 0.0, &mut rng(0)).unwrap().duration(), 0.0);
        let oneway = RateMatrix::from_generator(dmatrix![0.0, 0.0; 1.0, -1.0]).unwrap();
        assert!(matches!(endpoint_sample(&oneway, 0, 1, 1.0, &mut rng(0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn endpoint_paths_hit_both_ends() {
        let q = RateMatrix::from_generator(dmatrix![-3.0, 2.0, 1.0; 1.0, -1.5, 0.5; 2.0, 2.0, -4.0]).unwrap();
        let sampler = EndpointSampler::new(&q, 2.0).unwrap();
        let mut r = rng(5);
        for k in 0..500 {
            let (a, b) = (k % 3, (k / 3) % 3);
            let p = sampler.sample(a, b, 0.1 + (k % 7) as f64 * 0.3, &mut r).unwrap();
            assert_eq!((p.first_state(), p.last_state()), (a, b));
            FullPath::new(p.start_time(), p.end_time(), p.states().to_vec(), p.jump_times().to_vec()).unwrap();
        }
    }

    #[test]
    fn augmentation_conserves_time_and_is_reproducible() {
        let q = RateMatrix::from_generator(dmatrix![-3.0, 2.0, 1.0; 1.0, -1.5, 0.5; 2.0, 2.0, -4.0]).unwrap();
        let series = vec![
            ObservedSeries::new(vec![0.0, 0.5, 1.0, 1.3], vec![0, 2, 2, 1]).unwrap(),
            ObservedSeries::new(vec![2.0], vec![1]).unwrap(),
            ObservedSeries::new(vec![0.0, 4.0], vec![1, 0]).unwrap(),
        ];
        let z = augment_dataset(&series, &q, &mut rng(9)).unwrap();
        assert_close!(z.total_time(), 1.3 + 4.0, 1e-10);
        assert_eq!(z.initial_counts(), &[1, 2, 0]);
        assert_eq!(z, augment_dataset(&series, &q, &mut rng(9)).unwrap());
    }

    #[test]
    fn augmentation_error_names_segment() {
        let q = RateMatrix::from_generator(dmatrix![0.0, 0.0; 1.0, -1.0]).unwrap();
        let series = vec![ObservedSeries::new(vec![0.0, 1.0, 2.0], vec![1, 1, 1]).unwrap(),
                          ObservedSeries::new(vec![0.0, 1.0, 2.0], vec![1, 0, 1]).unwrap()];
        match augment_dataset(&series, &q, &mut rng(0)) {
            Err(Error::Augmentation { series: 1, segment: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
