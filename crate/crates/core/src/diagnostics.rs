//! Chain diagnostics: batch-means ESS, ESS per second, absolute relative
//! difference, two-sample KS, and the exact invariance test (EIT).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{kernel_iteration, ChainOutput, Kernel, RunConfig};
use crate::paths::{observe, simulate_path, ObservedSeries};
use crate::ratematrix::{build_rate_matrix, exchangeable_params, stationary_dist, FeatureSet, WeightVector};

/// Share of recorded wall-clock time charged to post-burn-in samples.
pub const WALLTIME_SHARE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssEstimate {
    pub ess: f64,
    /// The sequence was constant, so `ess` is set to its length.
    pub degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// ESS by non-overlapping batch means with batch size `floor(sqrt(n))`.
pub fn ess_batch_means(x: &[f64]) -> Result<EssEstimate> {
    let n = x.len();
    if n < 16 {
        return Err(Error::arg(format!("batch-means ESS needs at least 16 samples, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("samples must be finite"));
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= f64::EPSILON * m.abs().max(f64::MIN_POSITIVE) * m.abs() || var == 0.0 {
        return Ok(EssEstimate { ess: n as f64, degenerate: true });
    }
    let b = (n as f64).sqrt().floor() as usize;
    let a = n / b;
    let used = &x[..a * b];
    let grand = mean(used);
    let sigma2 = b as f64
        * used
            .chunks_exact(b)
            .map(|c| (mean(c) - grand).powi(2))
            .sum::<f64>()
        / (a - 1) as f64;
    let ess = if sigma2 > 0.0 { (n as f64 * var / sigma2).min(n as f64) } else { n as f64 };
    Ok(EssEstimate { ess, degenerate: false })
}

/// `|x - y| / max(x, y)`.
pub fn ard(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::arg(format!("ARD needs positive finite inputs, got {x}, {y}")));
    }
    Ok((x - y).abs() / x.max(y))
}

/// Kolmogorov distribution tail `Q(lambda) = 2 sum_j (-1)^(j-1) exp(-2 j^2 lambda^2)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=200 {
        let term = sign * 2.0 * (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev.abs().max(sum.abs()) {
            break;
        }
        prev = term;
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("KS test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::arg("KS samples must not contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let sq = ne.sqrt();
    let p_value = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { statistic: d, p_value })
}

/// Sample quantile, linear interpolation between order statistics (type 7).
pub fn quantile(x: &[f64], p: f64) -> Result<f64> {
    if x.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::arg("quantile needs a non-empty sample and p in [0, 1]"));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    Ok(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(x: &[f64]) -> Result<Self> {
        Ok(Summary {
            min: quantile(x, 0.0)?,
            q1: quantile(x, 0.25)?,
            median: quantile(x, 0.5)?,
            mean: mean(x),
            q3: quantile(x, 0.75)?,
            max: quantile(x, 1.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssReport {
    pub ess: Vec<f64>,
    pub ess_per_second: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub seconds: f64,
    pub ess_summary: Summary,
    pub ess_per_second_summary: Summary,
}

/// ESS of every column of `rows`, divided by `seconds`.
pub fn ess_report(rows: &[Vec<f64>], seconds: f64) -> Result<EssReport> {
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::arg("ESS report needs at least one parameter"));
    }
    if !(seconds > 0.0) {
        return Err(Error::arg(format!("wall-clock time must be positive, got {seconds}")));
    }
    let mut ess = Vec::with_capacity(d);
    let mut degenerate = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let e = ess_batch_means(&col)?;
        ess.push(e.ess);
        degenerate.push(e.degenerate);
    }
    let ess_per_second: Vec<f64> = ess.iter().map(|e| e / seconds).collect();
    Ok(EssReport {
        ess_summary: Summary::of(&ess)?,
        ess_per_second_summary: Summary::of(&ess_per_second)?,
        ess,
        ess_per_second,
        degenerate,
        seconds,
    })
}

/// ESS per second of the exchangeable parameters of each chain, from
/// post-burn-in samples and 70% of the recorded wall-clock time.
pub fn ess_per_second_report(chains: &[ChainOutput], features: &FeatureSet) -> Result<Vec<EssReport>> {
    if chains.is_empty() {
        return Err(Error::arg("no chains given"));
    }
    chains
        .iter()
        .map(|c| {
            let theta = c.theta_samples(features)?;
            ess_report(&theta[c.burn_in_index()..], WALLTIME_SHARE * c.times.total)
        })
        .collect()
}

/// Per-parameter ARD of posterior means.
pub fn ard_of_means(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_dim("posterior means", a.len(), b.len())?;
    a.iter().zip(b).map(|(&x, &y)| ard(x, y)).collect()
}

/// Transition applied to `w` in the successive-conditional stream of the EIT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EitKernel {
    Sampler(Kernel),
    /// Draws `w` afresh from the prior, ignoring the data. Exact, and mixes in
    /// one step, so it checks the harness itself.
    PriorRedraw,
}

impl std::str::FromStr for EitKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "prior" | "prior_redraw" => Ok(EitKernel::PriorRedraw),
            other => other.parse().map(EitKernel::Sampler),
        }
    }
}

/// Synthetic-data design and sample sizes of an EIT run.
#[derive(Debug, Clone)]
pub struct EitConfig {
    pub features: FeatureSet,
    pub kernel: EitKernel,
    /// Kernel settings; `kernel`, `iterations` and `seed` fields are ignored.
    pub run: RunConfig,
    pub n_series: usize,
    pub series_length: f64,
    pub mesh: f64,
    pub n_marginal: usize,
    pub n_successive: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl EitConfig {
    pub fn new(features: FeatureSet, kernel: EitKernel) -> Self {
        EitConfig {
            features,
            kernel,
            run: RunConfig {
                trajectory_length: 1.0,
                hmc: crate::hmc::HmcConfig { steps: 20, step_size: 0.05 },
                ..RunConfig::default()
            },
            n_series: 10,
            series_length: 1.0,
            mesh: 0.5,
            n_marginal: 300,
            n_successive: 300,
            thinning: 20,
            seed: 0,
        }
    }
}

/// One tested quantity. Quantities come in families (stationary
/// probabilities, exchangeable parameters) and each family is judged
/// against its own Bonferroni threshold `0.05 / family size`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EitRow {
    pub family: &'static str,
    /// 1-based index within the family.
    pub index: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EitResult {
    pub rows: Vec<EitRow>,
    pub passed: bool,
}

impl EitResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.passed).count()
    }

    /// Rows `family,parameter_index,p_value,statistic,test`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("family,parameter_index,p_value,statistic,test\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.3},{:.3},KS\n", r.family, r.index, r.p_value, r.statistic));
        }
        out
    }
}

/// Simulates `n_series` observed series under `w` with initial law `pi(w)`.
pub fn generate_data<R: Rng + ?Sized>(
    w: &WeightVector,
    features: &FeatureSet,
    n_series: usize,
    length: f64,
    mesh: f64,
    rng: &mut R,
) -> Result<Vec<ObservedSeries>> {
    let rate = build_rate_matrix(w, features)?;
    let pi = rate.pi().to_vec();
    (0..n_series)
        .map(|_| observe(&simulate_path(&rate, &pi, length, rng)?, mesh))
        .collect()
}

/// Stationary probabilities followed by exchangeable parameters of each draw.
fn tested_quantities(w: &[f64], features: &FeatureSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let p1 = features.p1();
    Ok((stationary_dist(&w[..p1], features)?, exchangeable_params(&w[p1..], features)?))
}

fn ks_family(
    family: &'static str,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    rows: &mut Vec<EitRow>,
) -> Result<()> {
    let n = a[0].len();
    let threshold = 0.05 / n as f64;
    for k in 0..n {
        let xa: Vec<f64> = a.iter().map(|r| r[k]).collect();
        let xb: Vec<f64> = b.iter().map(|r| r[k]).collect();
        let ks = ks_two_sample(&xa, &xb)?;
        rows.push(EitRow {
            family,
            index: k + 1,
            statistic: ks.statistic,
            p_value: ks.p_value,
            threshold,
            passed: ks.p_value > threshold,
        });
    }
    Ok(())
}

/// Exact invariance test comparing marginal-conditional and
/// successive-conditional draws of the stationary probabilities and the
/// exchangeable parameters, one KS test per quantity.
pub fn geweke_eit(config: &EitConfig) -> Result<EitResult> {
    let f = &config.features;
    let kappa = config.run.kappa;
    if config.n_marginal == 0 || config.n_successive == 0 || config.thinning == 0 {
        return Err(Error::arg("EIT sample sizes and thinning must be positive"));
    }
    if let EitKernel::Sampler(k) = config.kernel {
        RunConfig { kernel: k, ..config.run.clone() }.validate()?;
    }

    let marginal = || -> Vec<Vec<f64>> {
        let mut rng = crate::paths::stream_rng(config.seed, 0);
        (0..config.n_marginal)
            .map(|_| WeightVector::sample_prior(f, kappa, &mut rng).to_flat())
            .collect()
    };
    let successive = || -> Result<Vec<Vec<f64>>> {
        let mut rng = crate::paths::stream_rng(config.seed, 1);
        let mut w = WeightVector::sample_prior(f, kappa, &mut rng);
        let gen = |w: &WeightVector, rng: &mut ChaCha8Rng| {
            generate_data(w, f, config.n_series, config.series_length, config.mesh, rng)
        };
        let mut data = gen(&w, &mut rng)?;
        let mut out = Vec::with_capacity(config.n_successive);
        let total = config.n_successive * config.thinning;
        for i in 1..=total {
            w = match config.kernel {
                EitKernel::PriorRedraw => WeightVector::sample_prior(f, kappa, &mut rng),
                EitKernel::Sampler(kernel) => {
                    let cfg = RunConfig { kernel, ..config.run.clone() };
                    kernel_iteration(&w, &data, f, &cfg, &mut rng)?.weights
                }
            };
            data = gen(&w, &mut rng)?;
            if i % config.thinning == 0 {
                out.push(w.to_flat());
            }
        }
        Ok(out)
    };
    let (a, b) = rayon::join(marginal, successive);
    let b = b?;

    let split = |draws: &[Vec<f64>]| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        Ok(draws.iter().map(|w| tested_quantities(w, f)).collect::<Result<Vec<_>>>()?.into_iter().unzip())
    };
    let (pi_a, theta_a) = split(&a)?;
    let (pi_b, theta_b) = split(&b)?;
    let mut rows = Vec::new();
    ks_family("pi", &pi_a, &pi_b, &mut rows)?;
    ks_family("theta", &theta_a, &theta_b, &mut rows)?;
    let passed = rows.iter().all(|r| r.passed);
    Ok(EitResult { rows, passed })
}

/// Seeded generator for callers without one.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = seeded_rng(seed);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn iid_ess_is_near_n() {
        let e = ess_batch_means(&normals(100_000, 1)).unwrap();
        assert!((e.ess / 1e5 - 1.0).abs() < 0.2, "{e:?}");
    }

    #[test]
    fn ar1_ess() {
        let z = normals(100_000, 2);
        let rho: f64 = 0.9;
        let mut x = vec![0.0; z.len()];
        for i in 1..z.len() {
            x[i] = rho * x[i - 1] + (1.0 - rho * rho).sqrt() * z[i];
        }
        let expect = 1e5 * (1.0 - rho) / (1.0 + rho);
        let e = ess_batch_means(&x).unwrap().ess;
        assert!((e / expect - 1.0).abs() < 0.25, "{e} vs {expect}");
    }

    #[test]
    fn duplicated_pairs_halve_ess() {
        let z = normals(50_000, 3);
        let x: Vec<f64> = z.iter().flat_map(|v| [*v, *v]).collect();
        let e = ess_batch_means(&x).unwrap().ess;
        assert!((e / 50_000.0 - 1.0).abs() < 0.25, "{e}");
    }

    #[test]
    fn ess_is_affine_invariant_and_flags_constants() {
        let x = normals(1000, 4);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 7.0).collect();
        assert_close!(ess_batch_means(&x).unwrap().ess, ess_batch_means(&y).unwrap().ess, 1e-10 * 1000.0);
        let c = ess_batch_means(&[2.5; 100]).unwrap();
        assert!(c.degenerate && c.ess == 100.0);
        assert!(ess_batch_means(&[1.0; 10]).is_err());
    }

    #[test]
    fn ard_definition() {
        assert_eq!(ard(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(ard(2.0, 1.0).unwrap(), 0.5);
        assert_eq!(ard(1.0, 2.0).unwrap(), ard(2.0, 1.0).unwrap());
        assert!(ard(0.0, 1.0).is_err());
    }

    #[test]
    fn ks_edge_cases() {
        let a = [1.0, 2.0, 3.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]).unwrap().statistic, 1.0);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn ks_against_reference_value() {
        // D = 0.5 with n = m = 20: lambda = (sqrt(10) + 0.12 + 0.11/sqrt(10)) * 0.5.
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (10..30).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_close!(r.statistic, 0.5, 1e-15);
        let lam = (10f64.sqrt() + 0.12 + 0.11 / 10f64.sqrt()) * 0.5;
        let q: f64 = (1..100).map(|j| 2.0 * (-1f64).powi(j - 1) * (-2.0 * (j * j) as f64 * lam * lam).exp()).sum();
        assert_close!(r.p_value, q, 1e-12);
    }

    #[test]
    fn ks_null_p_values_average_one_half() {
        let ps: Vec<f64> = (0..400)
            .map(|i| ks_two_sample(&normals(300, 100 + 2 * i), &normals(300, 101 + 2 * i)).unwrap().p_value)
            .collect();
        let m = mean(&ps);
        // Asymptotic p-values for discrete D are slightly conservative.
        assert!((m - 0.5).abs() < 0.06, "mean p {m}");
    }

    #[test]
    fn quantiles_type_seven() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&x, 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&x, 0.25).unwrap(), 1.75);
        assert_eq!(quantile(&x, 1.0).unwrap(), 4.0);
        let s = Summary::of(&x).unwrap();
        assert!(s.min <= s.median && s.median <= s.max);
    }

    #[test]
    fn ess_per_second_is_linear_in_time() {
        let rows: Vec<Vec<f64>> = normals(400, 9).chunks(2).map(|c| c.to_vec()).collect();
        let r1 = ess_report(&rows, 2.0).unwrap();
        let r2 = ess_report(&rows, 4.0).unwrap();
        for (a, b) in r1.ess_per_second.iter().zip(&r2.ess_per_second) {
            assert_close!(*a, 2.0 * b, 1e-12);
        }
    }
}
