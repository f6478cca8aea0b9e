//! Factor graph of the augmented posterior over the bivariate weights, the
//! neighbourhood queries used by the local BPS, and sparsity profiling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::SuffStats;
use crate::ratematrix::{FeatureSet, SparseFeature};

/// What a factor contributes to the potential, with the constants it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    /// `kappa w_k^2 / 2`.
    NormalPrior { coord: usize, kappa: f64 },
    /// `h_x pi_{x'} exp(<wb, phi({x,x'})>)`.
    Sojourn { from: usize, to: usize, h: f64, pi_to: f64 },
    /// `-c_{x,x'} (log pi_{x'} + <wb, phi({x,x'})>)`.
    TransitionCount { from: usize, to: usize, count: f64, log_pi_to: f64 },
    /// `-n_x log pi_x`; depends on the univariate weights only.
    InitialCount { state: usize, count: f64 },
}

impl FactorKind {
    pub fn is_prior(&self) -> bool {
        matches!(self, FactorKind::NormalPrior { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            FactorKind::NormalPrior { coord, .. } => format!("N{coord}"),
            FactorKind::Sojourn { from, to, .. } => format!("H{from},{to}"),
            FactorKind::TransitionCount { from, to, .. } => format!("C{from},{to}"),
            FactorKind::InitialCount { state, .. } => format!("I{state}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    /// Neighbour variables `N_f`, sorted.
    pub vars: Vec<usize>,
    /// Bivariate feature in graph variable coordinates (empty for priors and
    /// initial counts).
    pub phi: SparseFeature,
}

impl Factor {
    pub fn new(kind: FactorKind, mut vars: Vec<usize>, phi: SparseFeature) -> Result<Self> {
        vars.sort_unstable();
        vars.dedup();
        if vars.is_empty() {
            return Err(Error::arg("factor must have at least one neighbour variable"));
        }
        if let Some(&(k, _)) = phi.iter().find(|(k, _)| vars.binary_search(k).is_err()) {
            return Err(Error::arg(format!("feature coordinate {k} is not a neighbour variable")));
        }
        Ok(Factor { kind, vars, phi })
    }

    /// A factor with no payload, for graph-structure work only.
    pub fn structural(vars: Vec<usize>) -> Result<Self> {
        Factor::new(FactorKind::InitialCount { state: 0, count: 0.0 }, vars, SparseFeature::new())
    }

    fn feature_dot(&self, at: &impl Fn(usize) -> f64) -> f64 {
        self.phi.iter().map(|&(k, v)| v * at(k)).sum()
    }

    /// `U_f` with positions supplied by `at(k)`.
    pub fn energy(&self, at: impl Fn(usize) -> f64) -> f64 {
        match self.kind {
            FactorKind::NormalPrior { coord, kappa } => 0.5 * kappa * at(coord).powi(2),
            FactorKind::Sojourn { h, pi_to, .. } => h * pi_to * self.feature_dot(&at).exp(),
            FactorKind::TransitionCount { count, log_pi_to, .. } => {
                -count * (log_pi_to + self.feature_dot(&at))
            }
            FactorKind::InitialCount { .. } => 0.0,
        }
    }

    /// `grad U_f` as `(variable, partial)` pairs over `N_f`.
    pub fn gradient(&self, at: impl Fn(usize) -> f64) -> SparseFeature {
        match self.kind {
            FactorKind::NormalPrior { coord, kappa } => {
                std::iter::once((coord, kappa * at(coord))).collect()
            }
            FactorKind::Sojourn { h, pi_to, .. } => {
                let u = h * pi_to * self.feature_dot(&at).exp();
                self.phi.iter().map(|&(k, v)| (k, u * v)).collect()
            }
            FactorKind::TransitionCount { count, .. } => {
                self.phi.iter().map(|&(k, v)| (k, -count * v)).collect()
            }
            FactorKind::InitialCount { .. } => SparseFeature::new(),
        }
    }
}

/// Bipartite graph with precomputed extended neighbourhoods.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    num_vars: usize,
    factors: Vec<Factor>,
    var_factors: Vec<Vec<usize>>,
    ext_vars: Vec<Vec<usize>>,
    ext_factors: Vec<Vec<usize>>,
}

fn sorted_union<'a>(lists: impl Iterator<Item = &'a [usize]>) -> Vec<usize> {
    let mut out: Vec<usize> = lists.flatten().copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl FactorGraph {
    pub fn new(num_vars: usize, factors: Vec<Factor>) -> Result<Self> {
        let mut var_factors = vec![Vec::new(); num_vars];
        for (f, factor) in factors.iter().enumerate() {
            for &k in &factor.vars {
                if k >= num_vars {
                    return Err(Error::arg(format!("factor {f} references variable {k} of {num_vars}")));
                }
                var_factors[k].push(f);
            }
        }
        let ext_factors: Vec<Vec<usize>> = factors
            .iter()
            .map(|factor| sorted_union(factor.vars.iter().map(|&k| var_factors[k].as_slice())))
            .collect();
        let ext_vars = ext_factors
            .iter()
            .map(|sf| sorted_union(sf.iter().map(|&g| factors[g].vars.as_slice())))
            .collect();
        Ok(FactorGraph { num_vars, factors, var_factors, ext_vars, ext_factors })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, f: usize) -> Result<&Factor> {
        self.factors.get(f).ok_or_else(|| Error::arg(format!("unknown factor {f}")))
    }

    /// `N_f`.
    pub fn neighbour_vars(&self, f: usize) -> Result<&[usize]> {
        Ok(&self.factor(f)?.vars)
    }

    /// `S_k`.
    pub fn neighbour_factors(&self, k: usize) -> Result<&[usize]> {
        self.var_factors
            .get(k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::arg(format!("unknown variable {k}")))
    }

    /// `N̄_f`: variables of every factor sharing a variable with `f`.
    pub fn extended_neighbour_vars(&self, f: usize) -> Result<&[usize]> {
        self.factor(f)?;
        Ok(&self.ext_vars[f])
    }

    /// `S̄_f`: factors sharing a variable with `f`, including `f`.
    pub fn extended_neighbour_factors(&self, f: usize) -> Result<&[usize]> {
        self.factor(f)?;
        Ok(&self.ext_factors[f])
    }

    pub(crate) fn ext_factors_unchecked(&self, f: usize) -> &[usize] {
        &self.ext_factors[f]
    }

    pub(crate) fn ext_vars_unchecked(&self, f: usize) -> &[usize] {
        &self.ext_vars[f]
    }

    /// `sum_f U_f` at the given positions.
    pub fn total_energy(&self, w: &[f64]) -> f64 {
        self.factors.iter().map(|f| f.energy(|k| w[k])).sum()
    }

    /// `sum_f grad U_f` at the given positions.
    pub fn total_gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_vars];
        for f in &self.factors {
            for (k, v) in f.gradient(|k| w[k]) {
                g[k] += v;
            }
        }
        g
    }

    pub fn sparsity_profile(&self) -> SparsityProfile {
        let mut p = SparsityProfile { num_factors: self.factors.len(), num_vars: self.num_vars, ..Default::default() };
        for (f, factor) in self.factors.iter().enumerate() {
            p.max_vars = p.max_vars.max(factor.vars.len());
            p.max_ext_vars = p.max_ext_vars.max(self.ext_vars[f].len());
            p.max_ext_factors = p.max_ext_factors.max(self.ext_factors[f].len());
            if !factor.kind.is_prior() {
                let model = self.ext_factors[f].iter().filter(|&&g| !self.factors[g].kind.is_prior()).count();
                p.max_ext_model_factors = p.max_ext_model_factors.max(model);
                p.max_ext_factors_of_model = p.max_ext_factors_of_model.max(self.ext_factors[f].len());
            }
        }
        p
    }
}

/// Maxima of the neighbourhood sizes over all factors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SparsityProfile {
    /// `max_f |N_f|`.
    pub max_vars: usize,
    /// `max_f |N̄_f|`.
    pub max_ext_vars: usize,
    /// `max_f |S̄_f|` over all factors, priors included.
    pub max_ext_factors: usize,
    /// `max |S̄_f|` over model (non-prior) factors, counting only model factors.
    pub max_ext_model_factors: usize,
    /// `max |S̄_f|` over model factors, counting prior factors too.
    pub max_ext_factors_of_model: usize,
    pub num_factors: usize,
    pub num_vars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Bivariate weights only; the LBPS target of the combined sampler.
    Combined,
    /// Univariate and bivariate weights together; analysis only.
    Naive,
}

/// Builds the factor graph of the augmented posterior.
///
/// Combined scheme: variables are `wb`, one sojourn factor per ordered pair
/// with `h_x > 0`, one transition factor per ordered pair with `c > 0`, and one
/// Normal prior per coordinate. Naive scheme: variables are `(wu, wb)`, every
/// data factor (initial counts included) also neighbours all of `wu`.
pub fn build_posterior_graph(
    z: &SuffStats,
    features: &FeatureSet,
    pi: &[f64],
    kappa: f64,
    scheme: Scheme,
) -> Result<FactorGraph> {
    let s = features.n_states();
    crate::error::check_dim("sufficient statistics", s, z.n_states())?;
    crate::error::check_dim("stationary distribution", s, pi.len())?;
    let (p1, p2) = (features.p1(), features.p2());
    let offset = match scheme {
        Scheme::Combined => 0,
        Scheme::Naive => p1,
    };
    let wu_vars: Vec<usize> = match scheme {
        Scheme::Combined => Vec::new(),
        Scheme::Naive => (0..p1).collect(),
    };
    let shifted = |phi: &SparseFeature| -> SparseFeature { phi.iter().map(|&(k, v)| (k + offset, v)).collect() };
    let data_vars = |phi: &SparseFeature| -> Vec<usize> {
        wu_vars.iter().copied().chain(phi.iter().map(|&(k, _)| k + offset)).collect()
    };

    let mut factors = Vec::new();
    for x in 0..s {
        for y in 0..s {
            if x == y {
                continue;
            }
            let phi = features.phi(x, y);
            let h = z.h(x);
            if h > 0.0 {
                let kind = FactorKind::Sojourn { from: x, to: y, h, pi_to: pi[y] };
                factors.push(Factor::new(kind, data_vars(phi), shifted(phi))?);
            }
            let c = z.c(x, y);
            if c > 0 {
                let kind = FactorKind::TransitionCount { from: x, to: y, count: c as f64, log_pi_to: pi[y].ln() };
                factors.push(Factor::new(kind, data_vars(phi), shifted(phi))?);
            }
        }
    }
    if scheme == Scheme::Naive {
        for x in 0..s {
            if z.n(x) > 0 {
                let kind = FactorKind::InitialCount { state: x, count: z.n(x) as f64 };
                factors.push(Factor::new(kind, wu_vars.clone(), SparseFeature::new())?);
            }
        }
    }
    for k in 0..p2 {
        let kind = FactorKind::NormalPrior { coord: k + offset, kappa };
        factors.push(Factor::new(kind, vec![k + offset], SparseFeature::new())?);
    }
    if scheme == Scheme::Naive {
        for k in 0..p1 {
            factors.push(Factor::new(FactorKind::NormalPrior { coord: k, kappa }, vec![k], SparseFeature::new())?);
        }
    }
    FactorGraph::new(offset + p2, factors)
}
