//! Rate matrices built from GLM weights.
//!
//! A reversible rate matrix is parameterised by univariate weights `wu`
//! (through a softmax giving the stationary distribution) and bivariate
//! weights `wb` (through exponentiated linear predictors giving the
//! exchangeable parameters):
//!
//! ```text
//! pi_x        = exp(<wu, psi(x)> - A(wu))
//! theta_{x,y} = exp(<wb, phi({x,y})>)
//! q_{x,y}     = theta_{x,y} * pi_y            (x != y)
//! ```
//!
//! Pairs of states are indexed through a [`PairOrdering`]; internally ranks
//! are 0-based, while the `eta` accessors return the conventional 1-based
//! value.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use smallvec::SmallVec;

use crate::error::{check_dim, Error, Result};

/// Ordered, distinct state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::arg("a state space needs at least two states"));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::arg(format!("duplicate state label '{l}'")));
            }
        }
        Ok(StateSpace { labels, index })
    }

    /// States labelled `1..=n`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn dna() -> Self {
        Self::new(["A", "C", "G", "T"]).expect("static alphabet")
    }

    /// The 20 amino acids in the row order of the Grantham distance table.
    pub fn amino_acids() -> Self {
        Self::new(crate::aa::ALPHABET.iter().map(|c| c.to_string())).expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Number of unordered distinct pairs over `n` states.
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn lex_slot(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// A bijection between unordered state pairs and ranks `0..n(n-1)/2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOrdering {
    n_states: usize,
    rank_of_slot: Vec<usize>,
    pair_of_rank: Vec<(usize, usize)>,
}

impl PairOrdering {
    /// Lexicographic order over state indices: (0,1), (0,2), ..., (n-2,n-1).
    pub fn lexicographic(n_states: usize) -> Self {
        let mut pair_of_rank = Vec::with_capacity(num_pairs(n_states));
        for i in 0..n_states {
            for j in i + 1..n_states {
                pair_of_rank.push((i, j));
            }
        }
        let rank_of_slot = (0..pair_of_rank.len()).collect();
        PairOrdering { n_states, rank_of_slot, pair_of_rank }
    }

    /// Builds an ordering from the list of pairs sorted by rank.
    pub fn from_ranked_pairs(n_states: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let m = num_pairs(n_states);
        if pairs.len() != m {
            return Err(Error::arg(format!(
                "pair ordering must rank all {m} pairs, got {}",
                pairs.len()
            )));
        }
        let mut rank_of_slot = vec![usize::MAX; m];
        let mut pair_of_rank = Vec::with_capacity(m);
        for (rank, &(a, b)) in pairs.iter().enumerate() {
            if a == b || a >= n_states || b >= n_states {
                return Err(Error::arg(format!("invalid pair ({a}, {b}) in ordering")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            let slot = lex_slot(n_states, i, j);
            if rank_of_slot[slot] != usize::MAX {
                return Err(Error::arg(format!("pair ({i}, {j}) ranked twice")));
            }
            rank_of_slot[slot] = rank;
            pair_of_rank.push((i, j));
        }
        Ok(PairOrdering { n_states, rank_of_slot, pair_of_rank })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.pair_of_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_of_rank.is_empty()
    }

    /// 0-based rank of the unordered pair `{a, b}`; symmetric in its arguments.
    pub fn rank(&self, a: usize, b: usize) -> usize {
        assert!(a != b, "rank of a diagonal pair");
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.rank_of_slot[lex_slot(self.n_states, i, j)]
    }

    /// 1-based order value `eta({a, b})`.
    pub fn eta(&self, a: usize, b: usize) -> usize {
        self.rank(a, b) + 1
    }

    /// The pair `(i, j)`, `i < j`, holding `rank`.
    pub fn pair(&self, rank: usize) -> (usize, usize) {
        self.pair_of_rank[rank]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pair_of_rank
    }
}

/// Sparse feature vector: `(feature index, value)` entries.
pub type SparseFeature = SmallVec<[(usize, f64); 2]>;

pub fn sparse_dot(w: &[f64], f: &SparseFeature) -> f64 {
    f.iter().map(|&(k, x)| w[k] * x).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Gtr,
    Chain,
    Custom,
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gtr" => Ok(FeatureKind::Gtr),
            "chain" => Ok(FeatureKind::Chain),
            other => Err(Error::arg(format!("unknown feature kind '{other}' (expected gtr|chain)"))),
        }
    }
}

/// Univariate features `psi` (dense, one row per state) and bivariate
/// features `phi` (sparse, one entry per pair rank).
#[derive(Debug, Clone)]
pub struct FeatureSet {
    kind: FeatureKind,
    p1: usize,
    p2: usize,
    psi: Vec<Vec<f64>>,
    phi: Vec<SparseFeature>,
    ordering: PairOrdering,
}

impl FeatureSet {
    /// General constructor. `phi[r]` is the feature vector of the pair with rank `r`.
    pub fn custom(
        psi: Vec<Vec<f64>>,
        p2: usize,
        phi: Vec<SparseFeature>,
        ordering: PairOrdering,
    ) -> Result<Self> {
        let n = ordering.n_states();
        check_dim("psi rows", n, psi.len())?;
        let p1 = psi.first().map_or(0, Vec::len);
        for row in &psi {
            check_dim("psi row length", p1, row.len())?;
        }
        check_dim("phi entries", ordering.len(), phi.len())?;
        for f in &phi {
            if let Some(&(k, _)) = f.iter().find(|&&(k, _)| k >= p2) {
                return Err(Error::arg(format!("phi index {k} out of range for p2 = {p2}")));
            }
        }
        Ok(FeatureSet { kind: FeatureKind::Custom, p1, p2, psi, phi, ordering })
    }

    /// One-hot `psi` per state, one-hot `phi` per pair rank.
    pub fn gtr(ordering: PairOrdering) -> Self {
        let n = ordering.n_states();
        let m = ordering.len();
        let phi = (0..m).map(|r| SmallVec::from_slice(&[(r, 1.0)])).collect();
        FeatureSet {
            kind: FeatureKind::Gtr,
            p1: n,
            p2: m,
            psi: one_hot_rows(n),
            phi,
            ordering,
        }
    }

    /// Chain features: `phi_i({x,y}) = 1` iff the (0-based) rank of `{x,y}` is
    /// `i` or `i + 1`. The rank-0 pair has a single active feature; every other
    /// pair has two, at `rank - 1` and `rank`.
    pub fn chain(ordering: PairOrdering) -> Self {
        let n = ordering.n_states();
        let m = ordering.len();
        let phi = (0..m)
            .map(|r| {
                if r == 0 {
                    SmallVec::from_slice(&[(0, 1.0)])
                } else {
                    SmallVec::from_slice(&[(r - 1, 1.0), (r, 1.0)])
                }
            })
            .collect();
        FeatureSet {
            kind: FeatureKind::Chain,
            p1: n,
            p2: m,
            psi: one_hot_rows(n),
            phi,
            ordering,
        }
    }

    pub fn build(kind: FeatureKind, ordering: PairOrdering) -> Result<Self> {
        match kind {
            FeatureKind::Gtr => Ok(Self::gtr(ordering)),
            FeatureKind::Chain => Ok(Self::chain(ordering)),
            FeatureKind::Custom => Err(Error::arg("custom features need explicit psi/phi")),
        }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn n_states(&self) -> usize {
        self.ordering.n_states()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn psi(&self, x: usize) -> &[f64] {
        &self.psi[x]
    }

    /// Bivariate features of the pair with the given rank.
    pub fn phi_rank(&self, rank: usize) -> &SparseFeature {
        &self.phi[rank]
    }

    /// Bivariate features of the unordered pair `{x, y}`.
    pub fn phi(&self, x: usize, y: usize) -> &SparseFeature {
        &self.phi[self.ordering.rank(x, y)]
    }

    pub fn ordering(&self) -> &PairOrdering {
        &self.ordering
    }
}

fn one_hot_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|x| {
            let mut row = vec![0.0; n];
            row[x] = 1.0;
            row
        })
        .collect()
}

/// Ordering-validated GTR features over a state space.
pub fn gtr_features(states: &StateSpace, ordering: &PairOrdering) -> Result<FeatureSet> {
    check_dim("ordering states", states.len(), ordering.n_states())?;
    Ok(FeatureSet::gtr(ordering.clone()))
}

/// Ordering-validated chain GTR features over a state space.
pub fn chain_features(states: &StateSpace, ordering: &PairOrdering) -> Result<FeatureSet> {
    check_dim("ordering states", states.len(), ordering.n_states())?;
    Ok(FeatureSet::chain(ordering.clone()))
}

/// GLM weights with their prior precision.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub wu: Vec<f64>,
    pub wb: Vec<f64>,
    pub kappa: f64,
}

impl WeightVector {
    pub fn new(wu: Vec<f64>, wb: Vec<f64>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::arg(format!("prior precision must be positive, got {kappa}")));
        }
        if wu.iter().chain(&wb).any(|w| !w.is_finite()) {
            return Err(Error::arg("weights must be finite"));
        }
        Ok(WeightVector { wu, wb, kappa })
    }

    pub fn zeros(features: &FeatureSet, kappa: f64) -> Self {
        WeightVector { wu: vec![0.0; features.p1()], wb: vec![0.0; features.p2()], kappa }
    }

    /// Draw from the `N(0, 1/kappa)` prior.
    pub fn sample_prior<R: Rng + ?Sized>(features: &FeatureSet, kappa: f64, rng: &mut R) -> Self {
        let sd = 1.0 / kappa.sqrt();
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let wu = draw(features.p1());
        let wb = draw(features.p2());
        WeightVector { wu, wb, kappa }
    }

    pub fn len(&self) -> usize {
        self.wu.len() + self.wb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation `(wu, wb)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.wu.clone();
        v.extend_from_slice(&self.wb);
        v
    }

    pub fn from_flat(flat: &[f64], p1: usize, kappa: f64) -> Self {
        WeightVector { wu: flat[..p1].to_vec(), wb: flat[p1..].to_vec(), kappa }
    }
}

/// Softmax stationary distribution `pi(wu)`, normalised with max-subtraction.
pub fn stationary_dist(wu: &[f64], features: &FeatureSet) -> Result<Vec<f64>> {
    check_dim("univariate weights", features.p1(), wu.len())?;
    let logits: Vec<f64> = (0..features.n_states())
        .map(|x| features.psi(x).iter().zip(wu).map(|(a, b)| a * b).sum())
        .collect();
    Ok(softmax(&logits))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Exchangeable parameters `theta`, indexed by pair rank.
pub fn exchangeable_params(wb: &[f64], features: &FeatureSet) -> Result<Vec<f64>> {
    check_dim("bivariate weights", features.p2(), wb.len())?;
    Ok((0..features.ordering().len())
        .map(|r| sparse_dot(wb, features.phi_rank(r)).exp())
        .collect())
}

/// A CTMC generator together with its stationary distribution.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    q: DMatrix<f64>,
    pi: Vec<f64>,
    theta: Vec<f64>,
    reversible: bool,
}

/// Reversible GLM rate matrix `q_{x,y} = theta_{x,y} pi_y`.
pub fn build_rate_matrix(w: &WeightVector, features: &FeatureSet) -> Result<RateMatrix> {
    let pi = stationary_dist(&w.wu, features)?;
    let theta = exchangeable_params(&w.wb, features)?;
    Ok(RateMatrix::from_parts(pi, theta, features.ordering()))
}

impl RateMatrix {
    pub(crate) fn from_parts(pi: Vec<f64>, theta: Vec<f64>, ordering: &PairOrdering) -> Self {
        let n = pi.len();
        let mut q = DMatrix::zeros(n, n);
        for (r, &(i, j)) in ordering.pairs().iter().enumerate() {
            q[(i, j)] = theta[r] * pi[j];
            q[(j, i)] = theta[r] * pi[i];
        }
        for i in 0..n {
            let exit: f64 = (0..n).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
            q[(i, i)] = -exit;
        }
        RateMatrix { q, pi, theta, reversible: true }
    }

    /// Wraps an arbitrary generator. The stationary distribution is solved for
    /// and detailed balance is checked to pick the exponentiation route.
    pub fn from_generator(q: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || q.ncols() != n {
            return Err(Error::arg("generator must be a non-empty square matrix"));
        }
        for i in 0..n {
            for j in 0..n {
                let v = q[(i, j)];
                if !v.is_finite() || (i != j && v < 0.0) {
                    return Err(Error::arg(format!("invalid generator entry q[{i},{j}] = {v}")));
                }
            }
            let row: f64 = q.row(i).iter().sum();
            let scale = q[(i, i)].abs().max(1.0);
            if row.abs() > 1e-10 * scale {
                return Err(Error::arg(format!("generator row {i} sums to {row}, not 0")));
            }
        }
        let (pi, reversible) = match solve_stationary(&q) {
            Some(pi) if pi.iter().all(|&p| p > 0.0) => {
                let rev = (0..n).all(|i| {
                    (0..n).all(|j| {
                        let a = pi[i] * q[(i, j)];
                        let b = pi[j] * q[(j, i)];
                        (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
                    })
                });
                (pi, rev)
            }
            _ => (vec![1.0 / n as f64; n], false),
        };
        Ok(RateMatrix { q, pi, theta: Vec::new(), reversible })
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.q[(x, y)]
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Exchangeable parameters by pair rank (empty for raw generators).
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// `max_x |q_{x,x}|`, the uniformization rate.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n_states()).map(|x| -self.q[(x, x)]).fold(0.0, f64::max)
    }

    /// Transition matrix `exp(delta Q)`.
    pub fn transition_matrix(&self, delta: f64) -> Result<DMatrix<f64>> {
        matrix_exponential(self, delta)
    }

    /// Precomputes what is needed for repeated exponentials of this matrix.
    pub fn propagator(&self) -> Propagator {
        if self.reversible {
            Propagator::spectral(self)
        } else {
            Propagator::Series(self.q.clone())
        }
    }
}

fn solve_stationary(q: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = q.nrows();
    // pi Q = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    let sol = a.lu().solve(&b)?;
    if sol.iter().all(|v| v.is_finite()) {
        Some(sol.iter().copied().collect())
    } else {
        None
    }
}

/// Reusable exponentiation of a fixed generator.
#[derive(Debug, Clone)]
pub enum Propagator {
    /// Eigendecomposition of the symmetrised generator `D^{1/2} Q D^{-1/2}`.
    Spectral {
        vectors: DMatrix<f64>,
        values: Vec<f64>,
        sqrt_pi: Vec<f64>,
    },
    Series(DMatrix<f64>),
}

impl Propagator {
    fn spectral(rate: &RateMatrix) -> Self {
        let n = rate.n_states();
        let sqrt_pi: Vec<f64> = rate.pi.iter().map(|p| p.sqrt()).collect();
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = sqrt_pi[i] * rate.q[(i, j)] / sqrt_pi[j];
            }
        }
        let sym = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Propagator::Spectral {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
            sqrt_pi,
        }
    }

    pub fn transition(&self, delta: f64) -> Result<DMatrix<f64>> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::arg(format!("time interval must be finite and >= 0, got {delta}")));
        }
        match self {
            Propagator::Spectral { vectors, values, sqrt_pi } => {
                let n = sqrt_pi.len();
                if delta == 0.0 {
                    return Ok(DMatrix::identity(n, n));
                }
                let mut scaled = vectors.clone();
                for (k, &lam) in values.iter().enumerate() {
                    let e = (lam * delta).exp();
                    scaled.column_mut(k).scale_mut(e);
                }
                let mut p = scaled * vectors.transpose();
                for i in 0..n {
                    for j in 0..n {
                        let v = p[(i, j)] * sqrt_pi[j] / sqrt_pi[i];
                        p[(i, j)] = v.max(0.0);
                    }
                }
                Ok(p)
            }
            Propagator::Series(q) => Ok(expm_series(q, delta)),
        }
    }
}

/// `exp(delta Q)`: symmetric eigendecomposition for reversible generators,
/// scaling-and-squaring with a truncated Taylor series otherwise.
pub fn matrix_exponential(rate: &RateMatrix, delta: f64) -> Result<DMatrix<f64>> {
    rate.propagator().transition(delta)
}

pub(crate) fn expm_series(q: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let n = q.nrows();
    let a = q * delta;
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Maps GTR weights to the chain-GTR weights giving the same rate matrix:
/// `wu* = wu` and `wb* = B wb` with `B_ij = (-1)^(i+j)` on and below the diagonal.
pub fn gtr_to_chain_weights(w: &WeightVector) -> WeightVector {
    // Forward substitution of wb*_1 = wb_1, wb*_{k-1} + wb*_k = wb_k.
    let mut wb = Vec::with_capacity(w.wb.len());
    let mut prev = 0.0;
    for (k, &target) in w.wb.iter().enumerate() {
        let v = if k == 0 { target } else { target - prev };
        wb.push(v);
        prev = v;
    }
    WeightVector { wu: w.wu.clone(), wb, kappa: w.kappa }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_weights(f: &FeatureSet, rng: &mut ChaCha8Rng) -> WeightVector {
        WeightVector::sample_prior(f, 1.0, rng)
    }

    #[test]
    fn state_space_rejects_duplicates_and_singletons() {
        assert!(StateSpace::new(["A", "A"]).is_err());
        assert!(StateSpace::new(["A"]).is_err());
        let s = StateSpace::dna();
        assert_eq!(s.index_of("G"), Some(2));
    }

    #[test]
    fn ordering_rejects_non_bijection() {
        assert!(PairOrdering::from_ranked_pairs(3, &[(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(PairOrdering::from_ranked_pairs(3, &[(0, 1), (1, 2)]).is_err());
        let o = PairOrdering::from_ranked_pairs(3, &[(2, 1), (0, 2), (1, 0)]).unwrap();
        assert_eq!(o.eta(1, 2), 1);
        assert_eq!(o.eta(2, 1), 1);
        assert_eq!(o.rank(0, 1), 2);
    }

    #[test]
    fn zero_weights_give_uniform_pi_and_unit_theta() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(5));
        let pi = stationary_dist(&[0.0; 5], &f).unwrap();
        pi.iter().for_each(|&p| assert_close!(p, 0.2, 1e-15));
        let theta = exchangeable_params(&vec![0.0; 10], &f).unwrap();
        assert!(theta.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn two_state_softmax() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(2));
        let pi = stationary_dist(&[2f64.ln(), 0.0], &f).unwrap();
        assert_close!(pi[0], 2.0 / 3.0, 1e-15);
        assert_close!(pi[1], 1.0 / 3.0, 1e-15);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(3));
        let pi = stationary_dist(&[1000.0, 999.0, -1000.0], &f).unwrap();
        assert!(pi.iter().all(|p| p.is_finite()));
        assert_close!(pi.iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(4));
        assert!(matches!(stationary_dist(&[0.0; 3], &f), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(exchangeable_params(&[0.0; 5], &f), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chain_theta_cases() {
        let f = FeatureSet::chain(PairOrdering::lexicographic(4));
        let (a, b) = (0.3, -1.1);
        let mut wb = vec![0.0; 6];
        wb[0] = a;
        wb[1] = b;
        let theta = exchangeable_params(&wb, &f).unwrap();
        assert_close!(theta[1], (a + b).exp(), 1e-15);
        assert_close!(theta[0], a.exp(), 1e-15);
    }

    #[test]
    fn chain_feature_structure() {
        let f = FeatureSet::chain(PairOrdering::lexicographic(6));
        assert_eq!(f.phi_rank(0).len(), 1);
        for r in 1..f.p2() {
            let idx: Vec<usize> = f.phi_rank(r).iter().map(|e| e.0).collect();
            assert_eq!(idx, vec![r - 1, r]);
        }
        // Each feature index is active on at most two pairs.
        let mut col = vec![0; f.p2()];
        for r in 0..f.p2() {
            for &(k, _) in f.phi_rank(r) {
                col[k] += 1;
            }
        }
        assert!(col.iter().all(|&c| c <= 2));
        assert_eq!(col[f.p2() - 1], 1);
    }

    #[test]
    fn gtr_features_are_one_hot() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(4));
        assert_eq!(f.p2(), 6);
        for x in 0..4 {
            for y in 0..4 {
                if x != y {
                    assert_eq!(f.phi(x, y), f.phi(y, x));
                    assert_eq!(f.phi(x, y).iter().map(|e| e.1).sum::<f64>(), 1.0);
                }
            }
        }
    }

    #[test]
    fn uniform_rate_matrix() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(4));
        let q = build_rate_matrix(&WeightVector::zeros(&f, 1.0), &f).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let want = if x == y { -0.75 } else { 0.25 };
                assert_close!(q.rate(x, y), want, 1e-15);
            }
        }
    }

    #[test]
    fn gtr_entries_match_scalar_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = FeatureSet::gtr(PairOrdering::lexicographic(5));
        let w = random_weights(&f, &mut rng);
        let q = build_rate_matrix(&w, &f).unwrap();
        let z: f64 = w.wu.iter().map(|u| u.exp()).sum();
        for x in 0..5 {
            for y in 0..5 {
                if x != y {
                    let pi_y = w.wu[y].exp() / z;
                    let want = w.wb[f.ordering().rank(x, y)].exp() * pi_y;
                    assert_close!(q.rate(x, y), want, 1e-13);
                }
            }
        }
    }

    #[test]
    fn gtr_to_chain_conversion_example() {
        let w = WeightVector::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(gtr_to_chain_weights(&w).wb, vec![1.0, 1.0, 2.0]);
        let z = WeightVector::new(vec![0.0; 3], vec![0.0; 3], 1.0).unwrap();
        assert_eq!(gtr_to_chain_weights(&z).wb, vec![0.0; 3]);
    }

    #[test]
    fn conversion_matches_triangular_matrix() {
        let wb = [0.4, -1.3, 2.2, 0.7, -0.1];
        let w = WeightVector::new(vec![0.0; 2], wb.to_vec(), 1.0).unwrap();
        let got = gtr_to_chain_weights(&w).wb;
        for i in 0..wb.len() {
            let want: f64 = (0..=i).map(|j| if (i + j) % 2 == 0 { wb[j] } else { -wb[j] }).sum();
            assert_close!(got[i], want, 1e-14);
        }
    }

    #[test]
    fn two_state_exponential_closed_form() {
        let q = RateMatrix::from_generator(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]))
            .unwrap();
        assert!(q.is_reversible());
        for &t in &[0.0, 0.1, 0.5, 2.0, 7.0] {
            let p = matrix_exponential(&q, t).unwrap();
            assert_close!(p[(0, 0)], (1.0 + (-2.0 * t).exp()) / 2.0, 1e-13);
            let s = expm_series(q.q(), t);
            assert_close!(s[(0, 0)], p[(0, 0)], 1e-12);
        }
    }

    #[test]
    fn exponential_rejects_negative_time() {
        let f = FeatureSet::gtr(PairOrdering::lexicographic(3));
        let q = build_rate_matrix(&WeightVector::zeros(&f, 1.0), &f).unwrap();
        assert!(matrix_exponential(&q, -0.1).is_err());
        let p = matrix_exponential(&q, 0.0).unwrap();
        assert_eq!(p, DMatrix::identity(3, 3));
    }

    #[test]
    fn non_reversible_generator_uses_series() {
        // A cyclic chain 0 -> 1 -> 2 -> 0 violates detailed balance.
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0]);
        let r = RateMatrix::from_generator(q).unwrap();
        assert!(!r.is_reversible());
        let p = r.transition_matrix(0.8).unwrap();
        for i in 0..3 {
            assert_close!(p.row(i).sum(), 1.0, 1e-12);
            assert_close!(r.pi()[i], 1.0 / 3.0, 1e-12);
        }
    }
}
