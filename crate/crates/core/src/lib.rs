//! Bayesian inference for continuous-time Markov chain rate matrices.
//!
//! Reversible rate matrices are parameterised as a GLM over univariate
//! (stationary distribution) and bivariate (exchangeable rate) features.
//! Posterior sampling alternates end-point conditioned path augmentation with
//! an HMC update of the univariate weights and a local bouncy particle sampler
//! (LBPS) update of the bivariate weights. Bounce times for every factor of the
//! augmented posterior are available in closed form, so the LBPS engine never
//! needs thinning.
//!
//! Module map:
//!
//! - [`ratematrix`]: feature systems, rate matrix construction, exponentials
//! - [`paths`]: path simulation, sufficient statistics, end-point sampling
//! - [`factorgraph`]: factor graph of the augmented posterior and sparsity profiling
//! - [`bps`]: global and local bouncy particle samplers
//! - [`hmc`]: leapfrog HMC and the weight gradients
//! - [`inference`]: the LBPS-HMC and HMC-only chains
//! - [`diagnostics`]: ESS, ARD, KS tests and the exact invariance test
//! - [`aa`]: Grantham distances and the nearest-neighbour pair ordering
//! - [`io`]: text formats shared by the CLI and the C API

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod aa;
pub mod bps;
pub mod diagnostics;
pub mod error;
pub mod factorgraph;
pub mod hmc;
pub mod inference;
pub mod io;
pub mod paths;
pub mod ratematrix;

pub use error::{Error, Result};
pub use ratematrix::{FeatureKind, FeatureSet, PairOrdering, RateMatrix, StateSpace, WeightVector};
