use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lbps_ctmc::diagnostics::generate_data;
use lbps_ctmc::hmc::HmcConfig;
use lbps_ctmc::inference::{run_chain, Kernel, RunConfig};
use lbps_ctmc::ratematrix::{build_rate_matrix, exchangeable_params};
use lbps_ctmc::{FeatureSet, PairOrdering, WeightVector};

fn recovers_truth(kernel: Kernel, seed: u64) {
    let f = FeatureSet::chain(PairOrdering::lexicographic(3));
    let truth = WeightVector::new(vec![0.3, -0.2, 0.1], vec![0.4, -0.1, 0.2], 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = generate_data(&truth, &f, 600, 3.0, 0.5, &mut rng).unwrap();
    let cfg = RunConfig {
        kernel,
        iterations: 600,
        trajectory_length: 0.5,
        hmc: HmcConfig { steps: 20, step_size: 0.02 },
        seed,
        ..RunConfig::default()
    };
    let out = run_chain(&data, &f, &cfg).unwrap();
    let theta = out.theta_means(&f).unwrap();
    let want = exchangeable_params(&truth.wb, &f).unwrap();
    for (a, b) in theta.iter().zip(&want) {
        assert!((a - b).abs() / b < 0.2, "{kernel:?}: theta {theta:?} vs {want:?}");
    }
    let pi: Vec<Vec<f64>> = out.pi_samples(&f).unwrap();
    let kept = &pi[out.burn_in_index()..];
    let true_pi = build_rate_matrix(&truth, &f).unwrap().pi().to_vec();
    for k in 0..3 {
        let m = kept.iter().map(|p| p[k]).sum::<f64>() / kept.len() as f64;
        assert!((m - true_pi[k]).abs() < 0.05, "{kernel:?}: pi_{k} {m} vs {}", true_pi[k]);
    }
}

#[test]
fn lbps_hmc_recovers_generating_rates() {
    recovers_truth(Kernel::LbpsHmc, 11);
}

#[test]
fn hmc_recovers_generating_rates() {
    recovers_truth(Kernel::HmcOnly, 12);
}
