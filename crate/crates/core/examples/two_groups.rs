//! Fits the two-group synthetic benchmark with both samplers and prints
//! the recovered partition.
//!
//! Usage: `cargo run --release --example two_groups -- [iterations] [seed]`

use std::time::Instant;

use dpm_ergm::assess::{adjusted_rand_index, summarize_trace};
use dpm_ergm::dpm::{run_iims, Covariance, DpmConfig};
use dpm_ergm::pseudo::run_pms;
use dpm_ergm::ratio::RatioConfig;
use dpm_ergm::simulate::ChainLength;
use dpm_ergm::synth::{generate, MixtureSpec};
use dpm_ergm::{ModelSpec, StatTerm};

fn main() -> dpm_ergm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let iterations: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(12000);
    let seed: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1);
    let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::triangles()])?;
    let ms = MixtureSpec {
        spec: spec.clone(),
        weights: vec![0.5, 0.5],
        thetas: vec![vec![-3.0, 0.9], vec![-1.0, 0.0]],
        n: 30,
        directed: false,
        networks: 40,
        seed,
        categorical: Default::default(),
    };
    let ensemble = generate(&ms, &ChainLength::default())?;
    let truth = ensemble.truth().unwrap().to_vec();
    let cfg = DpmConfig {
        beta: 0.1,
        mu0: vec![-3.0, 0.0],
        sigma0: Covariance::isotropic(2, 4.0),
        proposal_cov: Covariance::isotropic(2, 0.05),
        ratio_mmcmh: RatioConfig::mmcmh_default(),
        ratio_alloc: RatioConfig::alloc_default(),
        iterations,
        burn_in: iterations / 6,
        seed,
        theta0: vec![-2.0, 0.0],
    };
    for (name, run) in [("pms", run_pms as fn(_, _, _) -> _), ("iims", run_iims)] {
        let start = Instant::now();
        let trace = run(&ensemble, &spec, &cfg)?;
        let s = summarize_trace(&trace, cfg.burn_in, Some(&spec.names()))?;
        let occupied = s
            .occupied_histogram
            .iter()
            .max_by_key(|(_, c)| **c)
            .map(|(k, _)| *k)
            .unwrap_or(0);
        println!(
            "{name}: {:.1}s modal k_star {} modal occupied {occupied} ARI {:.3}",
            start.elapsed().as_secs_f64(),
            s.modal_k_star,
            adjusted_rand_index(&s.modal_assignment, &truth)
        );
        for b in &s.blocks {
            println!(
                "  block {} ({} networks): theta {:?} acceptance {:?}",
                b.block,
                b.members.len(),
                b.theta_mean,
                b.acceptance_rate
            );
        }
    }
    Ok(())
}
