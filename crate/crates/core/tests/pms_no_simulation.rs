//! The pseudo-likelihood sampler never runs a graph simulation. Kept in
//! its own test binary so the process-wide chain counter sees nothing else.

use dpm_ergm::dpm::{Covariance, DpmConfig};
use dpm_ergm::pseudo::run_pms;
use dpm_ergm::ratio::RatioConfig;
use dpm_ergm::simulate::chains_started;
use dpm_ergm::{Ensemble, Graph, ModelSpec, StatTerm};

#[test]
fn pms_starts_no_chains() {
    let graphs: Vec<Graph> = (0..8)
        .map(|k| {
            let edges: Vec<(usize, usize)> = (0..9)
                .flat_map(|i| (i + 1..9).map(move |j| (i, j)))
                .filter(|&(i, j)| (i + 2 * j + k) % 4 == 0)
                .collect();
            Graph::from_edges(9, false, &edges).unwrap()
        })
        .collect();
    let ens = Ensemble::from_graphs(graphs).unwrap();
    let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::gwesp(0.5)]).unwrap();
    let cfg = DpmConfig {
        beta: 1.0,
        mu0: vec![-1.0, 0.0],
        sigma0: Covariance::isotropic(2, 3.0),
        proposal_cov: Covariance::isotropic(2, 0.1),
        ratio_mmcmh: RatioConfig::mmcmh_default(),
        ratio_alloc: RatioConfig::alloc_default(),
        iterations: 200,
        burn_in: 0,
        seed: 4,
        theta0: vec![-1.0, 0.0],
    };
    let before = chains_started();
    let trace = run_pms(&ens, &spec, &cfg).unwrap();
    assert_eq!(trace.len(), 200);
    assert_eq!(chains_started(), before);
}
