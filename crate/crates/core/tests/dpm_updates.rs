//! Conditional updates of the slice sampler against their full conditionals.

use dpm_ergm::dpm::{
    allocation_probabilities, run_iims, update_sticks, update_u, update_z, Center, Context, Covariance, DpmConfig,
    Gaussian, SamplerState, TrueLikelihood,
};
use dpm_ergm::pseudo::run_pms;
use dpm_ergm::ratio::{ExactRatio, RatioConfig};
use dpm_ergm::rng::Stream;
use dpm_ergm::simulate::ChainLength;
use dpm_ergm::stats::compute_stats;
use dpm_ergm::{Covariates, Ensemble, Graph, ModelSpec, StatTerm};

fn edges_triangles() -> ModelSpec {
    ModelSpec::new(vec![StatTerm::edges(), StatTerm::triangles()]).unwrap()
}

fn small_ensemble() -> Ensemble {
    let graphs = vec![
        Graph::from_edges(4, false, &[(0, 1)]).unwrap(),
        Graph::from_edges(4, false, &[(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap(),
        Graph::from_edges(4, false, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)]).unwrap(),
    ];
    Ensemble::from_graphs(graphs).unwrap()
}

fn exact_lik(spec: &ModelSpec, center: Center) -> TrueLikelihood<ExactRatio, ExactRatio> {
    let cov = Covariates::new();
    TrueLikelihood {
        mmcmh: ExactRatio::new(spec, 4, false, &cov).unwrap(),
        alloc: ExactRatio::new(spec, 4, false, &cov).unwrap(),
        center,
    }
}

fn two_component_state(n: usize) -> SamplerState {
    let mut s = SamplerState::single_component(n, vec![-1.0, 0.2]);
    s.theta.push(vec![0.5, -0.4]);
    s.v = vec![0.45, 0.6];
    s.recompute_weights();
    s.z = (0..n).map(|i| 1 + i % 2).collect();
    // candidate set {1, 2} for every network
    s.u = vec![(-2.5f64).exp(); n];
    s
}

#[test]
fn slice_variable_mean() {
    let ens = Ensemble::from_graphs(vec![Graph::empty(3, false).unwrap()]).unwrap();
    let ctx = Context::new(&ens, &edges_triangles()).unwrap();
    let mut s = SamplerState::single_component(1, vec![0.0, 0.0]);
    let draws = 100_000;
    let mut total = 0.0;
    for t in 0..draws {
        update_u(&mut s, &ctx, Stream::new(t));
        total += s.u[0];
    }
    let expected = (-1.0f64).exp() / 2.0;
    assert!((total / draws as f64 - expected).abs() < 0.01 * expected);
}

#[test]
fn stick_means_match_beta_posterior() {
    let beta = 0.5;
    let mut s = SamplerState::single_component(10, vec![0.0]);
    s.theta = vec![vec![0.0]; 3];
    s.v = vec![0.5; 3];
    s.recompute_weights();
    s.z = vec![1, 1, 1, 1, 1, 2, 2, 2, 3, 3];
    let (a, b) = ([5.0, 3.0, 2.0], [5.0, 2.0, 0.0]);
    let draws = 100_000;
    let mut sums = [0.0; 3];
    for t in 0..draws {
        update_sticks(&mut s, beta, Stream::new(t)).unwrap();
        for j in 0..3 {
            sums[j] += s.v[j];
        }
        assert_eq!(s.w, dpm_ergm::dpm::stick_weights(&s.v));
    }
    for j in 0..3 {
        let expected = (1.0 + a[j]) / (1.0 + a[j] + beta + b[j]);
        assert!(
            (sums[j] / draws as f64 - expected).abs() < 0.01 * expected,
            "component {}",
            j + 1
        );
    }
}

#[test]
fn all_in_one_component_sticks() {
    let beta = 0.1;
    let mut s = SamplerState::single_component(40, vec![0.0]);
    let draws = 50_000;
    let mut total = 0.0;
    for t in 0..draws {
        update_sticks(&mut s, beta, Stream::new(t)).unwrap();
        total += s.v[0];
    }
    let expected = 41.0 / (41.0 + beta);
    assert!((total / draws as f64 - expected).abs() < 0.01 * expected);
}

/// `P(z_i = j | u) ∝ (w_j / xi_j) exp(theta_j . S_i) / k(theta_j)` by
/// enumeration, for `u_i` below `xi_2`.
fn exact_allocation(spec: &ModelSpec, ens: &Ensemble, s: &SamplerState) -> Vec<Vec<f64>> {
    let cov = Covariates::new();
    let space = dpm_ergm::simulate::StateSpace::new(spec, 4, false, &cov).unwrap();
    (0..ens.len())
        .map(|i| {
            let stats = compute_stats(spec, ens.graph(i), &cov).unwrap();
            let logs: Vec<f64> = (0..2)
                .map(|j| {
                    let t = &s.theta[j];
                    s.w[j].ln() + (j + 1) as f64 + t[0] * stats[0] + t[1] * stats[1] - space.log_normalizer(t)
                })
                .collect();
            let m = logs[0].max(logs[1]);
            let total: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            logs.iter().map(|l| (l - m).exp() / total).collect()
        })
        .collect()
}

#[test]
fn allocation_matches_enumerated_posterior() {
    let spec = edges_triangles();
    let ens = small_ensemble();
    let ctx = Context::new(&ens, &spec).unwrap();
    let lik = exact_lik(&spec, Center::OccupancyMean);
    let base = two_component_state(ens.len());
    let exact = exact_allocation(&spec, &ens, &base);

    let probs = allocation_probabilities(&base, &ctx, &lik, Stream::new(0)).unwrap();
    for (p, e) in probs.iter().zip(&exact) {
        for (a, b) in p.iter().zip(e) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    let prior = Gaussian::new(&[0.0, 0.0], &Covariance::isotropic(2, 1.0)).unwrap();
    let draws = 100_000;
    let mut counts = vec![[0usize; 2]; ens.len()];
    for t in 0..draws {
        let mut s = base.clone();
        update_z(&mut s, &ctx, &lik, &prior, 0.5, Stream::new(t)).unwrap();
        s.check_invariants().unwrap();
        for (i, &z) in s.z.iter().enumerate() {
            counts[i][z - 1] += 1;
        }
    }
    for (i, c) in counts.iter().enumerate() {
        let tv = 0.5
            * (0..2)
                .map(|j| (c[j] as f64 / draws as f64 - exact[i][j]).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "network {i}: total variation {tv}");
    }
}

#[test]
fn allocation_invariant_to_reference_parameter() {
    let spec = edges_triangles();
    let ens = small_ensemble();
    let ctx = Context::new(&ens, &spec).unwrap();
    let s = two_component_state(ens.len());
    let reference =
        allocation_probabilities(&s, &ctx, &exact_lik(&spec, Center::OccupancyMean), Stream::new(0)).unwrap();
    for c in [vec![0.0, 0.0], vec![-3.0, 1.5], vec![2.0, -2.0]] {
        let other = allocation_probabilities(&s, &ctx, &exact_lik(&spec, Center::Fixed(c)), Stream::new(0)).unwrap();
        for (p, q) in reference.iter().zip(&other) {
            for (a, b) in p.iter().zip(q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

fn config(iterations: usize, seed: u64) -> DpmConfig {
    DpmConfig {
        beta: 0.1,
        mu0: vec![-1.0, 0.0],
        sigma0: Covariance::isotropic(2, 2.0),
        proposal_cov: Covariance::isotropic(2, 0.1),
        ratio_mmcmh: RatioConfig::mmcmh_default(),
        ratio_alloc: RatioConfig::alloc_default(),
        iterations,
        burn_in: 0,
        seed,
        theta0: vec![-1.0, 0.0],
    }
}

#[test]
fn single_iteration_gives_one_record() {
    let trace = run_iims(&small_ensemble(), &edges_triangles(), &config(1, 3)).unwrap();
    assert_eq!(trace.len(), 1);
    assert!(trace[0].k_star >= 1);
    assert_eq!(trace[0].z.len(), 3);
}

fn ensemble_of(graphs: Vec<Graph>) -> Ensemble {
    Ensemble::from_graphs(graphs).unwrap()
}

#[test]
fn exchangeable_under_reordering() {
    let spec = edges_triangles();
    let ms = dpm_ergm::synth::MixtureSpec {
        spec: spec.clone(),
        weights: vec![0.5, 0.5],
        thetas: vec![vec![-2.0, 0.3], vec![0.0, 0.0]],
        n: 7,
        directed: false,
        networks: 6,
        seed: 11,
        categorical: Default::default(),
    };
    let ens = dpm_ergm::synth::generate(&ms, &ChainLength::default()).unwrap();
    let order = [3, 0, 5, 1, 4, 2];
    let moved = ensemble_of(order.iter().map(|&k| ens.graph(k).clone()).collect());
    let ids: Vec<u64> = order.iter().map(|&k| k as u64).collect();
    let cfg = config(30, 5);

    let run = |e: &Ensemble, ids: Vec<u64>, pseudo: bool| {
        let ctx = Context::new(e, &spec).unwrap().with_stream_ids(ids).unwrap();
        let mut out = Vec::new();
        if pseudo {
            let lik = dpm_ergm::pseudo::PseudoLikelihood::new(&ctx).unwrap();
            let mut sampler = dpm_ergm::dpm::Sampler::new(&ctx, lik, &cfg).unwrap();
            sampler.run(|r| Ok(out.push(r.z.clone()))).unwrap();
        } else {
            let lik = TrueLikelihood::from_config(&cfg);
            let mut sampler = dpm_ergm::dpm::Sampler::new(&ctx, lik, &cfg).unwrap();
            sampler.run(|r| Ok(out.push(r.z.clone()))).unwrap();
        }
        out
    };
    for pseudo in [true, false] {
        let a = run(&ens, (0..6).collect(), pseudo);
        let b = run(&moved, ids.clone(), pseudo);
        for (za, zb) in a.iter().zip(&b) {
            let permuted: Vec<usize> = order.iter().map(|&k| za[k]).collect();
            assert_eq!(&permuted, zb);
        }
    }
}

#[test]
fn identical_graphs_share_one_component() {
    let g = Graph::from_edges(8, false, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (5, 6)]).unwrap();
    let ens = ensemble_of(vec![g; 10]);
    let trace = run_iims(&ens, &edges_triangles(), &config(300, 9)).unwrap();
    let summary = dpm_ergm::assess::summarize_trace(&trace, 100, None).unwrap();
    assert_eq!(summary.modal_k_star, 1);
}

#[test]
fn pseudo_and_true_likelihood_agree_for_edges_only() {
    // with a dyad-independent model both samplers target the same posterior
    let spec = ModelSpec::new(vec![StatTerm::edges()]).unwrap();
    let graphs: Vec<Graph> = (0..6)
        .map(|k| {
            let edges: Vec<(usize, usize)> = (0..8)
                .flat_map(|i| (i + 1..8).map(move |j| (i, j)))
                .filter(|&(i, j)| (i * 7 + j * 3 + k) % 5 == 0)
                .collect();
            Graph::from_edges(8, false, &edges).unwrap()
        })
        .collect();
    let ens = ensemble_of(graphs);
    let mut cfg = config(3000, 2);
    cfg.mu0 = vec![-1.0];
    cfg.theta0 = vec![-1.0];
    cfg.sigma0 = Covariance::isotropic(1, 2.0);
    cfg.proposal_cov = Covariance::isotropic(1, 0.3);
    cfg.burn_in = 500;
    let mean = |trace: &[dpm_ergm::trace::TraceRecord]| {
        let kept = &trace[500..];
        kept.iter()
            .map(|r| {
                r.components
                    .iter()
                    .map(|c| c.theta[0] * c.occupancy as f64)
                    .sum::<f64>()
                    / 6.0
            })
            .sum::<f64>()
            / kept.len() as f64
    };
    let a = mean(&run_pms(&ens, &spec, &cfg).unwrap());
    let b = mean(&run_iims(&ens, &spec, &cfg).unwrap());
    assert!((a - b).abs() < 0.1, "pseudo {a} vs true {b}");
}
