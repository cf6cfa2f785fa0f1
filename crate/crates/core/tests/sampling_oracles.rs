//! Simulator, ratio estimator and generator against closed forms and
//! enumeration.

use dpm_ergm::ratio::{estimate_log_ratio, make_path, RatioConfig};
use dpm_ergm::rng::Stream;
use dpm_ergm::simulate::{exact_distribution, simulate_ergm, ChainLength, SimConfig};
use dpm_ergm::synth::{draw_labels, generate, MixtureSpec};
use dpm_ergm::{Covariates, Graph, ModelSpec, StatTerm};

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn bernoulli_dyad_frequencies() {
    let spec = ModelSpec::new(vec![StatTerm::edges()]).unwrap();
    let cov = Covariates::new();
    let start = Graph::empty(6, false).unwrap();
    let draws = 20_000;
    let graphs = simulate_ergm(
        &spec,
        &[-0.5],
        &start,
        &cov,
        draws,
        &SimConfig::new(300, 30, 8).unwrap(),
    )
    .unwrap();
    let p = logistic(-0.5);
    let sd = (p * (1.0 - p) / draws as f64).sqrt();
    for (r, s) in start.dyads() {
        let freq = graphs.iter().filter(|g| g.has_edge(r, s)).count() as f64 / draws as f64;
        assert!((freq - p).abs() < 5.0 * sd, "dyad ({r}, {s}): {freq} vs {p}");
    }
}

#[test]
fn directed_simulator_matches_enumeration() {
    let spec = ModelSpec::new(vec![StatTerm::edges(), StatTerm::mutual()]).unwrap();
    let cov = Covariates::new();
    let theta = [-0.3, 0.8];
    let (space, exact) = exact_distribution(&spec, &theta, 3, true, &cov).unwrap();
    let draws = 200_000;
    let start = Graph::empty(3, true).unwrap();
    let graphs = simulate_ergm(&spec, &theta, &start, &cov, draws, &SimConfig::new(100, 6, 2).unwrap()).unwrap();
    let mut counts = vec![0usize; space.len()];
    for g in &graphs {
        counts[space.index_of(g)] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact.probs)
            .map(|(&c, p)| (c as f64 / draws as f64 - p).abs())
            .sum::<f64>();
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn ratio_matches_bernoulli_closed_form() {
    // k(theta) = (1 + e^theta)^D for the edges-only model
    let spec = ModelSpec::new(vec![StatTerm::edges()]).unwrap();
    let cov = Covariates::new();
    let n = 10;
    let bound = spec.bind(&cov, n, false).unwrap();
    let start = Graph::empty(n, false).unwrap();
    let dyads = 45.0;
    let cfg = RatioConfig::new(5, 200).unwrap();
    for (k, (a, b)) in [(-1.0, -0.6), (0.2, -0.3), (-2.0, -1.0)].into_iter().enumerate() {
        let path = make_path(&[a], &[b], cfg.m1).unwrap();
        let est = estimate_log_ratio(&bound, &path, &start, &cfg, Stream::new(k as u64)).unwrap();
        let exact = dyads * ((1.0 + f64::exp(b)).ln() - (1.0 + f64::exp(a)).ln());
        assert!((est - exact).abs() < 0.1, "{a} -> {b}: {est} vs {exact}");
    }
}

#[test]
fn label_frequencies_follow_weights() {
    let weights = [0.2, 0.5, 0.3];
    let draws = 10_000;
    let labels = draw_labels(&weights, draws, Stream::new(77));
    let chi2: f64 = weights
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let observed = labels.iter().filter(|&&z| z == j + 1).count() as f64;
            let expected = w * draws as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    // 1% critical value of chi-square with 2 degrees of freedom
    assert!(chi2 < 9.21, "chi-square {chi2}");
}

#[test]
fn generated_bernoulli_component_dyad_frequencies() {
    let ms = MixtureSpec {
        spec: ModelSpec::new(vec![StatTerm::edges(), StatTerm::triangles()]).unwrap(),
        weights: vec![1.0],
        thetas: vec![vec![-0.7, 0.0]],
        n: 6,
        directed: false,
        networks: 3000,
        seed: 12,
        categorical: Default::default(),
    };
    let ens = generate(&ms, &ChainLength::default()).unwrap();
    let p = logistic(-0.7);
    let sd = (p * (1.0 - p) / 3000.0).sqrt();
    for (r, s) in ens.graph(0).dyads() {
        let freq = ens.graphs().iter().filter(|g| g.has_edge(r, s)).count() as f64 / 3000.0;
        assert!((freq - p).abs() < 5.0 * sd, "dyad ({r}, {s}): {freq} vs {p}");
    }
}
