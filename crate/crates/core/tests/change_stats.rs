//! Change statistics against a naive recount, plus relabelling invariance
//! and closed-form values of the shared-partner terms.

use dpm_ergm::graph::{EdgeAttr, NodeAttr};
use dpm_ergm::stats::{change_stats, compute_stats};
use dpm_ergm::{Covariates, Graph, ModelSpec, StatTerm};
use proptest::prelude::*;

const DECAY: f64 = 0.7;

fn all_terms(directed: bool) -> ModelSpec {
    let mut terms = vec![
        StatTerm::edges(),
        StatTerm::nodematch("colour"),
        StatTerm::edgecov("dist"),
        StatTerm::gwesp(DECAY),
        StatTerm::gwdsp(DECAY),
    ];
    terms.push(if directed {
        StatTerm::mutual()
    } else {
        StatTerm::triangles()
    });
    ModelSpec::new(terms).unwrap()
}

fn covariates(n: usize, colours: &[u8], dist: &[f64]) -> Covariates {
    let colours: Vec<String> = colours[..n].iter().map(|c| c.to_string()).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| dist[i * n..(i + 1) * n].to_vec()).collect();
    Covariates::new()
        .with_node_attr("colour", NodeAttr::categorical(&colours))
        .with_edge_attr("dist", EdgeAttr::from_rows(&rows).unwrap())
}

fn linked(g: &Graph, a: usize, b: usize) -> bool {
    g.has_edge(a, b) || g.has_edge(b, a)
}

fn shared(g: &Graph, a: usize, b: usize) -> usize {
    (0..g.n())
        .filter(|&t| t != a && t != b && linked(g, a, t) && linked(g, b, t))
        .count()
}

fn gw(k: usize) -> f64 {
    DECAY.exp() * (1.0 - (1.0 - (-DECAY).exp()).powi(k as i32))
}

/// Statistics counted straight from the definitions.
fn naive(g: &Graph, colours: &[u8], dist: &[f64]) -> Vec<f64> {
    let n = g.n();
    let arcs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && g.has_edge(i, j) && (g.is_directed() || i < j))
        .collect();
    let edges = arcs.len() as f64;
    let nodematch = arcs.iter().filter(|&&(i, j)| colours[i] == colours[j]).count() as f64;
    let edgecov: f64 = arcs
        .iter()
        .map(|&(i, j)| {
            if g.is_directed() {
                dist[i * n + j]
            } else {
                dist[i.min(j) * n + i.max(j)]
            }
        })
        .sum();
    let gwesp: f64 = arcs.iter().map(|&(i, j)| gw(shared(g, i, j))).sum();
    let mut gwdsp = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            gwdsp += gw(shared(g, i, j));
        }
    }
    let last = if g.is_directed() {
        arcs.iter().filter(|&&(i, j)| i < j && g.has_edge(j, i)).count() as f64
    } else {
        let mut t = 0;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if g.has_edge(a, b) && g.has_edge(b, c) && g.has_edge(a, c) {
                        t += 1;
                    }
                }
            }
        }
        t as f64
    };
    vec![edges, nodematch, edgecov, gwesp, gwdsp, last]
}

fn build(n: usize, directed: bool, mask: &[bool]) -> Graph {
    let empty = Graph::empty(n, directed).unwrap();
    let edges: Vec<_> = empty.dyads().zip(mask).filter(|(_, &on)| on).map(|(d, _)| d).collect();
    Graph::from_edges(n, directed, &edges).unwrap()
}

fn case() -> impl Strategy<Value = (usize, bool, Vec<bool>, Vec<u8>, Vec<f64>, usize)> {
    (3usize..=10, any::<bool>()).prop_flat_map(|(n, directed)| {
        let dyads = if directed { n * (n - 1) } else { n * (n - 1) / 2 };
        (
            Just(n),
            Just(directed),
            prop::collection::vec(prop::bool::weighted(0.4), dyads),
            prop::collection::vec(0u8..3, 10),
            prop::collection::vec(-2.0f64..2.0, 100),
            0..dyads,
        )
    })
}

fn assert_close(a: &[f64], b: &[f64]) {
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{a:?} vs {b:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn change_equals_difference_of_recounts((n, directed, mask, colours, dist, pick) in case()) {
        let g = build(n, directed, &mask);
        let cov = covariates(n, &colours, &dist);
        let spec = all_terms(directed);
        let (r, s) = g.dyads().nth(pick).unwrap();
        let mut on = g.clone();
        on.set_edge(r, s, true);
        let mut off = g.clone();
        off.set_edge(r, s, false);
        let expected: Vec<f64> = naive(&on, &colours, &dist)
            .iter()
            .zip(naive(&off, &colours, &dist))
            .map(|(a, b)| a - b)
            .collect();
        assert_close(&change_stats(&spec, &g, &cov, r, s).unwrap(), &expected);
        assert_close(&compute_stats(&spec, &g, &cov).unwrap(), &naive(&g, &colours, &dist));
    }

    #[test]
    fn statistics_invariant_under_relabelling(
        (n, directed, mask, colours, dist, _pick) in case(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let g = build(n, directed, &mask);
        // an undirected dyad has one covariate value, so the matrix must be symmetric
        let dist: Vec<f64> = (0..100)
            .map(|k| if directed || k / 10 <= k % 10 { dist[k] } else { dist[(k % 10) * 10 + k / 10] })
            .collect();
        let dist: Vec<f64> = (0..n * n).map(|k| dist[(k / n) * 10 + k % n]).collect();
        let cov = covariates(n, &colours, &dist);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let spec = all_terms(directed);
        let moved = g.permuted(&perm).unwrap();
        let moved_cov = cov.permuted(&inverse);
        assert_close(
            &compute_stats(&spec, &moved, &moved_cov).unwrap(),
            &compute_stats(&spec, &g, &cov).unwrap(),
        );
    }
}

#[test]
fn gwesp_of_triangle_and_gwdsp_of_star() {
    let cov = Covariates::new();
    let tri = Graph::from_edges(3, false, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let s = compute_stats(&ModelSpec::new(vec![StatTerm::gwesp(DECAY)]).unwrap(), &tri, &cov).unwrap();
    // three edges with one shared partner each
    assert!((s[0] - 3.0 * DECAY.exp() * (-DECAY).exp()).abs() < 1e-12);
    assert!((s[0] - 3.0).abs() < 1e-12);
    let star = Graph::from_edges(5, false, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let s = compute_stats(&ModelSpec::new(vec![StatTerm::gwdsp(DECAY)]).unwrap(), &star, &cov).unwrap();
    // the six leaf pairs share the hub
    assert!((s[0] - 6.0).abs() < 1e-12);
}
