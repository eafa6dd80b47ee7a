//! Statistical checks on the graph samplers. Seeds are fixed, so each check is
//! deterministic; thresholds sit at roughly five standard errors.

use sbm_thresholds::detection::Labeling;
use sbm_thresholds::graph::{sample_er, sample_sbm, sample_sbm_fixed_m, Graph};
use sbm_thresholds::ModelParams;

fn degrees(g: &Graph) -> Vec<usize> {
    let mut d: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
    d.sort_unstable();
    d
}

/// Two-sample Kolmogorov-Smirnov statistic on sorted integer samples.
fn ks_statistic(a: &[usize], b: &[usize]) -> f64 {
    let top = a.last().copied().unwrap_or(0).max(b.last().copied().unwrap_or(0));
    let cdf = |s: &[usize], x: usize| s.partition_point(|&y| y <= x) as f64 / s.len() as f64;
    (0..=top).map(|x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
}

#[test]
fn edge_count_matches_expectation() {
    let n = 40_000;
    for (seed, (q, d, lambda)) in [(1u64, (2, 3.0, 0.5)), (2, (5, 6.0, -0.2)), (3, (3, 1.5, 0.9))] {
        let p = ModelParams::symmetric(q, d, lambda).unwrap();
        let s = sample_sbm(&p, n, seed).unwrap();
        let sizes: Vec<f64> = s.sigma.groups().iter().map(|g| g.len() as f64).collect();
        let m = p.connectivity();
        let mut expected = 0.0;
        for r in 0..q {
            for t in r..q {
                let pairs = if r == t { sizes[r] * (sizes[r] - 1.0) / 2.0 } else { sizes[r] * sizes[t] };
                expected += pairs * m[(r, t)] / n as f64;
            }
        }
        let got = s.graph.edge_count() as f64;
        assert!((got - expected).abs() < 5.0 * expected.sqrt(), "q={q}: {got} vs {expected}");
    }
}

#[test]
fn within_group_fraction() {
    let p = ModelParams::symmetric(4, 5.0, 0.4).unwrap();
    let s = sample_sbm(&p, 30_000, 11).unwrap();
    let labels = s.sigma.values();
    let inside = s.graph.edges().iter().filter(|&&(u, v)| labels[u as usize] == labels[v as usize]).count();
    let total = s.graph.edge_count() as f64;
    let sym = p.symmetric_params().unwrap();
    let expected = sym.cin() / (sym.cin() + 3.0 * sym.cout());
    let se = (expected * (1.0 - expected) / total).sqrt();
    assert!((inside as f64 / total - expected).abs() < 5.0 * se);
}

#[test]
fn null_model_degrees_match_erdos_renyi() {
    let n = 20_000;
    let planted = sample_sbm(&ModelParams::symmetric(3, 4.0, 0.0).unwrap(), n, 21).unwrap();
    let er = sample_er(n, 4.0, 22).unwrap();
    let stat = ks_statistic(&degrees(&planted.graph), &degrees(&er));
    // Critical value at level 0.001 for two samples of size n.
    let critical = 1.95 * (2.0 / n as f64).sqrt();
    assert!(stat < critical, "KS {stat} vs {critical}");
}

#[test]
fn planted_degrees_are_poisson() {
    let n = 20_000;
    let d = 3.0;
    let g = sample_sbm(&ModelParams::symmetric(2, d, 0.8).unwrap(), n, 31).unwrap().graph;
    let mut counts = vec![0usize; 30];
    for v in 0..n {
        counts[g.degree(v).min(29)] += 1;
    }
    let mut pmf = (-d).exp();
    for (k, &c) in counts.iter().enumerate().take(10) {
        let expected = pmf * n as f64;
        assert!((c as f64 - expected).abs() < 5.0 * expected.sqrt() + 5.0, "k={k}: {c} vs {expected}");
        pmf *= d / (k + 1) as f64;
    }
}

#[test]
fn nonuniform_mean_degree() {
    let p = ModelParams::general(vec![0.2, 0.8], vec![vec![10.0, 1.5], vec![1.5, 3.625]]).unwrap();
    let n = 50_000;
    let s = sample_sbm(&p, n, 41).unwrap();
    let share = s.sigma.groups()[0].len() as f64 / n as f64;
    assert!((share - 0.2).abs() < 5.0 * (0.16 / n as f64).sqrt());
    let mean = s.graph.mean_degree();
    assert!((mean - p.degree()).abs() < 5.0 * (p.degree() / n as f64 * 2.0).sqrt() + 0.01, "{mean}");
}

#[test]
fn fixed_edge_sampler_group_pairs() {
    let p = ModelParams::symmetric(2, 4.0, 0.5).unwrap();
    let n = 10_000;
    let sigma = Labeling::new(2, (0..n).map(|v| v % 2).collect()).unwrap();
    let m = 20_000;
    let s = sample_sbm_fixed_m(&p, n, m, &sigma, 51).unwrap();
    assert_eq!(s.drawn, m);
    let labels = sigma.values();
    let inside = s.graph.edges().iter().filter(|&&(u, v)| labels[u as usize] == labels[v as usize]).count();
    let total = s.graph.edge_count() as f64;
    let expected = 0.75;
    let se = (expected * (1.0 - expected) / total).sqrt();
    assert!((inside as f64 / total - expected).abs() < 5.0 * se);
}

#[test]
fn large_sparse_graph_is_fast_and_deterministic() {
    let p = ModelParams::symmetric(3, 3.0, 0.3).unwrap();
    let a = sample_sbm(&p, 1_000_000, 61).unwrap();
    let expected = 1.5e6;
    assert!((a.graph.edge_count() as f64 - expected).abs() < 5.0 * expected.sqrt());
    let b = sample_sbm(&p, 1_000_000, 61).unwrap();
    assert_eq!(a, b);
}
