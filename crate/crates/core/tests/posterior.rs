//! Exact posteriors against a naive product-form oracle on small graphs.

use sbm_thresholds::detection::{exact_marginals, exact_posterior, same_group_probability};
use sbm_thresholds::graph::{sample_sbm, Graph};
use sbm_thresholds::ModelParams;

/// Sums `P(G, σ)` over every labeling by direct products over all pairs.
fn oracle(g: &Graph, p: &ModelParams) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (n, q) = (g.n(), p.q());
    let m = p.connectivity();
    let mut marg = vec![vec![0.0; q]; n];
    let mut same = vec![vec![0.0; n]; n];
    let mut z = 0.0;
    let mut labels = vec![0usize; n];
    for code in 0..q.pow(n as u32) {
        let mut c = code;
        for x in labels.iter_mut() {
            *x = c % q;
            c /= q;
        }
        let mut w: f64 = labels.iter().map(|&x| p.pi()[x]).product();
        for u in 0..n {
            for v in u + 1..n {
                let e = m[(labels[u], labels[v])] / n as f64;
                w *= if g.has_edge(u, v) { e } else { 1.0 - e };
            }
        }
        z += w;
        for u in 0..n {
            marg[u][labels[u]] += w;
            for v in 0..n {
                if labels[u] == labels[v] {
                    same[u][v] += w;
                }
            }
        }
    }
    for row in marg.iter_mut().chain(same.iter_mut()) {
        row.iter_mut().for_each(|x| *x /= z);
    }
    (marg, same)
}

fn models() -> Vec<ModelParams> {
    vec![
        ModelParams::symmetric(2, 2.5, 0.7).unwrap(),
        ModelParams::symmetric(3, 2.0, 0.8).unwrap(),
        ModelParams::symmetric(3, 1.5, -0.4).unwrap(),
        ModelParams::general(vec![0.3, 0.7], vec![vec![4.0, 0.5], vec![0.5, 2.0]]).unwrap(),
    ]
}

#[test]
fn matches_brute_force_oracle() {
    let mut checked = 0;
    for (k, p) in models().iter().enumerate() {
        for n in 6..=8 {
            for rep in 0..9u64 {
                let g = sample_sbm(p, n, 1000 * k as u64 + 10 * n as u64 + rep).unwrap().graph;
                let (marg, same) = oracle(&g, p);
                let all = exact_marginals(&g, p, None).unwrap();
                for u in 0..n {
                    let single = exact_posterior(&g, p, u).unwrap();
                    for i in 0..p.q() {
                        assert!((single[i] - marg[u][i]).abs() < 1e-10);
                        assert!((all[u][i] - marg[u][i]).abs() < 1e-10);
                    }
                }
                let s = same_group_probability(&g, p, 0, n - 1).unwrap();
                assert!((s - same[0][n - 1]).abs() < 1e-10);
                checked += 1;
            }
        }
    }
    assert!(checked >= 100);
}

#[test]
fn anchored_marginals_match_conditioned_oracle() {
    let p = ModelParams::symmetric(3, 2.0, 0.8).unwrap();
    let g = sample_sbm(&p, 6, 7).unwrap().graph;
    let (n, q) = (6, 3);
    let anchored = exact_marginals(&g, &p, Some((0, 1))).unwrap();
    assert_eq!(anchored[0], vec![0.0, 1.0, 0.0]);
    // Conditioning on σ_0 = 1 is the same as replacing π by a point mass at
    // vertex 0, which the oracle can do by reweighting its own sums.
    let m = p.connectivity();
    let mut acc = vec![vec![0.0; q]; n];
    let mut z = 0.0;
    for code in 0..q.pow(n as u32) {
        let labels: Vec<usize> = (0..n).map(|v| code / q.pow(v as u32) % q).collect();
        if labels[0] != 1 {
            continue;
        }
        let mut w = 1.0;
        for u in 0..n {
            for v in u + 1..n {
                let e = m[(labels[u], labels[v])] / n as f64;
                w *= if g.has_edge(u, v) { e } else { 1.0 - e };
            }
        }
        z += w;
        for (u, &x) in labels.iter().enumerate() {
            acc[u][x] += w;
        }
    }
    for u in 0..n {
        for i in 0..q {
            assert!((anchored[u][i] - acc[u][i] / z).abs() < 1e-10);
        }
    }
}
