use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::Serialize;

use super::Graph;
use crate::detection::Labeling;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{rng_from_seed, Rng};

/// A graph together with the labels that generated it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledSample {
    pub graph: Graph,
    pub sigma: Labeling,
}

/// Output of the fixed-edge-count sampler. `simple` is false when some drawn
/// edge was a self-loop or repeated an earlier one; such draws are dropped from
/// `graph`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEdgeSample {
    pub graph: Graph,
    pub simple: bool,
    pub drawn: usize,
}

/// Draws `(G, σ)` from the block model on `n` vertices: labels i.i.d. from
/// `π`, then every pair independently with probability `M_{σu σv} / n`.
/// Runs in expected `O(n + |E|)` by geometric skipping within each block.
pub fn sample_sbm(params: &ModelParams, n: usize, seed: u64) -> Result<LabeledSample> {
    if n == 0 {
        return Err(Error::out_of_range("n", 0.0, "[1, ∞)"));
    }
    let q = params.q();
    let m = params.connectivity();
    let nf = n as f64;
    for i in 0..q {
        for j in 0..q {
            if m[(i, j)] / nf > 1.0 {
                return Err(Error::InvalidParams(format!(
                    "M[{i}][{j}]/n = {} exceeds 1 at n = {n}",
                    m[(i, j)] / nf
                )));
            }
        }
    }
    let mut rng = rng_from_seed(seed);
    let labels = WeightedIndex::new(params.pi()).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let values: Vec<usize> = (0..n).map(|_| labels.sample(&mut rng)).collect();
    let sigma = Labeling::new(q, values)?;
    let groups = sigma.groups();

    let mut edges: Vec<(u32, u32)> = Vec::new();
    for r in 0..q {
        for s in r..q {
            let p = m[(r, s)] / nf;
            if r == s {
                let members = &groups[r];
                within_block(members.len(), p, &mut rng, |a, b| {
                    push_edge(&mut edges, members[a], members[b])
                });
            } else {
                let (left, right) = (&groups[r], &groups[s]);
                between_blocks(left.len(), right.len(), p, &mut rng, |a, b| {
                    push_edge(&mut edges, left[a], right[b])
                });
            }
        }
    }
    edges.sort_unstable();
    Ok(LabeledSample {
        graph: Graph::from_sorted_unique(n, edges),
        sigma,
    })
}

/// Erdős–Rényi `G(n, d/n)`.
pub fn sample_er(n: usize, d: f64, seed: u64) -> Result<Graph> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::out_of_range("d", d, "[0, ∞)"));
    }
    let p = if n == 0 { 0.0 } else { d / n as f64 };
    if p > 1.0 {
        return Err(Error::out_of_range("d/n", p, "[0, 1]"));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    within_block(n, p, &mut rng, |a, b| push_edge(&mut edges, a, b));
    edges.sort_unstable();
    Ok(Graph::from_sorted_unique(n, edges))
}

/// Draws `m` edges independently: an ordered group pair `(r, s)` with
/// probability proportional to `π_r M_rs π_s`, then endpoints uniformly (with
/// replacement) from `σ⁻¹(r)` and `σ⁻¹(s)`.
pub fn sample_sbm_fixed_m(
    params: &ModelParams,
    n: usize,
    m: usize,
    sigma: &Labeling,
    seed: u64,
) -> Result<FixedEdgeSample> {
    let q = params.q();
    if sigma.n() != n || sigma.q() != q {
        return Err(Error::InvalidInput(format!(
            "labeling has n = {}, q = {}; expected n = {n}, q = {q}",
            sigma.n(),
            sigma.q()
        )));
    }
    if m == 0 {
        return Ok(FixedEdgeSample {
            graph: Graph::empty(n),
            simple: true,
            drawn: 0,
        });
    }
    let groups = sigma.groups();
    let conn = params.connectivity();
    let pi = params.pi();
    let weights: Vec<f64> = (0..q * q)
        .map(|k| {
            let (r, s) = (k / q, k % q);
            pi[r] * conn[(r, s)] * pi[s]
        })
        .collect();
    for (k, &w) in weights.iter().enumerate() {
        let (r, s) = (k / q, k % q);
        if w > 0.0 && (groups[r].is_empty() || groups[s].is_empty()) {
            let empty = if groups[r].is_empty() { r } else { s };
            return Err(Error::InvalidInput(format!(
                "group {empty} is empty but pair ({r}, {s}) has positive weight"
            )));
        }
    }
    let pairs = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity(m);
    let mut simple = true;
    for _ in 0..m {
        let k = pairs.sample(&mut rng);
        let (r, s) = (k / q, k % q);
        let u = groups[r][rng.random_range(0..groups[r].len())];
        let v = groups[s][rng.random_range(0..groups[s].len())];
        if u == v {
            simple = false;
            continue;
        }
        edges.push((u.min(v) as u32, u.max(v) as u32));
    }
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    simple &= edges.len() == before;
    Ok(FixedEdgeSample {
        graph: Graph::from_sorted_unique(n, edges),
        simple,
        drawn: m,
    })
}

fn push_edge(edges: &mut Vec<(u32, u32)>, a: usize, b: usize) {
    edges.push((a.min(b) as u32, a.max(b) as u32));
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_skip(rng: &mut Rng, log_q: f64) -> u64 {
    let u: f64 = rng.random();
    let skip = ((1.0 - u).ln() / log_q).floor();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

/// Visits each unordered pair `{a, b}` (`b < a < k`) independently with
/// probability `p`.
fn within_block(k: usize, p: f64, rng: &mut Rng, mut visit: impl FnMut(usize, usize)) {
    if k < 2 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for a in 1..k {
            for b in 0..a {
                visit(a, b);
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let total = (k as u64) * (k as u64 - 1) / 2;
    let mut idx: u64 = 0;
    // Row a holds pairs (a, 0..a), starting at a(a-1)/2.
    let mut a: u64 = 1;
    let mut row_start: u64 = 0;
    loop {
        let skip = geometric_skip(rng, log_q);
        idx = match idx.checked_add(skip) {
            Some(i) if i < total => i,
            _ => return,
        };
        while idx >= row_start + a {
            row_start += a;
            a += 1;
        }
        visit(a as usize, (idx - row_start) as usize);
        idx += 1;
    }
}

/// Visits each pair `(a, b)` in `0..left × 0..right` independently with
/// probability `p`.
fn between_blocks(left: usize, right: usize, p: f64, rng: &mut Rng, mut visit: impl FnMut(usize, usize)) {
    if left == 0 || right == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for a in 0..left {
            for b in 0..right {
                visit(a, b);
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let total = left as u64 * right as u64;
    let mut idx: u64 = 0;
    loop {
        let skip = geometric_skip(rng, log_q);
        idx = match idx.checked_add(skip) {
            Some(i) if i < total => i,
            _ => return,
        };
        visit((idx / right as u64) as usize, (idx % right as u64) as usize);
        idx += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_degree_gives_empty_graphs() {
        let p = ModelParams::symmetric(2, 0.0, 0.4).unwrap();
        assert_eq!(sample_sbm(&p, 500, 1).unwrap().graph.edge_count(), 0);
        assert_eq!(sample_er(500, 0.0, 1).unwrap().edge_count(), 0);
    }

    #[test]
    fn er_validates_density() {
        assert!(sample_er(10, -1.0, 0).is_err());
        assert!(sample_er(10, 11.0, 0).is_err());
        let full = sample_er(6, 6.0, 0).unwrap();
        assert_eq!(full.edge_count(), 15);
    }

    #[test]
    fn sbm_rejects_probabilities_above_one() {
        let p = ModelParams::symmetric(2, 30.0, 0.5).unwrap();
        assert!(sample_sbm(&p, 20, 0).is_err());
    }

    #[test]
    fn assortative_corner_has_only_within_group_edges() {
        let p = ModelParams::symmetric(2, 3.0, 1.0).unwrap();
        let s = sample_sbm(&p, 2000, 9).unwrap();
        assert!(s.graph.edge_count() > 0);
        let lab = s.sigma.values();
        assert!(s.graph.edges().iter().all(|&(u, v)| lab[u as usize] == lab[v as usize]));
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let p = ModelParams::symmetric(3, 4.0, 0.3).unwrap();
        let a = sample_sbm(&p, 3000, 42).unwrap();
        let b = sample_sbm(&p, 3000, 42).unwrap();
        assert_eq!(a.graph.to_edge_list(), b.graph.to_edge_list());
        assert_eq!(a.sigma, b.sigma);
        let c = sample_sbm(&p, 3000, 43).unwrap();
        assert_ne!(a.graph.to_edge_list(), c.graph.to_edge_list());
    }

    #[test]
    fn within_block_visits_every_pair_once_at_p_one() {
        let mut rng = rng_from_seed(0);
        let mut seen = Vec::new();
        within_block(5, 1.0, &mut rng, |a, b| seen.push((a, b)));
        assert_eq!(seen.len(), 10);
        // Skipping route with p close to 1 must stay inside the triangle.
        let mut rng = rng_from_seed(1);
        let mut seen = Vec::new();
        within_block(50, 0.999, &mut rng, |a, b| {
            assert!(b < a && a < 50);
            seen.push((a, b));
        });
        seen.dedup();
        assert!(seen.len() > 1200);
    }

    #[test]
    fn fixed_m_sampler() {
        let p = ModelParams::symmetric(2, 3.0, 1.0).unwrap();
        let sigma = Labeling::new(2, (0..100).map(|v| v % 2).collect()).unwrap();
        let empty = sample_sbm_fixed_m(&p, 100, 0, &sigma, 0).unwrap();
        assert!(empty.simple && empty.graph.edge_count() == 0);
        let s = sample_sbm_fixed_m(&p, 100, 40, &sigma, 3).unwrap();
        let lab = sigma.values();
        assert!(s.graph.edges().iter().all(|&(u, v)| lab[u as usize] == lab[v as usize]));
        // Group 1 empty but needed.
        let lopsided = Labeling::new(2, vec![0; 100]).unwrap();
        assert!(sample_sbm_fixed_m(&p, 100, 5, &lopsided, 0).is_err());
    }
}
