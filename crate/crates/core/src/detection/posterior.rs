use rayon::prelude::*;
use serde::Serialize;

use super::{overlap, Labeling};
use crate::error::{Error, Result};
use crate::graph::{sample_sbm, Graph};
use crate::model::ModelParams;
use crate::rng::replica_seed;

/// Largest labeling space the exact enumerators accept.
pub const MAX_LOG2_LABELINGS: f64 = 26.0;

const CHUNK: u64 = 1 << 12;

/// Joint log-density of `(G, σ)` up to a σ-independent constant, as a
/// function of σ. Precomputes `ln p_rs`, `ln(1 − p_rs)` with `p = M/n`.
struct LogLikelihood<'a> {
    g: &'a Graph,
    q: usize,
    log_pi: Vec<f64>,
    log_p: Vec<f64>,
    log_not_p: Vec<f64>,
}

impl<'a> LogLikelihood<'a> {
    fn new(g: &'a Graph, params: &ModelParams) -> Result<Self> {
        let (n, q) = (g.n(), params.q());
        if n == 0 {
            return Err(Error::InvalidInput("graph has no vertices".into()));
        }
        if n as f64 * (q as f64).log2() > MAX_LOG2_LABELINGS {
            return Err(Error::BudgetExceeded(format!("q^n = {q}^{n} exceeds 2^26 labelings")));
        }
        let m = params.connectivity();
        let mut log_p = vec![0.0; q * q];
        let mut log_not_p = vec![0.0; q * q];
        for r in 0..q {
            for s in 0..q {
                let p = m[(r, s)] / n as f64;
                if p > 1.0 {
                    return Err(Error::InvalidParams(format!("M[{r}][{s}]/n = {p} exceeds 1 at n = {n}")));
                }
                log_p[r * q + s] = p.ln();
                log_not_p[r * q + s] = (-p).ln_1p();
            }
        }
        Ok(Self {
            g,
            q,
            log_pi: params.pi().iter().map(|p| p.ln()).collect(),
            log_p,
            log_not_p,
        })
    }

    fn eval(&self, labels: &[usize], counts: &mut [usize], edges: &mut [usize]) -> f64 {
        let q = self.q;
        counts.fill(0);
        edges.fill(0);
        let mut total = 0.0;
        for &x in labels {
            counts[x] += 1;
            total += self.log_pi[x];
        }
        for &(u, v) in self.g.edges() {
            let (a, b) = (labels[u as usize], labels[v as usize]);
            edges[a.min(b) * q + a.max(b)] += 1;
        }
        for r in 0..q {
            for s in r..q {
                let pairs = if r == s {
                    counts[r] * counts[r].saturating_sub(1) / 2
                } else {
                    counts[r] * counts[s]
                };
                let e = edges[r * q + s];
                if e > 0 {
                    total += e as f64 * self.log_p[r * q + s];
                }
                if pairs > e {
                    total += (pairs - e) as f64 * self.log_not_p[r * q + s];
                }
            }
        }
        total
    }
}

/// Visits every labeling (with `anchor = (v, i)` fixing `σ_v = i`) and
/// accumulates `w(σ)·visit(σ)` into a vector of length `width`, where
/// `w(σ) ∝ P(G, σ)`. Returns the accumulator and `Σ w`. Chunks are merged in
/// index order, so the result does not depend on the thread count.
fn weighted_sum<F>(
    g: &Graph,
    params: &ModelParams,
    anchor: Option<(usize, usize)>,
    width: usize,
    visit: F,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[usize], f64, &mut [f64]) + Sync,
{
    let ll = LogLikelihood::new(g, params)?;
    let (n, q) = (g.n(), params.q());
    if let Some((v, i)) = anchor {
        if v >= n || i >= q {
            return Err(Error::InvalidInput(format!("anchor ({v}, {i}) outside the instance")));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| anchor.is_none_or(|(a, _)| a != v)).collect();
    let total = (q as u64).pow(free.len() as u32);
    let chunks = total.div_ceil(CHUNK);

    let decode = |index: u64, labels: &mut [usize]| {
        let mut rest = index;
        for &v in &free {
            labels[v] = (rest % q as u64) as usize;
            rest /= q as u64;
        }
    };
    let scratch = || {
        let mut labels = vec![0usize; n];
        if let Some((v, i)) = anchor {
            labels[v] = i;
        }
        (labels, vec![0usize; q], vec![0usize; q * q])
    };
    let range = |c: u64| c * CHUNK..((c + 1) * CHUNK).min(total);

    let max_ll = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut labels, mut counts, mut edges) = scratch();
            range(c)
                .map(|k| {
                    decode(k, &mut labels);
                    ll.eval(&labels, &mut counts, &mut edges)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if max_ll == f64::NEG_INFINITY {
        return Err(Error::InvalidInput("graph has zero probability under the model".into()));
    }

    let partials: Vec<(Vec<f64>, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut labels, mut counts, mut edges) = scratch();
            let mut acc = vec![0.0; width];
            let mut z = 0.0;
            for k in range(c) {
                decode(k, &mut labels);
                let w = (ll.eval(&labels, &mut counts, &mut edges) - max_ll).exp();
                if w > 0.0 {
                    z += w;
                    visit(&labels, w, &mut acc);
                }
            }
            (acc, z)
        })
        .collect();
    let mut acc = vec![0.0; width];
    let mut z = 0.0;
    for (part, zc) in partials {
        acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        z += zc;
    }
    Ok((acc, z))
}

/// Exact marginals `P(σ_v = i | G)` for every vertex, optionally conditioned
/// on `σ_anchor.0 = anchor.1`. Requires `q^n ≤ 2²⁶`.
pub fn exact_marginals(g: &Graph, params: &ModelParams, anchor: Option<(usize, usize)>) -> Result<Vec<Vec<f64>>> {
    let (n, q) = (g.n(), params.q());
    let (acc, z) = weighted_sum(g, params, anchor, n * q, |labels, w, acc| {
        for (v, &x) in labels.iter().enumerate() {
            acc[v * q + x] += w;
        }
    })?;
    Ok(acc.chunks(q).map(|row| row.iter().map(|a| a / z).collect()).collect())
}

/// Exact posterior `P(σ_u = i | G)` by enumeration of all `q^n` labelings.
pub fn exact_posterior(g: &Graph, params: &ModelParams, u: usize) -> Result<Vec<f64>> {
    if u >= g.n() {
        return Err(Error::InvalidInput(format!("vertex {u} outside 0..{}", g.n())));
    }
    let q = params.q();
    let (acc, z) = weighted_sum(g, params, None, q, |labels, w, acc| acc[labels[u]] += w)?;
    Ok(acc.into_iter().map(|a| a / z).collect())
}

/// Exact `P(σ_u = σ_v | G)`.
pub fn same_group_probability(g: &Graph, params: &ModelParams, u: usize, v: usize) -> Result<f64> {
    if u >= g.n() || v >= g.n() {
        return Err(Error::InvalidInput(format!("vertices ({u}, {v}) outside 0..{}", g.n())));
    }
    let (acc, z) = weighted_sum(g, params, None, 1, |labels, w, acc| {
        if labels[u] == labels[v] {
            acc[0] += w;
        }
    })?;
    Ok(acc[0] / z)
}

/// Probabilities closer than this are tied. Exact posteriors that are equal
/// by symmetry come out of the enumeration with rounding noise.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest entry; ties (within `TIE_TOLERANCE`) go to the
/// lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesOverlapReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub anchored: bool,
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub overlaps: Vec<f64>,
}

/// Samples `(G, σ)`, labels every vertex by its exact posterior argmax and
/// records the overlap with `σ`. For label-exchangeable models the
/// unconditioned marginals are exactly `π`, so vertex 0 is anchored to
/// label 0 to break the global symmetry; overlap is invariant under
/// relabeling, so the anchor carries no information about `σ`.
pub fn bayes_overlap_experiment(params: &ModelParams, n: usize, reps: usize, seed: u64) -> Result<BayesOverlapReport> {
    if reps < 2 {
        return Err(Error::out_of_range("reps", reps as f64, "[2, ∞)"));
    }
    let q = params.q();
    if n as f64 * (q as f64).log2() > MAX_LOG2_LABELINGS {
        return Err(Error::BudgetExceeded(format!("q^n = {q}^{n} exceeds 2^26 labelings")));
    }
    let anchored = params.is_exchangeable();
    let overlaps: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let sample = sample_sbm(params, n, replica_seed(seed, r as u64))?;
            let marginals = exact_marginals(&sample.graph, params, anchored.then_some((0, 0)))?;
            let guess = Labeling::new(q, marginals.iter().map(|m| argmax_lowest(m)).collect())?;
            overlap(&sample.sigma, &guess)
        })
        .collect::<Result<_>>()?;
    let k = reps as f64;
    let mean = overlaps.iter().sum::<f64>() / k;
    let var = overlaps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let std_err = (var / k).sqrt();
    Ok(BayesOverlapReport {
        n,
        reps,
        seed,
        anchored,
        mean,
        std_err,
        ci_low: mean - 1.96 * std_err,
        ci_high: mean + 1.96 * std_err,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_edge() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let params = ModelParams::symmetric(2, 0.8, 0.5).unwrap();
        let (cin, cout) = (1.2, 0.4);
        let p = same_group_probability(&g, &params, 0, 1).unwrap();
        assert!((p - cin / (cin + cout)).abs() < 1e-14);
    }

    #[test]
    fn null_model_posterior_is_prior() {
        let params = ModelParams::general(vec![0.25, 0.75], vec![vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (3, 5)]).unwrap();
        for u in 0..6 {
            let post = exact_posterior(&g, &params, u).unwrap();
            assert!((post[0] - 0.25).abs() < 1e-12 && (post[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn anchored_marginals() {
        let params = ModelParams::symmetric(2, 2.0, 0.6).unwrap();
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let m = exact_marginals(&g, &params, Some((0, 0))).unwrap();
        assert_eq!(m[0], vec![1.0, 0.0]);
        // Assortative: the neighbour 1 leans towards vertex 0's label, while
        // 3 and 4 (symmetric, not adjacent to 0) lean away from it.
        assert!(m[1][0] > 0.5);
        assert!(m[3][0] < 0.5);
        assert!((m[3][0] - m[4][0]).abs() < 1e-12);
        for row in &m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let free = exact_marginals(&g, &params, None).unwrap();
        assert!(free.iter().all(|row| (row[0] - 0.5).abs() < 1e-12));
    }

    #[test]
    fn guards() {
        let params = ModelParams::symmetric(2, 2.0, 0.5).unwrap();
        assert!(exact_posterior(&Graph::empty(27), &params, 0).unwrap_err().is_budget());
        assert!(exact_posterior(&Graph::empty(3), &params, 3).is_err());
        assert!(bayes_overlap_experiment(&params, 30, 5, 0).unwrap_err().is_budget());
    }

    #[test]
    fn ties_go_low() {
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax_lowest(&[0.5 - 1e-15, 0.5 + 1e-15]), 0);
        assert_eq!(argmax_lowest(&[0.49, 0.51]), 1);
    }

    #[test]
    fn zero_signal_overlap_is_zero() {
        let params = ModelParams::symmetric(2, 3.0, 0.0).unwrap();
        let report = bayes_overlap_experiment(&params, 8, 10, 4).unwrap();
        assert!(report.anchored);
        assert!(report.overlaps.iter().all(|&o| o == 0.0));
    }
}
