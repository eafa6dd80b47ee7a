use serde::Serialize;

use super::Labeling;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::SymmetricParams;

/// The default good-partition slack `n^{2/3}`.
pub fn default_slack(n: usize) -> f64 {
    (n as f64).powf(2.0 / 3.0)
}

/// Within/between edge counts of a labeling against the planted targets
/// `m̄_in = c_in·n/(2q)` and `m̄_out = (q−1)c_out·n/(2q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessCheck {
    pub m_in: usize,
    pub m_out: usize,
    pub target_in: f64,
    pub target_out: f64,
    pub slack: f64,
    pub is_good: bool,
}

fn targets(params: &SymmetricParams, n: usize) -> (f64, f64) {
    let q = params.q as f64;
    let n = n as f64;
    (params.cin() * n / (2.0 * q), (q - 1.0) * params.cout() * n / (2.0 * q))
}

fn within(m: f64, target: f64, slack: f64) -> bool {
    (m - target).abs() < slack
}

/// Counts within- and between-group edges under `tau` and compares them with
/// the planted targets. `tau` must be balanced.
pub fn goodness(g: &Graph, tau: &Labeling, params: &SymmetricParams, slack: f64) -> Result<GoodnessCheck> {
    if tau.n() != g.n() || tau.q() != params.q {
        return Err(Error::InvalidInput(format!(
            "labeling has n = {}, q = {}; graph has n = {} and model q = {}",
            tau.n(),
            tau.q(),
            g.n(),
            params.q
        )));
    }
    if !tau.is_balanced() {
        return Err(Error::InvalidInput("goodness is defined for balanced labelings".into()));
    }
    let lab = tau.values();
    let m_in = g.edges().iter().filter(|&&(u, v)| lab[u as usize] == lab[v as usize]).count();
    let m_out = g.edge_count() - m_in;
    let (target_in, target_out) = targets(params, g.n());
    Ok(GoodnessCheck {
        m_in,
        m_out,
        target_in,
        target_out,
        slack,
        is_good: within(m_in as f64, target_in, slack) && within(m_out as f64, target_out, slack),
    })
}

/// Makes `tau` balanced by repeatedly moving a minimum-degree vertex of an
/// oversized group (ties: lowest vertex id) to the lowest-index undersized
/// group. Requires `q | n`.
pub fn balance(g: &Graph, tau: &Labeling) -> Result<Labeling> {
    let (n, q) = (tau.n(), tau.q());
    if n != g.n() {
        return Err(Error::InvalidInput(format!("labeling has {} vertices, graph has {}", n, g.n())));
    }
    if n % q != 0 {
        return Err(Error::InvalidInput(format!("cannot balance: q = {q} does not divide n = {n}")));
    }
    let target = n / q;
    let mut values = tau.values().to_vec();
    let mut counts = tau.counts();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (g.degree(v), v));
    for v in order {
        let from = values[v];
        if counts[from] <= target {
            continue;
        }
        let Some(to) = counts.iter().position(|&c| c < target) else {
            break;
        };
        values[v] = to;
        counts[from] -= 1;
        counts[to] += 1;
    }
    Labeling::new(q, values)
}

/// Exhaustively lists every good balanced labeling, one representative per
/// global relabeling: labels appear in first-use order, so vertex 0 has
/// label 0. Refuses instances with `q^n > 2³²`.
pub fn exhaustive_good_search(g: &Graph, params: &SymmetricParams, slack: f64) -> Result<Vec<Labeling>> {
    let (n, q) = (g.n(), params.q);
    if (n as f64) * (q as f64).log2() > 32.0 {
        return Err(Error::BudgetExceeded(format!("q^n = {q}^{n} exceeds 2^32 labelings")));
    }
    if n == 0 || n % q != 0 {
        return Err(Error::InvalidInput(format!("balanced labelings need q | n (q = {q}, n = {n})")));
    }
    let (target_in, target_out) = targets(params, n);
    let mut search = Search {
        g,
        q,
        cap: n / q,
        ceiling: target_in + slack,
        target_in,
        target_out,
        slack,
        labels: vec![0; n],
        counts: vec![0; q],
        found: Vec::new(),
    };
    search.descend(0, 0, 0);
    Ok(search.found)
}

struct Search<'a> {
    g: &'a Graph,
    q: usize,
    cap: usize,
    ceiling: f64,
    target_in: f64,
    target_out: f64,
    slack: f64,
    labels: Vec<usize>,
    counts: Vec<usize>,
    found: Vec<Labeling>,
}

impl Search<'_> {
    fn descend(&mut self, v: usize, used: usize, m_in: usize) {
        let n = self.labels.len();
        if v == n {
            let m_out = self.g.edge_count() - m_in;
            if within(m_in as f64, self.target_in, self.slack) && within(m_out as f64, self.target_out, self.slack) {
                self.found.push(Labeling::new(self.q, self.labels.clone()).expect("labels below q"));
            }
            return;
        }
        // Labels beyond `used` are interchangeable; only the first is tried.
        for c in 0..(used + 1).min(self.q) {
            if self.counts[c] == self.cap {
                continue;
            }
            let gained = self
                .g
                .neighbors(v)
                .iter()
                .filter(|&&w| (w as usize) < v && self.labels[w as usize] == c)
                .count();
            let next_in = m_in + gained;
            // m_in never decreases, so overshooting the window is final.
            if next_in as f64 >= self.ceiling {
                continue;
            }
            self.labels[v] = c;
            self.counts[c] += 1;
            self.descend(v + 1, used.max(c + 1), next_in);
            self.counts[c] -= 1;
        }
    }
}
