use rayon::prelude::*;
use serde::Serialize;

use super::{sample_er, sample_sbm, Graph};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::replica_seed;

pub const MIN_CYCLE: usize = 3;
pub const MAX_CYCLE: usize = 12;

/// Exact simple-cycle counts for lengths `3..=m_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleCounts {
    m_max: usize,
    counts: Vec<u64>,
}

impl CycleCounts {
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Number of `m`-cycles; zero outside `3..=m_max`.
    pub fn get(&self, m: usize) -> u64 {
        if (MIN_CYCLE..=self.m_max).contains(&m) {
            self.counts[m - MIN_CYCLE]
        } else {
            0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().enumerate().map(|(k, &c)| (k + MIN_CYCLE, c))
    }

    /// Attaches the limiting Poisson means under both models.
    pub fn with_means(&self, params: &ModelParams) -> Vec<CycleStats> {
        self.iter()
            .map(|(m, count)| {
                let (mu_q, mu_p) = poisson_means(params, m);
                CycleStats { m, count, mu_q, mu_p }
            })
            .collect()
    }
}

/// One cycle length with its observed count and the Poisson means
/// `d^m/(2m)` (Erdős–Rényi) and `d^m·tr(T^m)/(2m)` (block model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleStats {
    pub m: usize,
    pub count: u64,
    pub mu_q: f64,
    pub mu_p: f64,
}

pub fn poisson_means(params: &ModelParams, m: usize) -> (f64, f64) {
    let d = params.degree();
    let base = d.powi(m as i32) / (2.0 * m as f64);
    let trace: f64 = params.spectrum().iter().map(|l| l.powi(m as i32)).sum();
    (base, base * trace)
}

/// Counts simple cycles of every length in `3..=m_max`, each cycle once.
///
/// Every cycle is enumerated from its smallest vertex, walking only through
/// larger vertices, so it is seen exactly twice (once per orientation).
pub fn count_cycles(g: &Graph, m_max: usize) -> Result<CycleCounts> {
    if !(MIN_CYCLE..=MAX_CYCLE).contains(&m_max) {
        return Err(Error::out_of_range("m_max", m_max as f64, format!("[{MIN_CYCLE}, {MAX_CYCLE}]")));
    }
    let n = g.n();
    let doubled = (0..n)
        .into_par_iter()
        .fold(
            || (vec![0u64; m_max + 1], vec![false; n]),
            |(mut acc, mut on_path), start| {
                on_path[start] = true;
                extend(g, start, start, 1, m_max, &mut on_path, &mut acc);
                on_path[start] = false;
                (acc, on_path)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || vec![0u64; m_max + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let counts = (MIN_CYCLE..=m_max).map(|m| doubled[m] / 2).collect();
    Ok(CycleCounts { m_max, counts })
}

fn extend(
    g: &Graph,
    start: usize,
    tip: usize,
    len: usize,
    m_max: usize,
    on_path: &mut [bool],
    acc: &mut [u64],
) {
    for &next in g.neighbors(tip) {
        let next = next as usize;
        if next == start {
            if len >= MIN_CYCLE {
                acc[len] += 1;
            }
        } else if next > start && !on_path[next] && len < m_max {
            on_path[next] = true;
            extend(g, start, next, len + 1, m_max, on_path, acc);
            on_path[next] = false;
        }
    }
}

/// Empirical cycle-count means under both models against their Poisson
/// targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyclePoissonReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<CycleRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleRow {
    pub m: usize,
    pub target_q: f64,
    pub mean_q: f64,
    pub se_q: f64,
    pub target_p: f64,
    pub mean_p: f64,
    pub se_p: f64,
}

impl CycleRow {
    /// Deviations of the empirical means from their targets in units of
    /// standard error, `(Erdős–Rényi, block model)`.
    pub fn z_scores(&self) -> (f64, f64) {
        let z = |mean: f64, target: f64, se: f64| {
            if se > 0.0 {
                (mean - target) / se
            } else if mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        };
        (z(self.mean_q, self.target_q, self.se_q), z(self.mean_p, self.target_p, self.se_p))
    }
}

/// Samples `reps` graphs from each of the block model and `G(n, d/n)` and
/// compares mean `m`-cycle counts with the Poisson means. Replica `r` uses
/// stream `2r` for the block model and `2r + 1` for Erdős–Rényi.
pub fn cycle_poisson_check(
    params: &ModelParams,
    n: usize,
    m_max: usize,
    reps: usize,
    seed: u64,
) -> Result<CyclePoissonReport> {
    if reps < 30 {
        return Err(Error::out_of_range("reps", reps as f64, "[30, ∞)"));
    }
    let samples: Vec<(CycleCounts, CycleCounts)> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let planted = sample_sbm(params, n, replica_seed(seed, 2 * r as u64))?;
            let null = sample_er(n, params.degree(), replica_seed(seed, 2 * r as u64 + 1))?;
            Ok((count_cycles(&planted.graph, m_max)?, count_cycles(&null, m_max)?))
        })
        .collect::<Result<_>>()?;

    let summary = |values: Vec<f64>| {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, (var / k).sqrt())
    };
    let rows = (MIN_CYCLE..=m_max)
        .map(|m| {
            let (target_q, target_p) = poisson_means(params, m);
            let (mean_p, se_p) = summary(samples.iter().map(|(p, _)| p.get(m) as f64).collect());
            let (mean_q, se_q) = summary(samples.iter().map(|(_, q)| q.get(m) as f64).collect());
            CycleRow {
                m,
                target_q,
                mean_q,
                se_q,
                target_p,
                mean_p,
                se_p,
            }
        })
        .collect();
    Ok(CyclePoissonReport { n, reps, seed, rows })
}
