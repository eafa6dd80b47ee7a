use serde::Serialize;

use super::Labeling;
use crate::error::{Error, Result};
use crate::numeric::{binary_entropy, entropy_term};

fn check_pair(sigma: &Labeling, tau: &Labeling) -> Result<()> {
    if sigma.n() != tau.n() || sigma.q() != tau.q() {
        return Err(Error::InvalidInput(format!(
            "labelings differ in shape: (n, q) = ({}, {}) vs ({}, {})",
            sigma.n(),
            sigma.q(),
            tau.n(),
            tau.q()
        )));
    }
    if sigma.n() == 0 {
        return Err(Error::InvalidInput("labelings are empty".into()));
    }
    Ok(())
}

/// Joint type counts `N_ik = |σ⁻¹(i) ∩ τ⁻¹(k)|`, row-major.
fn joint_counts(sigma: &Labeling, tau: &Labeling) -> Vec<usize> {
    let q = sigma.q();
    let mut counts = vec![0; q * q];
    for (&i, &k) in sigma.values().iter().zip(tau.values()) {
        counts[i * q + k] += 1;
    }
    counts
}

/// Chance-corrected agreement maximized over relabelings:
/// `(1/n) max_ρ Σᵢ (|σ⁻¹(i) ∩ τ⁻¹(ρ(i))| − |σ⁻¹(i)||τ⁻¹(ρ(i))|/n)`.
///
/// The assignment is solved exactly on integer scores `n·N_ik − n_i·m_k`.
pub fn overlap(sigma: &Labeling, tau: &Labeling) -> Result<f64> {
    check_pair(sigma, tau)?;
    let (n, q) = (sigma.n() as i64, sigma.q());
    let joint = joint_counts(sigma, tau);
    let (rows, cols) = (sigma.counts(), tau.counts());
    let scores: Vec<i64> = (0..q * q)
        .map(|c| n * joint[c] as i64 - (rows[c / q] * cols[c % q]) as i64)
        .collect();
    Ok(max_assignment(&scores, q) as f64 / (n * n) as f64)
}

/// Maximum-weight perfect matching of a square integer matrix (row-major),
/// by the Hungarian method with potentials in `O(q³)`.
pub(crate) fn max_assignment(scores: &[i64], q: usize) -> i64 {
    // Minimize the negated scores. Index 0 is a virtual row/column.
    let cost = |i: usize, j: usize| -scores[(i - 1) * q + (j - 1)];
    let mut u = vec![0i64; q + 1];
    let mut v = vec![0i64; q + 1];
    let mut owner = vec![0usize; q + 1];
    let mut way = vec![0usize; q + 1];
    for row in 1..=q {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; q + 1];
        let mut used = vec![false; q + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=q {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=q {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        while j0 != 0 {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        }
    }
    (1..=q).map(|j| scores[(owner[j] - 1) * q + (j - 1)]).sum()
}

/// `α_st = (q/n)|σ⁻¹(s) ∩ τ⁻¹(t)|` for balanced labelings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    pub q: usize,
    pub alpha: Vec<Vec<f64>>,
    pub frobenius_sq: f64,
}

impl OverlapMatrix {
    /// `H(α) = −(1/q) Σ α_rs ln α_rs`.
    pub fn entropy(&self) -> f64 {
        self.alpha.iter().flatten().map(|&a| entropy_term(a)).sum::<f64>() / self.q as f64
    }
}

pub fn overlap_matrix(sigma: &Labeling, tau: &Labeling) -> Result<OverlapMatrix> {
    check_pair(sigma, tau)?;
    if !sigma.is_balanced() || !tau.is_balanced() {
        return Err(Error::InvalidInput("overlap matrix needs balanced labelings".into()));
    }
    let (n, q) = (sigma.n(), sigma.q());
    let joint = joint_counts(sigma, tau);
    let scale = q as f64 / n as f64;
    let alpha: Vec<Vec<f64>> = (0..q)
        .map(|s| (0..q).map(|t| joint[s * q + t] as f64 * scale).collect())
        .collect();
    for k in 0..q {
        let row: f64 = alpha[k].iter().sum();
        let col: f64 = alpha.iter().map(|r| r[k]).sum();
        debug_assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
    }
    let frobenius_sq = alpha.iter().flatten().map(|a| a * a).sum();
    Ok(OverlapMatrix { q, alpha, frobenius_sq })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

const BOUND_TOL: f64 = 1e-12;

/// `|α|² ≤ 1 + q·olap(σ, τ)`.
pub fn birkhoff_bound_check(sigma: &Labeling, tau: &Labeling) -> Result<BoundCheck> {
    let alpha = overlap_matrix(sigma, tau)?;
    let rhs = 1.0 + sigma.q() as f64 * overlap(sigma, tau)?;
    Ok(BoundCheck {
        lhs: alpha.frobenius_sq,
        rhs,
        ok: alpha.frobenius_sq <= rhs + BOUND_TOL,
    })
}

/// Largest entropy of a doubly stochastic matrix whose best permutation
/// captures mass `1 + qβ`: `h(1/q + β) + (1 − 1/q − β) ln(q − 1)`.
pub fn overlap_entropy_bound(q: usize, beta: f64) -> f64 {
    let x = (1.0 / q as f64 + beta).min(1.0);
    let rest = 1.0 - x;
    let spread = if rest > 0.0 { rest * ((q - 1) as f64).ln() } else { 0.0 };
    binary_entropy(x) + spread
}

/// `H(α) ≤ h(1/q + β) + (1 − 1/q − β) ln(q − 1)` with `β = olap(σ, τ)`.
pub fn entropy_bound_check(sigma: &Labeling, tau: &Labeling) -> Result<BoundCheck> {
    let alpha = overlap_matrix(sigma, tau)?;
    let lhs = alpha.entropy();
    let rhs = overlap_entropy_bound(sigma.q(), overlap(sigma, tau)?);
    Ok(BoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + BOUND_TOL,
    })
}
