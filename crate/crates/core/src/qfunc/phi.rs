use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::ascent::{ascend, marginal_error, sinkhorn, start_pattern, AscentOptions};
use crate::error::{Error, Result};
use crate::numeric::{entropy_term, golden_max};
use crate::rng::{replica_seed, rng_from_seed, Rng};

const DOUBLY_STOCHASTIC_TOL: f64 = 1e-10;

/// `H(α) = −(1/q) Σ α_rs ln α_rs`.
pub fn doubly_stochastic_entropy(alpha: &DMatrix<f64>) -> f64 {
    alpha.iter().map(|&a| entropy_term(a)).sum::<f64>() / alpha.nrows() as f64
}

fn check_doubly_stochastic(alpha: &DMatrix<f64>, q: usize) -> Result<()> {
    if alpha.shape() != (q, q) {
        return Err(Error::InvalidInput(format!("α is {:?}, expected {q}×{q}", alpha.shape())));
    }
    let ones = vec![1.0; q];
    let err = marginal_error(alpha, &ones, &ones);
    if err > DOUBLY_STOCHASTIC_TOL || alpha.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::InvalidInput(format!("α is not doubly stochastic (marginal error {err:e})")));
    }
    Ok(())
}

fn phi_unchecked(alpha: &DMatrix<f64>, q: usize, signal: f64) -> f64 {
    doubly_stochastic_entropy(alpha) - (q as f64).ln() + 0.5 * signal * (alpha.norm_squared() - 1.0)
}

/// `Φ(α) = H(α) − ln q + (dλ²/2)(|α|² − 1)` for doubly stochastic `α`.
pub fn phi(alpha: &DMatrix<f64>, q: usize, d: f64, lambda: f64) -> Result<f64> {
    check_doubly_stochastic(alpha, q)?;
    Ok(phi_unchecked(alpha, q, d * lambda * lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiMax {
    pub value: f64,
    pub argmax: Vec<Vec<f64>>,
    pub restarts_used: usize,
    pub converged_restarts: usize,
}

/// Multi-start projected ascent of `Φ` over the Birkhoff polytope. `J/q`
/// (where `Φ = 0`) is always a candidate.
pub fn phi_max(q: usize, d: f64, lambda: f64, restarts: usize, seed: u64) -> Result<PhiMax> {
    if q < 2 {
        return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
    }
    let signal = d * lambda * lambda;
    let qf = q as f64;
    let ones = vec![1.0; q];
    let uniform_pi = vec![1.0 / qf; q];
    let objective = |a: &DMatrix<f64>| phi_unchecked(a, q, signal);
    let gradient = |a: &DMatrix<f64>| a.map(|x| -(x.ln() + 1.0) / qf + signal * x);

    let restarts = restarts.max(1);
    let runs: Vec<(f64, DMatrix<f64>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(replica_seed(seed, k as u64));
            let start = sinkhorn(start_pattern(k, restarts, &uniform_pi, &mut rng), &ones, &ones)?;
            let out = ascend(start, &ones, &ones, objective, gradient, AscentOptions::default());
            Ok((out.value, out.point, out.converged))
        })
        .collect::<Result<_>>()?;

    let converged_restarts = runs.iter().filter(|r| r.2).count();
    let mut best_value = 0.0;
    let mut best = DMatrix::from_element(q, q, 1.0 / qf);
    for (value, point, _) in runs {
        if value > best_value {
            best_value = value;
            best = point;
        }
    }
    Ok(PhiMax {
        value: best_value,
        argmax: (0..q).map(|i| best.row(i).iter().copied().collect()).collect(),
        restarts_used: restarts,
        converged_restarts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiScanRow {
    pub t: f64,
    pub frobenius_sq: f64,
    pub phi: f64,
}

/// `Φ` along the identity path `(1 − t)J/q + tI`, `t ∈ [0, 1]`.
pub fn phi_scan(q: usize, d: f64, lambda: f64, points: usize) -> Result<Vec<PhiScanRow>> {
    if q < 2 || points < 2 {
        return Err(Error::InvalidInput("phi scan needs q ≥ 2 and at least 2 points".into()));
    }
    let qf = q as f64;
    let signal = d * lambda * lambda;
    Ok((0..points)
        .map(|k| {
            let t = k as f64 / (points - 1) as f64;
            let alpha = DMatrix::from_fn(q, q, |i, j| (1.0 - t) / qf + if i == j { t } else { 0.0 });
            PhiScanRow {
                t,
                frobenius_sq: alpha.norm_squared(),
                phi: phi_unchecked(&alpha, q, signal),
            }
        })
        .collect())
}

/// Sinkhorn normalization of a log-normal matrix with a random spread.
pub fn random_doubly_stochastic(q: usize, rng: &mut Rng) -> DMatrix<f64> {
    let spread = 0.2 + 3.0 * rng.random::<f64>();
    let raw = DMatrix::from_fn(q, q, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        (spread * z).exp()
    });
    let ones = vec![1.0; q];
    sinkhorn(raw, &ones, &ones).expect("positive matrix")
}

/// Entropy of a row with one entry `x` and the rest `(1 − x)/(q − 1)`,
/// parametrized by its squared norm `r`.
fn row_entropy(q: usize, r: f64) -> f64 {
    let qf = q as f64;
    let spread = ((qf - 1.0) * (qf * r - 1.0)).max(0.0).sqrt();
    let x = ((1.0 + spread) / qf).min(1.0);
    entropy_term(x) + (qf - 1.0) * entropy_term((1.0 - x) / (qf - 1.0))
}

fn check_rho(q: usize, rho: f64) -> Result<()> {
    if q < 2 {
        return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
    }
    if !(1.0..=q as f64).contains(&rho) {
        return Err(Error::out_of_range("rho", rho, format!("[1, {q}]")));
    }
    Ok(())
}

/// Squared row norm of the non-uniform rows when `m` rows are uniform.
fn mixed_row_norm(q: usize, rho: f64, m: f64) -> f64 {
    let qf = q as f64;
    (qf * rho - m) / (qf * (qf - m))
}

fn entropy_relaxation(q: usize, rho: f64, m: f64) -> f64 {
    let qf = q as f64;
    if m >= qf {
        return qf.ln();
    }
    m / qf * qf.ln() + (1.0 - m / qf) * row_entropy(q, mixed_row_norm(q, rho, m))
}

/// Upper bound on `H(α)` over doubly stochastic `α` with `|α|² = ρ`,
/// maximizing the mixed uniform/one-spike relaxation over the number `m`
/// of uniform rows: a 10⁴-point grid followed by golden-section refinement.
pub fn an_entropy_bound(q: usize, rho: f64) -> Result<f64> {
    check_rho(q, rho)?;
    let qf = q as f64;
    let m_max = qf * (qf - rho) / (qf - 1.0);
    if m_max <= 0.0 {
        return Ok(entropy_relaxation(q, rho, 0.0));
    }
    const GRID: usize = 10_000;
    let h = |m: f64| entropy_relaxation(q, rho, m);
    let (mut best_k, mut best) = (0, h(0.0));
    for k in 1..=GRID {
        let v = h(m_max * k as f64 / GRID as f64);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let lo = m_max * best_k.saturating_sub(1) as f64 / GRID as f64;
    let hi = m_max * (best_k + 1).min(GRID) as f64 / GRID as f64;
    let (_, refined) = golden_max(h, lo, hi, 1e-12 * m_max.max(1.0));
    Ok(best.max(refined))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnCheck {
    pub holds: bool,
    /// Largest `δ(ρ−1)/(q−1)² − (1 − m/q)(f(1/q) − f(r))` on the grid.
    pub worst_violation: f64,
    pub rho: f64,
    pub m: f64,
}

/// Checks `δ(ρ−1)/(q−1)² ≤ (1 − m/q)(f(1/q) − f((qρ−m)/(q(q−m))))` on a
/// uniform grid of `rho_points` values of `ρ ∈ [1, q]` and `m_points`
/// values of `m ∈ [0, q(q−ρ)/(q−1)]`.
pub fn an_inequality_check(q: usize, delta: f64, rho_points: usize, m_points: usize) -> Result<AnCheck> {
    check_rho(q, 1.0)?;
    if rho_points < 2 || m_points < 2 {
        return Err(Error::InvalidInput("grids need at least 2 points".into()));
    }
    let qf = q as f64;
    let k2 = (qf - 1.0) * (qf - 1.0);
    let f_uniform = row_entropy(q, 1.0 / qf);
    let mut worst = AnCheck {
        holds: true,
        worst_violation: f64::NEG_INFINITY,
        rho: 1.0,
        m: 0.0,
    };
    for i in 0..rho_points {
        let rho = 1.0 + (qf - 1.0) * i as f64 / (rho_points - 1) as f64;
        let m_max = qf * (qf - rho) / (qf - 1.0);
        for j in 0..m_points {
            let m = m_max * j as f64 / (m_points - 1) as f64;
            let rhs = if m >= qf {
                0.0
            } else {
                (1.0 - m / qf) * (f_uniform - row_entropy(q, mixed_row_norm(q, rho, m)))
            };
            let violation = delta * (rho - 1.0) / k2 - rhs;
            if violation > worst.worst_violation {
                worst = AnCheck {
                    holds: true,
                    worst_violation: violation,
                    rho,
                    m,
                };
            }
        }
    }
    worst.holds = worst.worst_violation <= 1e-9;
    Ok(worst)
}
