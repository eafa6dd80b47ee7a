use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::ascent::{ascend, sinkhorn, start_pattern, AscentOptions};
use super::{kl_matrix, CouplingMatrix};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{replica_seed, rng_from_seed};

/// Half-width of the band around 1 reported as a boundary verdict.
pub const BOUNDARY_BAND: f64 = 1e-3;

/// Below this divergence from `p` the quotient is numerically meaningless;
/// the second-order limit covers that neighbourhood instead.
const DIVERGENCE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QResult {
    /// `max(hessian_ratio, best ascent value)`.
    pub value: f64,
    pub argmax: CouplingMatrix,
    /// Limit of the quotient at `α → p` along the best direction.
    pub hessian_ratio: f64,
    /// Best quotient found by the ascent away from `p`.
    pub best_found: Option<f64>,
    pub restarts_used: usize,
    pub converged_restarts: usize,
    /// At least one restart met its stopping criterion.
    pub converged: bool,
}

/// `(M − dJ)/√(2d)`; zero when `d = 0`.
pub fn scaled_centered(params: &ModelParams) -> DMatrix<f64> {
    let d = params.degree();
    if d == 0.0 {
        let q = params.q();
        return DMatrix::zeros(q, q);
    }
    params.centered() / (2.0 * d).sqrt()
}

fn validate(pi: &[f64], a: &DMatrix<f64>) -> Result<()> {
    let q = pi.len();
    if q < 2 {
        return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
    }
    if pi.iter().any(|&p| !(p > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams("π must be positive and sum to 1".into()));
    }
    if a.shape() != (q, q) || a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("A must be a finite {q}×{q} matrix")));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidInput("A must be symmetric".into()));
    }
    Ok(())
}

/// An orthonormal basis (as columns) of the complement of the unit vector
/// `u`, taken from the Householder reflector that swaps `u` and `e₁`.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let q = u.len();
    let mut v = u.clone();
    v[0] -= 1.0;
    let vv = v.norm_squared();
    let h = if vv < 1e-30 {
        DMatrix::identity(q, q)
    } else {
        DMatrix::identity(q, q) - (&v * v.transpose()) * (2.0 / vv)
    };
    h.columns(1, q - 1).into_owned()
}

/// Second-order limit of the `Q` quotient at `α → p`: with
/// `S = D^{1/2} A D^{1/2}` restricted to `√π⊥`, this is `2·max sᵢ²`.
/// For `A = (M − dJ)/√(2d)` it equals `d·λ₂²`.
pub fn hessian_ratio(pi: &[f64], a: &DMatrix<f64>) -> Result<f64> {
    validate(pi, a)?;
    let q = pi.len();
    let root = DVector::from_iterator(q, pi.iter().map(|p| p.sqrt()));
    let s = DMatrix::from_fn(q, q, |i, j| root[i] * a[(i, j)] * root[j]);
    let u = complement_basis(&root);
    let restricted = u.transpose() * s * &u;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(restricted, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("restricted quadratic form did not converge".into()))?;
    Ok(2.0 * eig.eigenvalues.iter().map(|s| s * s).fold(0.0, f64::max))
}

/// Numerical supremum over the transportation polytope of
/// `⟨α − p, A(α − p)Aᵀ⟩ / D(α, p)`, `p = π ⊗ π`, by multi-start projected
/// ascent (restarts in parallel, seeded per restart). The value at `p` is
/// its second-order limit, so the result is `max(hessian_ratio, best)`.
/// It is a certified lower bound on the supremum.
pub fn q_value(pi: &[f64], a: &DMatrix<f64>, restarts: usize, seed: u64) -> Result<QResult> {
    validate(pi, a)?;
    let q = pi.len();
    let product = CouplingMatrix::product(pi);
    let p = product.alpha().clone();
    if a.iter().all(|&x| x == 0.0) {
        return Ok(QResult {
            value: 0.0,
            argmax: product,
            hessian_ratio: 0.0,
            best_found: Some(0.0),
            restarts_used: 0,
            converged_restarts: 0,
            converged: true,
        });
    }
    let hessian = hessian_ratio(pi, a)?;
    let at = a.transpose();

    let numerator = |alpha: &DMatrix<f64>| {
        let delta = alpha - &p;
        let image = a * &delta * &at;
        (delta.component_mul(&image).sum(), delta)
    };
    let objective = |alpha: &DMatrix<f64>| {
        let div = kl_matrix(alpha, &p);
        if div < DIVERGENCE_GUARD {
            return f64::NEG_INFINITY;
        }
        numerator(alpha).0 / div
    };
    let gradient = |alpha: &DMatrix<f64>| {
        let div = kl_matrix(alpha, &p);
        let (num, delta) = numerator(alpha);
        let grad_num = a * &delta * &at + &at * &delta * a;
        let grad_div = DMatrix::from_fn(q, q, |i, j| (alpha[(i, j)] / p[(i, j)]).ln() + 1.0);
        (grad_num * div - grad_div * num) / (div * div)
    };

    let restarts = restarts.max(1);
    let runs: Vec<(f64, DMatrix<f64>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(replica_seed(seed, k as u64));
            let pattern = start_pattern(k, restarts, pi, &mut rng);
            let start = sinkhorn(p.component_mul(&pattern), pi, pi)?;
            let out = ascend(start, pi, pi, objective, gradient, AscentOptions::default());
            Ok((out.value, out.point, out.converged))
        })
        .collect::<Result<_>>()?;

    let converged_restarts = runs.iter().filter(|r| r.2).count();
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for (value, point, _) in runs {
        if value.is_finite() && best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, point));
        }
    }
    let best_found = best.as_ref().map(|b| b.0);
    let (value, argmax) = match best {
        Some((v, point)) if v > hessian => (v, CouplingMatrix { pi: pi.to_vec(), alpha: point }),
        _ => (hessian, product),
    };
    Ok(QResult {
        value,
        argmax,
        hessian_ratio: hessian,
        best_found,
        restarts_used: restarts,
        converged_restarts,
        converged: converged_restarts > 0,
    })
}

/// `Q(π, (M − dJ)/√(2d))` for a model.
pub fn q_value_for(params: &ModelParams, restarts: usize, seed: u64) -> Result<QResult> {
    q_value(params.pi(), &scaled_centered(params), restarts, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sufficiency {
    /// `Q < 1`: contiguous with Erdős–Rényi and non-detectable.
    ContiguousNondetectable,
    /// `Q > 1`: the second moment of the likelihood ratio diverges.
    SecondMomentDiverges,
    /// `|Q − 1| ≤ BOUNDARY_BAND`.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub sufficiency: Sufficiency,
    pub q: QResult,
}

pub fn sufficiency_verdict(params: &ModelParams, restarts: usize, seed: u64) -> Result<Verdict> {
    let q = q_value_for(params, restarts, seed)?;
    let sufficiency = if q.value < 1.0 - BOUNDARY_BAND {
        Sufficiency::ContiguousNondetectable
    } else if q.value > 1.0 + BOUNDARY_BAND {
        Sufficiency::SecondMomentDiverges
    } else {
        Sufficiency::Boundary
    };
    Ok(Verdict { sufficiency, q })
}
