//! The contiguity functional `Q` over the transportation polytope, its
//! doubly stochastic reduction `Φ` for the symmetric model, entropy
//! relaxation bounds, and the limiting second moment with its cycle
//! decomposition.

pub mod ascent;
mod moments;
mod phi;
mod qvalue;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use ascent::{sinkhorn, AscentOptions};
pub use moments::{nu_terms, second_moment_product, small_subgraph_identity, NuTerms, SubgraphIdentity};
pub use phi::{
    an_entropy_bound, an_inequality_check, doubly_stochastic_entropy, phi, phi_max, phi_scan, random_doubly_stochastic,
    AnCheck, PhiMax, PhiScanRow,
};
pub use qvalue::{
    hessian_ratio, q_value, q_value_for, scaled_centered, sufficiency_verdict, QResult, Sufficiency, Verdict,
    BOUNDARY_BAND,
};

/// Kullback–Leibler divergence `Σ pᵢ ln(pᵢ/p̃ᵢ)` with `0·ln 0 = 0`. Mass of `p`
/// outside the support of `p̃` gives `+∞`.
pub fn kl_divergence(p: &[f64], pt: &[f64]) -> Result<f64> {
    if p.len() != pt.len() {
        return Err(Error::InvalidInput(format!("lengths differ: {} vs {}", p.len(), pt.len())));
    }
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(pt) {
        if a < 0.0 || b < 0.0 {
            return Err(Error::InvalidInput("distributions must be nonnegative".into()));
        }
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    Ok(total)
}

/// `D(α, p)` for matrices of equal shape, `p > 0`.
pub(crate) fn kl_matrix(alpha: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    alpha
        .iter()
        .zip(p.iter())
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum()
}

/// A point of the transportation polytope: a nonnegative `q × q` matrix
/// whose row and column sums are both `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pi: Vec<f64>,
    alpha: DMatrix<f64>,
}

/// Marginal tolerance for user-supplied couplings.
pub const MARGINAL_TOLERANCE: f64 = 1e-12;

impl CouplingMatrix {
    pub fn new(pi: Vec<f64>, alpha: DMatrix<f64>) -> Result<Self> {
        let q = pi.len();
        if alpha.shape() != (q, q) {
            return Err(Error::InvalidInput(format!("α is {:?}, expected {q}×{q}", alpha.shape())));
        }
        if alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::InvalidInput("α has negative or NaN entries".into()));
        }
        let err = ascent::marginal_error(&alpha, &pi, &pi);
        if err > MARGINAL_TOLERANCE {
            return Err(Error::InvalidInput(format!("marginals of α are off by {err:e}")));
        }
        Ok(Self { pi, alpha })
    }

    /// The uncorrelated point `p = π ⊗ π`.
    pub fn product(pi: &[f64]) -> Self {
        let q = pi.len();
        Self {
            pi: pi.to_vec(),
            alpha: DMatrix::from_fn(q, q, |i, j| pi[i] * pi[j]),
        }
    }

    pub fn q(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.q()).map(|i| self.alpha.row(i).iter().copied().collect()).collect()
    }

    /// `D(α, π ⊗ π)`.
    pub fn divergence_from_product(&self) -> f64 {
        kl_matrix(&self.alpha, Self::product(&self.pi).alpha())
    }
}

impl Serialize for CouplingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            pi: &'a [f64],
            alpha: Vec<Vec<f64>>,
        }
        Wire {
            pi: &self.pi,
            alpha: self.rows(),
        }
        .serialize(s)
    }
}
