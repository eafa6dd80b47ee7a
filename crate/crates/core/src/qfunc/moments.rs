use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{log_psi, serialize_extended};

/// The pair signals `x_ij = d·λᵢλⱼ` over `i, j ≥ 2`.
fn pair_signals(params: &ModelParams) -> Vec<f64> {
    let d = params.degree();
    let rest = &params.spectrum()[1..];
    rest.iter().flat_map(|&a| rest.iter().map(move |&b| d * a * b)).collect()
}

/// `∏_{i,j≥2} ψ(d·λᵢλⱼ)`, the limiting second moment of the restricted
/// likelihood ratio; `+∞` as soon as some `d·λᵢλⱼ ≥ 1`.
pub fn second_moment_product(params: &ModelParams) -> f64 {
    let signals = pair_signals(params);
    if signals.iter().any(|&x| x >= 1.0) {
        return f64::INFINITY;
    }
    signals.iter().map(|&x| log_psi(x)).sum::<f64>().exp()
}

/// `ν₁ = −(d/2)·tr(B)²` and `ν₂ = −(d²/4)·tr(B²)²`, from traces of `B` and
/// from the spectrum `B` shares with `T` minus its top eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuTerms {
    pub nu1: f64,
    pub nu2: f64,
    pub nu1_eigen: f64,
    pub nu2_eigen: f64,
}

pub fn nu_terms(params: &ModelParams) -> NuTerms {
    let d = params.degree();
    let b = params.centered_transition();
    let tr_b = b.trace();
    let tr_b2 = (&b * &b).trace();
    let signals = pair_signals(params);
    NuTerms {
        nu1: -0.5 * d * tr_b * tr_b,
        nu2: -0.25 * d * d * tr_b2 * tr_b2,
        nu1_eigen: -0.5 * signals.iter().sum::<f64>(),
        nu2_eigen: -0.25 * signals.iter().map(|x| x * x).sum::<f64>(),
    }
}

/// Both sides of `Σ_{m≥3} μ_m δ_m² = Σ_{i,j≥2} ln ψ(d·λᵢλⱼ)` with
/// `μ_m = d^m/(2m)` and `δ_m = tr(T^m) − 1`, the left truncated at `m_trunc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubgraphIdentity {
    pub lhs: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub rhs: f64,
    pub gap: f64,
}

pub fn small_subgraph_identity(params: &ModelParams, m_trunc: usize) -> Result<SubgraphIdentity> {
    if m_trunc < 3 {
        return Err(Error::out_of_range("m_trunc", m_trunc as f64, "[3, ∞)"));
    }
    let signals = pair_signals(params);
    let worst = signals.iter().fold(0.0f64, |w, x| w.max(x.abs()));
    if worst >= 1.0 {
        return Err(Error::Divergent(worst));
    }
    // μ_m δ_m² = (1/2m) Σ_{i,j} (dλᵢλⱼ)^m, summed per pair to avoid d^m.
    let mut lhs = 0.0;
    for &x in &signals {
        let mut power = x * x * x;
        for m in 3..=m_trunc {
            lhs += power / (2.0 * m as f64);
            power *= x;
            if power == 0.0 {
                break;
            }
        }
    }
    let rhs: f64 = signals.iter().map(|&x| log_psi(x)).sum();
    Ok(SubgraphIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
