//! Degree thresholds of the symmetric model as functions of `q` and `λ`.
//!
//! Everything here is built on `φ(x) = (1+x)ln(1+x) − x`, which is evaluated
//! by its Taylor series near zero so that thresholds stay accurate as
//! `λ → 0`. The first-moment denominator is
//! `(1+(q−1)λ)ln(1+(q−1)λ) + (q−1)(1−λ)ln(1−λ) = φ((q−1)λ) + (q−1)φ(−λ)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{binary_entropy, bisect, serialize_extended, serialize_extended_opt, xlogx};
use crate::qfunc;

const LAMBDA_SLACK: f64 = 1e-12;

/// `φ(x) = (1+x)ln(1+x) − x` for `x ≥ −1`, with `φ(−1) = 1`.
pub fn excess_log(x: f64) -> f64 {
    if x.abs() < 0.05 {
        // Σ_{k≥2} (−1)^k x^k / (k(k−1))
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..20 {
            let kf = k as f64;
            sum += term / (kf * (kf - 1.0));
            term *= -x;
        }
        sum
    } else if x <= -1.0 {
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

fn check_lambda(q: usize, lambda: f64) -> Result<f64> {
    if q < 2 {
        return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
    }
    let lo = -1.0 / (q as f64 - 1.0);
    if !(lambda.is_finite() && lambda >= lo - LAMBDA_SLACK && lambda <= 1.0 + LAMBDA_SLACK) {
        return Err(Error::out_of_range("lambda", lambda, format!("[{lo}, 1]")));
    }
    Ok(lambda.clamp(lo, 1.0))
}

/// `(1+(q−1)λ)ln(1+(q−1)λ) + (q−1)(1−λ)ln(1−λ)`. Small `λ` goes through `φ`
/// to avoid cancellation; elsewhere the direct form is exact at `λ = 1`.
fn first_moment_denominator(q: usize, lambda: f64) -> f64 {
    let k = q as f64 - 1.0;
    if lambda.abs() < 0.05 {
        excess_log(k * lambda) + k * excess_log(-lambda)
    } else {
        xlogx(1.0 + k * lambda) + k * xlogx(1.0 - lambda)
    }
}

/// `2q ln q / [(1+(q−1)λ)ln(1+(q−1)λ) + (q−1)(1−λ)ln(1−λ)]`, `+∞` at `λ = 0`.
pub fn d_upper(q: usize, lambda: f64) -> Result<f64> {
    let lambda = check_lambda(q, lambda)?;
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    let qf = q as f64;
    Ok(2.0 * qf * qf.ln() / first_moment_denominator(q, lambda))
}

/// `2 ln(q−1) / ((q−1)λ²)`; zero for `q = 2` (the bound is vacuous there)
/// and `+∞` at `λ = 0`.
pub fn d_lower(q: usize, lambda: f64) -> Result<f64> {
    let lambda = check_lambda(q, lambda)?;
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    let k = q as f64 - 1.0;
    Ok(2.0 * k.ln() / (k * lambda * lambda))
}

/// `1/λ²`, `+∞` at `λ = 0`.
pub fn kesten_stigum(lambda: f64) -> f64 {
    1.0 / (lambda * lambda)
}

/// Exponential rate `lim (1/n) ln P[τ is good]` for a fixed balanced `τ`
/// in `G(n, d/n)`: `−(d/2q)[(1+(q−1)λ)ln(1+(q−1)λ) + (q−1)(1−λ)ln(1−λ)]`.
pub fn good_partition_rate(q: usize, d: f64, lambda: f64) -> Result<f64> {
    let lambda = check_lambda(q, lambda)?;
    Ok(-d / (2.0 * q as f64) * first_moment_denominator(q, lambda))
}

/// `λ²·d_upper(q, λ)⁻¹ − 1` rescaled: positive exactly where
/// `d_upper < 1/λ²`. Continuous through `λ = 0`.
fn below_ks_margin(q: usize, lambda: f64) -> f64 {
    let qf = q as f64;
    let scale = 2.0 * qf * qf.ln();
    if lambda == 0.0 {
        // φ(x) ≈ x²/2, so the denominator ≈ q(q−1)λ²/2.
        return qf * (qf - 1.0) / (2.0 * scale) - 1.0;
    }
    first_moment_denominator(q, lambda) / (scale * lambda * lambda) - 1.0
}

/// The crossing `λ*` of `d_upper(q, λ) = 1/λ²`; `d_upper < 1/λ²` for
/// `λ < λ*`. Only exists for `q ≥ 5`.
pub fn lambda_star(q: usize) -> Result<f64> {
    if q < 2 {
        return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
    }
    let lo = -1.0 / (q as f64 - 1.0);
    let hi = 1.0;
    if below_ks_margin(q, lo) <= 0.0 {
        return Err(Error::NoSignChange(format!(
            "d_upper − 1/λ² for q = {q} (d_upper ≥ 1/λ² throughout)"
        )));
    }
    Ok(bisect(|l| below_ks_margin(q, l), lo, hi, 1e-14, 200))
}

/// Right-hand side of the good-partition overlap equation at overlap `β`.
/// Equals `d_upper` at `β = 0` and diverges as `β → 1 − 1/q`.
pub fn overlap_guarantee_rhs(q: usize, lambda: f64, beta: f64) -> Result<f64> {
    let lambda = check_lambda(q, lambda)?;
    let qf = q as f64;
    let k = qf - 1.0;
    let top = 1.0 - 1.0 / qf;
    if !(0.0..=top).contains(&beta) {
        return Err(Error::out_of_range("beta", beta, format!("[0, {top}]")));
    }
    let x = beta + 1.0 / qf;
    let spread = if top - beta > 0.0 { (top - beta) * k.ln() } else { 0.0 };
    let numerator = 2.0 * qf * (binary_entropy(x.min(1.0)) + spread);
    let within = 1.0 + k * lambda;
    let between = k * (1.0 - lambda);
    let weighted_log = |c: f64, c_at_beta: f64| if c > 0.0 { c * (c / c_at_beta).ln() } else { 0.0 };
    let denominator = weighted_log(within, 1.0 + qf * beta * lambda) + weighted_log(between, k - qf * beta * lambda);
    if denominator <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(numerator / denominator)
}

/// Smallest `β ∈ (0, 1 − 1/q]` at which the overlap-guarantee right-hand
/// side reaches `d`: above `d_upper`, w.h.p. every good partition has overlap
/// at least `β` with the planted one.
pub fn beta_guarantee(q: usize, lambda: f64, d: f64) -> Result<f64> {
    let upper = d_upper(q, lambda)?;
    if !(d > upper) {
        return Err(Error::NoGuarantee { d, d_upper: upper });
    }
    let top = 1.0 - 1.0 / q as f64;
    let gap = |b: f64| overlap_guarantee_rhs(q, lambda, b).map_or(f64::INFINITY, |r| r - d);
    // Locate the first sign change on a grid, then bisect inside that cell.
    const CELLS: usize = 1000;
    let mut prev = 0.0;
    for i in 1..=CELLS {
        let b = top * i as f64 / CELLS as f64;
        if gap(b) >= 0.0 {
            return Ok(bisect(gap, prev, b, 1e-15, 200));
        }
        prev = b;
    }
    Ok(top)
}

/// `μ² / ((1+μ)ln(1+μ) − μ)`: the large-`q` limit of `d_upper/d_lower` at
/// fixed `μ = qλ`. Equals 1 at `μ = −1` and tends to 2 as `μ → 0`.
pub fn asymptotic_ratio(mu: f64) -> Result<f64> {
    if !(mu >= -1.0) || !mu.is_finite() {
        return Err(Error::out_of_range("mu", mu, "[−1, ∞)"));
    }
    if mu == 0.0 {
        return Ok(2.0);
    }
    Ok(mu * mu / excess_log(mu))
}

/// Which side of the thresholds a degree falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `d < d_lower`: contiguous with Erdős–Rényi, detection impossible.
    Contiguous,
    /// Between the bounds.
    Gap,
    /// `d > d_upper`: detectable by exhaustive search for good partitions.
    DetectableAboveUpper,
}

/// All threshold quantities at one symmetric parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub q: usize,
    pub lambda: f64,
    pub d: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub d_upper: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub d_lower: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub ks: f64,
    pub lambda_star: Option<f64>,
    pub beta: Option<f64>,
    pub regime: Regime,
    /// For `q = 2` the lower bound is `0` and says nothing.
    pub lower_bound_vacuous: bool,
    #[serde(serialize_with = "serialize_extended")]
    pub second_moment_product: f64,
    #[serde(serialize_with = "serialize_extended_opt")]
    pub q_value: Option<f64>,
}

impl ThresholdReport {
    pub fn new(q: usize, d: f64, lambda: f64) -> Result<Self> {
        let params = ModelParams::symmetric(q, d, lambda)?;
        let upper = d_upper(q, lambda)?;
        let lower = d_lower(q, lambda)?;
        let regime = if d > upper {
            Regime::DetectableAboveUpper
        } else if d < lower {
            Regime::Contiguous
        } else {
            Regime::Gap
        };
        Ok(Self {
            q,
            lambda,
            d,
            d_upper: upper,
            d_lower: lower,
            ks: kesten_stigum(lambda),
            lambda_star: lambda_star(q).ok(),
            beta: beta_guarantee(q, lambda, d).ok(),
            regime,
            lower_bound_vacuous: q == 2,
            second_moment_product: qfunc::second_moment_product(&params),
            q_value: None,
        })
    }

    /// Adds the numerically optimized `Q` at `A = (M − dJ)/√(2d)`.
    pub fn with_q_value(mut self, restarts: usize, seed: u64) -> Result<Self> {
        let params = ModelParams::symmetric(self.q, self.d, self.lambda)?;
        self.q_value = Some(qfunc::q_value_for(&params, restarts, seed)?.value);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excess_log_branches_agree() {
        // 40-digit reference values.
        #[allow(clippy::excessive_precision)]
        let cases = [
            (-0.049, 0.0012206031686538441175),
            (-0.01, 0.000050167505033573228287),
            (1e-6, 4.9999983333341666662e-13),
            (0.03, 0.0004455663087907348146),
            (0.0499, 0.0012247981235426007019),
        ];
        for (x, want) in cases {
            assert!((excess_log(x) - want).abs() < 4e-16 * want, "{x}");
        }
        let x = 0.2;
        assert!((excess_log(x) - ((1.0 + x) * f64::ln_1p(x) - x)).abs() < 1e-16);
        assert_eq!(excess_log(-1.0), 1.0);
        assert_eq!(excess_log(0.0), 0.0);
    }

    #[test]
    fn upper_corners() {
        for q in 2..60 {
            assert_eq!(d_upper(q, 1.0).unwrap(), 2.0);
        }
        assert_eq!(d_upper(3, 0.0).unwrap(), f64::INFINITY);
        // Computed at 30 digits.
        assert!((d_upper(5, -0.25).unwrap() - 14.42513487802156).abs() < 1e-11);
        assert!(d_upper(3, -0.6).is_err());
    }

    #[test]
    fn lower_examples() {
        assert_eq!(d_lower(2, 0.3).unwrap(), 0.0);
        assert!((d_lower(3, 0.5).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-14);
        assert!((d_lower(5, -0.25).unwrap() - 11.0903548889591).abs() < 1e-11);
        assert_eq!(d_lower(4, 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn kesten_stigum_examples() {
        assert_eq!(kesten_stigum(1.0), 1.0);
        assert_eq!(kesten_stigum(0.5), 4.0);
        assert!((kesten_stigum(-0.25) - 16.0).abs() < 1e-12);
        assert_eq!(kesten_stigum(0.0), f64::INFINITY);
    }

    #[test]
    fn lambda_star_needs_q_at_least_five() {
        for q in 2..=4 {
            assert!(matches!(lambda_star(q), Err(Error::NoSignChange(_))));
        }
        let l5 = lambda_star(5).unwrap();
        assert!((d_upper(5, l5).unwrap() - kesten_stigum(l5)).abs() < 1e-8);
        assert!(d_upper(5, l5 - 0.01).unwrap() < kesten_stigum(l5 - 0.01));
        assert!(d_upper(5, l5 + 0.01).unwrap() > kesten_stigum(l5 + 0.01));
    }

    #[test]
    fn margin_is_continuous_at_zero() {
        for q in [5usize, 10, 11, 100] {
            let at = below_ks_margin(q, 0.0);
            // The first-order term is about q·λ·at/3.
            assert!((below_ks_margin(q, 1e-9) - at).abs() < 1e-6);
            assert!((below_ks_margin(q, -1e-9) - at).abs() < 1e-6);
        }
    }

    #[test]
    fn rhs_starts_at_d_upper() {
        for &(q, l) in &[(2usize, 0.5), (5, -0.25), (7, 0.3)] {
            let rhs = overlap_guarantee_rhs(q, l, 0.0).unwrap();
            assert!((rhs - d_upper(q, l).unwrap()).abs() < 1e-10 * rhs);
        }
        assert_eq!(overlap_guarantee_rhs(3, 0.4, 2.0 / 3.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn beta_limits() {
        let up = d_upper(5, -0.25).unwrap();
        assert!(matches!(beta_guarantee(5, -0.25, up), Err(Error::NoGuarantee { .. })));
        let near = beta_guarantee(5, -0.25, up * (1.0 + 1e-9)).unwrap();
        assert!(near > 0.0 && near < 1e-3);
        let far = beta_guarantee(5, -0.25, 1e9).unwrap();
        assert!(far > 0.79 && far <= 0.8);
        assert!(beta_guarantee(3, 0.0, 100.0).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(asymptotic_ratio(-1.0).unwrap(), 1.0);
        assert!((asymptotic_ratio(1.0).unwrap() - 2.58869944956209).abs() < 1e-12);
        assert!((asymptotic_ratio(1e-9).unwrap() - 2.0).abs() < 1e-8);
        assert!(asymptotic_ratio(-1.5).is_err());
    }

    #[test]
    fn report_regimes() {
        let r = ThresholdReport::new(5, 20.0, -0.25).unwrap();
        assert_eq!(r.regime, Regime::DetectableAboveUpper);
        assert!(r.beta.is_some());
        let r = ThresholdReport::new(5, 12.0, -0.25).unwrap();
        assert_eq!(r.regime, Regime::Gap);
        assert!(r.beta.is_none());
        let r = ThresholdReport::new(5, 5.0, -0.25).unwrap();
        assert_eq!(r.regime, Regime::Contiguous);
        assert!(ThresholdReport::new(2, 1.0, 0.5).unwrap().lower_bound_vacuous);
        let json = serde_json::to_string(&ThresholdReport::new(3, 1.0, 0.0).unwrap()).unwrap();
        assert!(json.contains("\"d_upper\":\"inf\""));
    }
}
