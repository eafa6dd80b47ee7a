//! Block-model parameters and the quantities derived from them.
//!
//! A model is a label distribution `π` and a symmetric connectivity matrix `M`
//! on the `n·probability` scale: vertices with labels `i`, `j` are joined with
//! probability `M_ij / n`. Every vertex must have the same expected degree
//! `d = Σ_j M_ij π_j`. From these we derive the label transition matrix
//! `T = diag(π)·M / d`, its spectrum, and the centred matrices
//! `A = M − d·J` and `B = diag(π)·A / d`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the equal-expected-degree check.
pub const DEGREE_TOLERANCE: f64 = 1e-9;

/// Slack on the admissible range of `λ` to absorb rounding in `−1/(q−1)`.
const LAMBDA_SLACK: f64 = 1e-12;

/// How a model was specified. This is also the JSON wire form:
/// `{"q": 3, "d": 4.0, "lambda": 0.25}` or `{"pi": [...], "M": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Symmetric {
        q: usize,
        d: f64,
        lambda: f64,
    },
    General {
        pi: Vec<f64>,
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
    },
}

impl ParamSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn build(&self) -> Result<ModelParams> {
        match self {
            ParamSpec::Symmetric { q, d, lambda } => ModelParams::symmetric(*q, *d, *lambda),
            ParamSpec::General { pi, m } => ModelParams::general(pi.clone(), m.clone()),
        }
    }
}

/// The symmetric model: `q` equal groups, within-group rate `c_in`, between
/// rate `c_out`, parametrized by average degree `d` and second eigenvalue `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricParams {
    pub q: usize,
    pub d: f64,
    pub lambda: f64,
}

impl SymmetricParams {
    pub fn new(q: usize, d: f64, lambda: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
        }
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::out_of_range("d", d, "[0, ∞)"));
        }
        let lo = -1.0 / (q as f64 - 1.0);
        if !(lambda.is_finite() && lambda >= lo - LAMBDA_SLACK && lambda <= 1.0 + LAMBDA_SLACK) {
            return Err(Error::out_of_range("lambda", lambda, format!("[{lo}, 1]")));
        }
        Ok(Self {
            q,
            d,
            lambda: lambda.clamp(lo, 1.0),
        })
    }

    /// `c_in = d(1 + (q−1)λ)`.
    pub fn cin(&self) -> f64 {
        (self.d * (1.0 + (self.q as f64 - 1.0) * self.lambda)).max(0.0)
    }

    /// `c_out = d(1 − λ)`.
    pub fn cout(&self) -> f64 {
        (self.d * (1.0 - self.lambda)).max(0.0)
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        ModelParams::symmetric(self.q, self.d, self.lambda)
    }
}

/// A validated block model with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ParamSpec,
    pi: Vec<f64>,
    m: DMatrix<f64>,
    d: f64,
    t: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl Serialize for ModelParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let spec = ParamSpec::deserialize(de)?;
        spec.build().map_err(serde::de::Error::custom)
    }
}

impl ModelParams {
    /// The symmetric model with `π = 1/q` and `M` built from `c_in`, `c_out`.
    pub fn symmetric(q: usize, d: f64, lambda: f64) -> Result<Self> {
        let sym = SymmetricParams::new(q, d, lambda)?;
        let (cin, cout) = (sym.cin(), sym.cout());
        let m = DMatrix::from_fn(q, q, |i, j| if i == j { cin } else { cout });
        let pi = vec![1.0 / q as f64; q];
        let spec = ParamSpec::Symmetric { q, d, lambda };
        Self::from_parts(spec, pi, m, Some(sym))
    }

    /// A general model from a label distribution and connectivity matrix.
    pub fn general(pi: Vec<f64>, m: Vec<Vec<f64>>) -> Result<Self> {
        let q = pi.len();
        if q < 2 {
            return Err(Error::InvalidParams(format!("q = {q} must be at least 2")));
        }
        if m.len() != q || m.iter().any(|row| row.len() != q) {
            return Err(Error::InvalidParams(format!("M must be {q}×{q}")));
        }
        let mat = DMatrix::from_fn(q, q, |i, j| m[i][j]);
        let spec = ParamSpec::General { pi: pi.clone(), m };
        Self::from_parts(spec, pi, mat, None)
    }

    fn from_parts(
        spec: ParamSpec,
        pi: Vec<f64>,
        m: DMatrix<f64>,
        sym: Option<SymmetricParams>,
    ) -> Result<Self> {
        let q = pi.len();
        if pi.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidParams("π entries must be positive".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("π sums to {total}, not 1")));
        }
        for i in 0..q {
            for j in 0..q {
                let x = m[(i, j)];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::InvalidParams(format!("M[{i}][{j}] = {x} is not a nonnegative number")));
                }
                if x != m[(j, i)] {
                    return Err(Error::InvalidParams(format!("M is not symmetric at ({i}, {j})")));
                }
            }
        }
        let degrees: Vec<f64> = (0..q)
            .map(|i| (0..q).map(|j| m[(i, j)] * pi[j]).sum())
            .collect();
        let d = degrees.iter().sum::<f64>() / q as f64;
        let scale = degrees.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if degrees
            .iter()
            .any(|&di| (di - d).abs() > DEGREE_TOLERANCE * scale.max(f64::MIN_POSITIVE))
        {
            return Err(Error::InvalidParams(format!(
                "expected degrees differ across groups: {degrees:?}"
            )));
        }

        let t = match sym {
            Some(s) => {
                let l = s.lambda;
                DMatrix::from_fn(q, q, |i, j| {
                    (1.0 - l) / q as f64 + if i == j { l } else { 0.0 }
                })
            }
            None if d == 0.0 => DMatrix::from_fn(q, q, |_, j| pi[j]),
            None => DMatrix::from_fn(q, q, |i, j| pi[i] * m[(i, j)] / d),
        };
        let eigenvalues = match sym {
            Some(s) => {
                let mut ev = vec![s.lambda; q];
                ev[0] = 1.0;
                ev
            }
            None => spectrum_of(&pi, &m, d)?,
        };
        Ok(Self {
            spec,
            pi,
            m,
            d,
            t,
            eigenvalues,
        })
    }

    pub fn spec(&self) -> &ParamSpec {
        &self.spec
    }

    pub fn q(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn connectivity(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn degree(&self) -> f64 {
        self.d
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// The symmetric parametrization, if the model was built as one.
    pub fn symmetric_params(&self) -> Option<SymmetricParams> {
        match self.spec {
            ParamSpec::Symmetric { q, d, lambda } => SymmetricParams::new(q, d, lambda).ok(),
            ParamSpec::General { .. } => None,
        }
    }

    /// True when relabeling the groups by any permutation leaves the model
    /// unchanged (uniform `π`, constant diagonal and off-diagonal of `M`).
    pub fn is_exchangeable(&self) -> bool {
        let q = self.q();
        let p0 = self.pi[0];
        let (cin, cout) = (self.m[(0, 0)], self.m[(0, 1)]);
        self.pi.iter().all(|&p| p == p0)
            && (0..q).all(|i| (0..q).all(|j| self.m[(i, j)] == if i == j { cin } else { cout }))
    }

    /// `A = M − d·J`.
    pub fn centered(&self) -> DMatrix<f64> {
        self.m.map(|x| x - self.d)
    }

    /// `B = diag(π)·A / d` (zero when `d = 0`).
    pub fn centered_transition(&self) -> DMatrix<f64> {
        let q = self.q();
        if self.d == 0.0 {
            return DMatrix::zeros(q, q);
        }
        let a = self.centered();
        DMatrix::from_fn(q, q, |i, j| self.pi[i] * a[(i, j)] / self.d)
    }

    /// Eigenvalues of `T` by decreasing absolute value; the first is exactly 1.
    pub fn spectrum(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ₂`, the second eigenvalue of `T`.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// `tr(T^m) = Σᵢ λᵢ^m`.
    pub fn trace_power(&self, m: u32) -> Result<f64> {
        if m == 0 {
            return Err(Error::out_of_range("m", 0.0, "[1, ∞)"));
        }
        Ok(self.eigenvalues.iter().map(|l| l.powi(m as i32)).sum())
    }

    /// Largest `d·λᵢλⱼ` over `i, j ≥ 2`.
    pub fn max_pair_signal(&self) -> f64 {
        let rest = &self.eigenvalues[1..];
        let mut best = f64::NEG_INFINITY;
        for &a in rest {
            for &b in rest {
                best = best.max(self.d * a * b);
            }
        }
        best
    }
}

/// Spectrum of `T = diag(π)M/d` through its symmetric similar matrix
/// `diag(π)^{1/2} M diag(π)^{1/2} / d`, which has real eigenvalues.
fn spectrum_of(pi: &[f64], m: &DMatrix<f64>, d: f64) -> Result<Vec<f64>> {
    let q = pi.len();
    if d == 0.0 {
        let mut ev = vec![0.0; q];
        ev[0] = 1.0;
        return Ok(ev);
    }
    let root = DVector::from_iterator(q, pi.iter().map(|p| p.sqrt()));
    let s = DMatrix::from_fn(q, q, |i, j| root[i] * m[(i, j)] * root[j] / d);
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| {
        b.abs()
            .partial_cmp(&a.abs())
            .unwrap()
            .then(b.partial_cmp(a).unwrap())
    });
    if (ev[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Eigen(format!(
            "top eigenvalue {} of T is not 1 (spectrum {ev:?})",
            ev[0]
        )));
    }
    ev[0] = 1.0;
    Ok(ev)
}
