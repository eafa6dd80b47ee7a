//! Exact finite-`n` second moment of the label-frequency-restricted
//! likelihood ratio, summed over joint type count matrices.
//!
//! For labelings `σ, τ` with joint counts `N_ij`, every unordered vertex pair
//! whose endpoints have types `(i, j)` and `(k, l)` contributes the factor
//! `E_Q[W W] = st/(nd) + (1 − s/n)(1 − t/n)/(1 − d/n) = 1 + A_ik A_jl/(d(n − d))`
//! with `s = M_ik`, `t = M_jl`, `A = M − dJ`. Grouping pairs by type gives
//! the closed form summed here.

use rayon::prelude::*;
use serde::Serialize;

use crate::detection::Labeling;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{serialize_extended, CompensatedSum};
use crate::qfunc::second_moment_product;

/// Largest `n` for which multinomials are computed in exact integers.
pub const EXACT_MULTINOMIAL_MAX_N: usize = 30;

/// Default cap on the number of count matrices, measured by
/// `C(n + q² − 1, q² − 1)`.
pub const DEFAULT_BUDGET: f64 = 5e8;

/// Joint type counts `N_ij = |{v : σ_v = i, τ_v = j}|`, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountMatrix {
    q: usize,
    counts: Vec<u64>,
}

impl CountMatrix {
    pub fn new(q: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != q * q {
            return Err(Error::InvalidInput(format!("expected {} counts, got {}", q * q, counts.len())));
        }
        Ok(Self { q, counts })
    }

    pub fn from_labelings(sigma: &Labeling, tau: &Labeling) -> Result<Self> {
        if sigma.n() != tau.n() || sigma.q() != tau.q() {
            return Err(Error::InvalidInput("labelings differ in length or q".into()));
        }
        let q = sigma.q();
        let mut counts = vec![0; q * q];
        for (&i, &j) in sigma.values().iter().zip(tau.values()) {
            counts[i * q + j] += 1;
        }
        Ok(Self { q, counts })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.q + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `X_ij = (N_ij − nπᵢπⱼ)/√n`, row-major.
    pub fn normalized(&self, pi: &[f64]) -> Vec<f64> {
        let n = self.n() as f64;
        let q = self.q;
        (0..q * q)
            .map(|k| (self.counts[k] as f64 - n * pi[k / q] * pi[k % q]) / n.sqrt())
            .collect()
    }
}

/// `ln(1 + A_ik A_jl/(d(n−d)))` for every pair of types `a = (i, j)`,
/// `b = (k, l)`, indexed `a·q² + b`.
struct PairLogs {
    types: usize,
    logs: Vec<f64>,
}

impl PairLogs {
    fn new(params: &ModelParams, n: usize) -> Result<Self> {
        let q = params.q();
        let d = params.degree();
        let nf = n as f64;
        if d >= nf {
            return Err(Error::out_of_range("d/n", d / nf, "[0, 1)"));
        }
        let m = params.connectivity();
        if m.iter().any(|&x| x > nf) {
            return Err(Error::InvalidParams(format!("some M_ij exceeds n = {n}")));
        }
        let a = params.centered();
        let types = q * q;
        let mut logs = vec![0.0; types * types];
        if d > 0.0 {
            let scale = 1.0 / (d * (nf - d));
            for ta in 0..types {
                let (i, j) = (ta / q, ta % q);
                for tb in 0..types {
                    let (k, l) = (tb / q, tb % q);
                    logs[ta * types + tb] = (a[(i, k)] * a[(j, l)] * scale).ln_1p();
                }
            }
        }
        Ok(Self { types, logs })
    }

    fn log_weight(&self, counts: &[u64]) -> f64 {
        let t = self.types;
        let mut total = 0.0;
        for a in 0..t {
            let na = counts[a];
            if na == 0 {
                continue;
            }
            if na >= 2 {
                total += (na * (na - 1) / 2) as f64 * self.logs[a * t + a];
            }
            for (b, &nb) in counts.iter().enumerate().skip(a + 1) {
                if nb > 0 {
                    total += (na * nb) as f64 * self.logs[a * t + b];
                }
            }
        }
        total
    }
}

/// `∏_{u<v} E_Q[W_uv(G,σ) W_uv(G,τ)]` for any `(σ, τ)` with joint counts
/// `N`, evaluated exactly (no exponent approximation).
pub fn pair_weight(params: &ModelParams, n: usize, counts: &CountMatrix) -> Result<f64> {
    if counts.q() != params.q() || counts.n() != n as u64 {
        return Err(Error::InvalidInput("count matrix does not match (q, n)".into()));
    }
    Ok(PairLogs::new(params, n)?.log_weight(counts.counts()).exp())
}

/// `ln(n!/∏ kᵢ!)`, exact through integers for `n ≤ 30`.
fn log_multinomial(n: u64, parts: &[u64]) -> f64 {
    if n as usize <= EXACT_MULTINOMIAL_MAX_N {
        (exact_multinomial(n, parts) as f64).ln()
    } else {
        libm::lgamma(n as f64 + 1.0) - parts.iter().map(|&k| libm::lgamma(k as f64 + 1.0)).sum::<f64>()
    }
}

/// `n!/∏ kᵢ!` as a product of binomials; fits `u128` for `n ≤ 30`.
fn exact_multinomial(n: u64, parts: &[u64]) -> u128 {
    let mut result: u128 = 1;
    let mut placed: u64 = 0;
    for &k in parts {
        // C(placed + k, k), built incrementally so every step is integral.
        for step in 1..=k {
            result = result * (placed + step) as u128 / step as u128;
        }
        placed += k;
    }
    debug_assert_eq!(placed, n);
    result
}

fn binomial_estimate(top: f64, k: f64) -> f64 {
    (libm::lgamma(top + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(top - k + 1.0)).exp()
}

/// Admissible label counts `|σ⁻¹(i)| ∈ [nπᵢ − a_n, nπᵢ + a_n]`.
fn windows(pi: &[f64], n: usize, a_n: f64) -> Vec<(u64, u64)> {
    let nf = n as f64;
    pi.iter()
        .map(|&p| {
            let lo = (nf * p - a_n - 1e-9).ceil().max(0.0);
            let hi = (nf * p + a_n + 1e-9).floor().min(nf);
            (lo as u64, hi as u64)
        })
        .collect()
}

/// All compositions of `total` into `parts.len()` nonnegative parts with
/// `parts[j] ≤ caps[j]`, passed to `visit`.
fn compositions(total: u64, caps: &[u64], parts: &mut Vec<u64>, visit: &mut dyn FnMut(&[u64])) {
    let j = parts.len();
    if j + 1 == caps.len() {
        if total <= caps[j] {
            parts.push(total);
            visit(parts);
            parts.pop();
        }
        return;
    }
    let rest_cap: u64 = caps[j + 1..].iter().sum();
    let lo = total.saturating_sub(rest_cap);
    for x in lo..=total.min(caps[j]) {
        parts.push(x);
        compositions(total - x, caps, parts, visit);
        parts.pop();
    }
}

/// `P(Ω_n)`: probability that every label count is within `a_n` of `nπᵢ`.
pub fn omega_probability(pi: &[f64], n: usize, a_n: f64) -> f64 {
    let win = windows(pi, n, a_n);
    let caps: Vec<u64> = win.iter().map(|w| w.1).collect();
    let log_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let mut sum = CompensatedSum::new();
    compositions(n as u64, &caps, &mut Vec::new(), &mut |r| {
        if r.iter().zip(&win).all(|(&x, w)| x >= w.0) {
            let log_p: f64 = r.iter().zip(&log_pi).map(|(&x, lp)| x as f64 * lp).sum();
            sum.add((log_multinomial(n as u64, r) + log_p).exp());
        }
    });
    sum.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentRecord {
    pub n: usize,
    pub q: usize,
    pub a_n: f64,
    /// Exact `E_Q Y_n²`.
    #[serde(serialize_with = "serialize_extended")]
    pub exact_value: f64,
    /// `∏ ψ(d·λᵢλⱼ)`.
    #[serde(serialize_with = "serialize_extended")]
    pub asymptote: f64,
    /// `P(Ω_n)`; the exact value is at least its square.
    pub omega_probability: f64,
    pub count_matrices: u64,
}

/// The default window `a_n = n^{2/3}`.
pub fn default_window(n: usize) -> f64 {
    (n as f64).powf(2.0 / 3.0)
}

/// Exact `E_Q Y_n²` as a sum over count matrices `N` whose row and column
/// sums lie in the `Ω_n` window: `Σ_N multinomial(n; N)·∏(πᵢπⱼ)^{N_ij}·weight(N)`.
/// Work is split by the first row and merged in a fixed order.
pub fn exact_second_moment(params: &ModelParams, n: usize, a_n: f64, budget: f64) -> Result<SecondMomentRecord> {
    if n < 2 {
        return Err(Error::out_of_range("n", n as f64, "[2, ∞)"));
    }
    if !(a_n >= 0.0) {
        return Err(Error::out_of_range("a_n", a_n, "[0, ∞)"));
    }
    let q = params.q();
    let cells = q * q;
    let estimate = binomial_estimate((n + cells - 1) as f64, (cells - 1) as f64);
    if estimate > budget {
        return Err(Error::BudgetExceeded(format!(
            "about {estimate:.3e} count matrices for q = {q}, n = {n} (budget {budget:.3e})"
        )));
    }
    let logs = PairLogs::new(params, n)?;
    let pi = params.pi();
    let log_cell: Vec<f64> = (0..cells).map(|k| (pi[k / q] * pi[k % q]).ln()).collect();
    let win = windows(pi, n, a_n);
    let col_caps: Vec<u64> = win.iter().map(|w| w.1).collect();
    let n64 = n as u64;

    // Every admissible first row (its sum in window 0).
    let mut first_rows = Vec::new();
    for r0 in win[0].0..=win[0].1.min(n64) {
        compositions(r0, &col_caps, &mut Vec::new(), &mut |row| first_rows.push(row.to_vec()));
    }

    let partials: Vec<(CompensatedSum, u64)> = first_rows
        .par_iter()
        .map(|row| {
            let mut acc = CompensatedSum::new();
            let mut count = 0u64;
            let mut cells_buf = row.clone();
            let col_used = row.clone();
            let mut visit = |matrix: &[u64]| {
                let log_term = log_multinomial(n64, matrix)
                    + matrix.iter().zip(&log_cell).map(|(&x, lc)| x as f64 * lc).sum::<f64>()
                    + logs.log_weight(matrix);
                acc.add(log_term.exp());
                count += 1;
            };
            fill_rows(1, q, n64 - row.iter().sum::<u64>(), &win, &col_used, &mut cells_buf, &mut visit);
            (acc, count)
        })
        .collect();

    let mut total = CompensatedSum::new();
    let mut count = 0;
    for (part, c) in &partials {
        total.merge(part);
        count += c;
    }
    Ok(SecondMomentRecord {
        n,
        q,
        a_n,
        exact_value: total.value(),
        asymptote: second_moment_product(params),
        omega_probability: omega_probability(pi, n, a_n),
        count_matrices: count,
    })
}

/// Fills rows `i..q` of a count matrix (row-major in `cells`) given the
/// column sums used so far and the mass still to place.
fn fill_rows(
    i: usize,
    q: usize,
    remaining: u64,
    win: &[(u64, u64)],
    col_used: &[u64],
    cells: &mut Vec<u64>,
    visit: &mut dyn FnMut(&[u64]),
) {
    if i == q {
        if remaining == 0 && col_used.iter().zip(win).all(|(&c, w)| c >= w.0) {
            visit(cells);
        }
        return;
    }
    let caps: Vec<u64> = col_used.iter().zip(win).map(|(&c, w)| w.1.saturating_sub(c)).collect();
    let (lo, hi) = if i + 1 == q {
        (remaining, remaining)
    } else {
        (win[i].0, win[i].1.min(remaining))
    };
    if remaining < win[i].0 || lo > hi || lo < win[i].0 || hi > win[i].1 {
        return;
    }
    for r in lo..=hi {
        compositions(r, &caps, &mut Vec::new(), &mut |row| {
            let used: Vec<u64> = col_used.iter().zip(row).map(|(a, b)| a + b).collect();
            let len = cells.len();
            cells.extend_from_slice(row);
            fill_rows(i + 1, q, remaining - r, win, &used, cells, visit);
            cells.truncate(len);
        });
    }
}
