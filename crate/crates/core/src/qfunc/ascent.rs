//! Projected gradient ascent over transportation polytopes: additive steps
//! along the gradient projected onto zero row and column sums, a floor on
//! entries, Sinkhorn re-projection and backtracking.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Entries are clamped to this floor before re-projection.
pub const ENTRY_FLOOR: f64 = 1e-14;

const SINKHORN_TOL: f64 = 1e-14;
const SINKHORN_MAX_ITER: usize = 20_000;

/// Scales a nonnegative matrix to row sums `rows` and column sums `cols`.
/// Converges when every row sum is within `1e-14` (relative to the target
/// scale, if above 1) after a column pass.
pub fn sinkhorn(mut m: DMatrix<f64>, rows: &[f64], cols: &[f64]) -> Result<DMatrix<f64>> {
    let q = rows.len();
    if m.nrows() != q || m.ncols() != cols.len() {
        return Err(Error::InvalidInput("marginal lengths do not match the matrix".into()));
    }
    if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput("Sinkhorn needs finite nonnegative entries".into()));
    }
    let scale = rows.iter().cloned().fold(0.0, f64::max);
    for _ in 0..SINKHORN_MAX_ITER {
        for (i, &target) in rows.iter().enumerate() {
            let s: f64 = m.row(i).sum();
            if s <= 0.0 {
                return Err(Error::InvalidInput(format!("row {i} has no mass")));
            }
            m.row_mut(i).scale_mut(target / s);
        }
        for (j, &target) in cols.iter().enumerate() {
            let s: f64 = m.column(j).sum();
            if s <= 0.0 {
                return Err(Error::InvalidInput(format!("column {j} has no mass")));
            }
            m.column_mut(j).scale_mut(target / s);
        }
        let worst = (0..q)
            .map(|i| (m.row(i).sum() - rows[i]).abs())
            .fold(0.0, f64::max);
        if worst <= SINKHORN_TOL * scale.max(1.0) {
            return Ok(m);
        }
    }
    Ok(m)
}

/// Projection onto matrices with zero row and column sums.
pub fn project_tangent(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = g.shape();
    let row_means: Vec<f64> = (0..r).map(|i| g.row(i).sum() / c as f64).collect();
    let col_means: Vec<f64> = (0..c).map(|j| g.column(j).sum() / r as f64).collect();
    let mean = g.sum() / (r * c) as f64;
    DMatrix::from_fn(r, c, |i, j| g[(i, j)] - row_means[i] - col_means[j] + mean)
}

/// Largest absolute deviation of the row and column sums from the targets.
pub fn marginal_error(m: &DMatrix<f64>, rows: &[f64], cols: &[f64]) -> f64 {
    let r = (0..m.nrows()).map(|i| (m.row(i).sum() - rows[i]).abs());
    let c = (0..m.ncols()).map(|j| (m.column(j).sum() - cols[j]).abs());
    r.chain(c).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop after this many consecutive steps with negligible improvement.
    pub patience: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 600,
            patience: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ascent {
    pub point: DMatrix<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximizes `f` from `start` (already inside the polytope) with marginals
/// `rows`, `cols`. `grad` is the Euclidean gradient; it is projected before
/// each step.
pub fn ascend<F, G>(start: DMatrix<f64>, rows: &[f64], cols: &[f64], f: F, grad: G, opts: AscentOptions) -> Ascent
where
    F: Fn(&DMatrix<f64>) -> f64,
    G: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let total: f64 = rows.iter().sum();
    let unit = total / (rows.len() * cols.len()) as f64;
    let mut x = start;
    let mut fx = f(&x);
    let mut step = 0.05 * unit;
    let mut quiet = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let g = project_tangent(&grad(&x));
        let norm = g.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            converged = norm.is_finite();
            break;
        }
        let direction = g / norm;
        let mut accepted = None;
        while step > 1e-13 * unit {
            let mut y = &x + &direction * step;
            y.apply(|v| *v = v.max(ENTRY_FLOOR));
            if let Ok(y) = sinkhorn(y, rows, cols) {
                let fy = f(&y);
                if fy > fx {
                    accepted = Some((y, fy));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((y, fy)) = accepted else {
            converged = true;
            break;
        };
        let gain = fy - fx;
        x = y;
        fx = fy;
        step = (step * 2.0).min(total);
        if gain <= 1e-13 * fx.abs().max(1e-3) {
            quiet += 1;
            if quiet >= opts.patience {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ascent {
        point: x,
        value: fx,
        converged,
        iterations,
    }
}

/// A uniformly random permutation of `0..q`.
fn random_permutation(q: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..q).collect();
    for i in (1..q).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

/// Multiplicative start patterns `S`; restart `k` begins at
/// `Sinkhorn(p ⊙ S)`. Cycles through random log-normal matrices, small
/// perturbations of the product point, identity mixtures and permutation
/// mixtures, the last two scaled by `1/π_i` so they hit the intended mixture
/// exactly for uniform `π`.
pub fn start_pattern(k: usize, restarts: usize, pi: &[f64], rng: &mut Rng) -> DMatrix<f64> {
    let q = pi.len();
    let kind = k % 4;
    let slot = k / 4;
    let slots = restarts.div_ceil(4).max(1);
    match kind {
        0 => {
            let spread = 0.5 + 2.5 * rng.random::<f64>();
            DMatrix::from_fn(q, q, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                (spread * z).exp()
            })
        }
        1 => {
            let eps = 0.02 + 0.2 * rng.random::<f64>();
            DMatrix::from_fn(q, q, |_, _| 1.0 + eps * (2.0 * rng.random::<f64>() - 1.0))
        }
        2 => {
            let t = 0.98 * (slot + 1) as f64 / (slots + 1) as f64;
            DMatrix::from_fn(q, q, |i, j| (1.0 - t) + if i == j { t / pi[i] } else { 0.0 })
        }
        _ => {
            let perm = random_permutation(q, rng);
            let t = 0.2 + 0.75 * rng.random::<f64>();
            DMatrix::from_fn(q, q, |i, j| (1.0 - t) + if perm[i] == j { t / pi[i] } else { 0.0 })
        }
    }
}
