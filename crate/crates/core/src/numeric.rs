//! Small numerical helpers shared across modules.

use serde::Serializer;

/// `x·ln x` with the convention `0·ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `−x·ln x`, the single-atom entropy contribution.
pub fn entropy_term(x: f64) -> f64 {
    -xlogx(x)
}

/// Two-point entropy `h(x) = −x ln x − (1−x) ln(1−x)` in nats.
pub fn binary_entropy(x: f64) -> f64 {
    entropy_term(x) + entropy_term(1.0 - x)
}

/// `ψ(x) = (1−x)^{−1/2} e^{−x/2 − x²/4}`; `+∞` for `x ≥ 1`.
pub fn psi(x: f64) -> f64 {
    if x >= 1.0 {
        f64::INFINITY
    } else {
        log_psi(x).exp()
    }
}

/// `ln ψ(x)`; `+∞` for `x ≥ 1`.
pub fn log_psi(x: f64) -> f64 {
    if x >= 1.0 {
        f64::INFINITY
    } else {
        -0.5 * (-x).ln_1p() - x / 2.0 - x * x / 4.0
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Returns the midpoint of
/// the final bracket. `f(lo)` and `f(hi)` must have opposite signs.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> f64 {
    let lo_positive = f(lo) > 0.0;
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Serializes an extended real: finite values as numbers, infinities as the
/// strings `"inf"` / `"-inf"`, NaN as `null`.
pub fn serialize_extended<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_none()
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn serialize_extended_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => serialize_extended(v, s),
        None => s.serialize_none(),
    }
}
