use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// A vector in `[q]^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Labeling {
    q: usize,
    values: Vec<usize>,
}

impl Labeling {
    pub fn new(q: usize, values: Vec<usize>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidInput("a labeling needs q ≥ 1".into()));
        }
        if let Some((v, &x)) = values.iter().enumerate().find(|&(_, &x)| x >= q) {
            return Err(Error::InvalidInput(format!("vertex {v} has label {x} outside 0..{q}")));
        }
        Ok(Self { q, values })
    }

    pub fn constant(q: usize, n: usize) -> Result<Self> {
        Self::new(q, vec![0; n])
    }

    /// A uniformly random balanced labeling; requires `q | n`.
    pub fn random_balanced<R: Rng + ?Sized>(q: usize, n: usize, rng: &mut R) -> Result<Self> {
        if q == 0 || !n.is_multiple_of(q) {
            return Err(Error::InvalidInput(format!("balanced labelings need q | n (q = {q}, n = {n})")));
        }
        let mut values: Vec<usize> = (0..n).map(|v| v % q).collect();
        values.shuffle(rng);
        Ok(Self { q, values })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn get(&self, v: usize) -> usize {
        self.values[v]
    }

    /// Group sizes `|σ⁻¹(i)|`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.q];
        for &x in &self.values {
            counts[x] += 1;
        }
        counts
    }

    /// Every group has exactly `n/q` members.
    pub fn is_balanced(&self) -> bool {
        let n = self.n();
        n.is_multiple_of(self.q) && self.counts().iter().all(|&c| c == n / self.q)
    }

    /// Members of each group in increasing order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.q];
        for (v, &x) in self.values.iter().enumerate() {
            groups[x].push(v);
        }
        groups
    }

    /// `ρ∘σ` for a permutation `ρ` of `0..q` given as `rho[i] = ρ(i)`.
    pub fn relabeled(&self, rho: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.q];
        if rho.len() != self.q || rho.iter().any(|&r| r >= self.q || std::mem::replace(&mut seen[r], true)) {
            return Err(Error::InvalidInput(format!("{rho:?} is not a permutation of 0..{}", self.q)));
        }
        Ok(Self {
            q: self.q,
            values: self.values.iter().map(|&x| rho[x]).collect(),
        })
    }

    /// One label per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::with_capacity(3 * self.n());
        for &x in &self.values {
            let _ = writeln!(out, "{x}");
        }
        out
    }

    /// Reads one label per line, ignoring blank lines and `#` comments.
    pub fn read_lines<R: BufRead>(reader: R, q: usize) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let x = line
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            values.push(x);
        }
        Self::new(q, values)
    }

    pub fn parse_lines(text: &str, q: usize) -> Result<Self> {
        Self::read_lines(text.as_bytes(), q)
    }
}
