//! Robust (letter-frequency) typicality and the pruned product distribution
//! used to draw codewords.
//!
//! A sequence `s` of length `n` is typical for `P` with slack `delta` when
//! `|N(a|s)/n - P(a)| <= delta * P(a)` for every letter `a`; in particular
//! letters with `P(a) = 0` must not occur. Boundary ties count as typical.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prob::{JointPmf, Pmf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityParams {
    pub n: usize,
    pub delta: f64,
}

impl TypicalityParams {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(TypicalityParams { n, delta })
    }
}

// Relative slack for exact-boundary ties under floating point.
const TIE_SLACK: f64 = 1e-12;

/// Typicality test on a vector of letter counts summing to `n`.
pub fn counts_typical(counts: &[usize], probs: &[f64], n: usize, delta: f64) -> bool {
    let n = n as f64;
    counts.iter().zip(probs).all(|(&c, &p)| {
        if p == 0.0 {
            return c == 0;
        }
        let dev = (c as f64 - n * p).abs();
        dev <= delta * n * p * (1.0 + TIE_SLACK) + TIE_SLACK
    })
}

pub fn letter_counts(seq: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &s in seq {
        counts[s] += 1;
    }
    counts
}

pub fn is_typical(seq: &[usize], p: &Pmf, params: &TypicalityParams) -> bool {
    if seq.len() != params.n || seq.iter().any(|&s| s >= p.len()) {
        return false;
    }
    counts_typical(&letter_counts(seq, p.len()), p.probs(), params.n, params.delta)
}

/// Joint typicality of `(a, b)` against a two-axis joint `(A, B)`.
pub fn is_jointly_typical(a: &[usize], b: &[usize], j: &JointPmf, params: &TypicalityParams) -> bool {
    let axes = j.axes();
    if axes.len() != 2 || a.len() != params.n || b.len() != params.n {
        return false;
    }
    let (ka, kb) = (axes[0], axes[1]);
    let mut counts = vec![0; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        if x >= ka || y >= kb {
            return false;
        }
        counts[x * kb + y] += 1;
    }
    counts_typical(&counts, j.table(), params.n, params.delta)
}

/// `ln(k!)` for `k = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// All count vectors of `k` letters summing to `n`.
pub(crate) fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(left - c, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// `P^n` restricted to the typical set and renormalized by `1 - eps`, where
/// `eps` is the i.i.d. mass outside the typical set.
#[derive(Debug, Clone)]
pub struct PrunedProduct {
    p: Pmf,
    params: TypicalityParams,
    // Typical types with their cumulative i.i.d. mass.
    types: Vec<Vec<usize>>,
    cumulative: Vec<f64>,
    typical_mass: f64,
}

impl PrunedProduct {
    pub fn new(p: &Pmf, params: TypicalityParams) -> Result<Self> {
        let lnf = ln_factorials(params.n);
        let mut types = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for counts in compositions(params.n, p.len()) {
            if !counts_typical(&counts, p.probs(), params.n, params.delta) {
                continue;
            }
            let mut ln_mass = lnf[params.n];
            for (&c, &q) in counts.iter().zip(p.probs()) {
                ln_mass -= lnf[c];
                if c > 0 {
                    ln_mass += c as f64 * q.ln();
                }
            }
            acc += ln_mass.exp();
            types.push(counts);
            cumulative.push(acc);
        }
        if types.is_empty() || acc <= 0.0 {
            return Err(Error::EmptyTypicalSet { n: params.n, delta: params.delta });
        }
        Ok(PrunedProduct { p: p.clone(), params, types, cumulative, typical_mass: acc })
    }

    pub fn params(&self) -> &TypicalityParams {
        &self.params
    }

    pub fn base(&self) -> &Pmf {
        &self.p
    }

    /// `eps = Pr[not typical]` under `P^n`.
    pub fn epsilon(&self) -> f64 {
        (1.0 - self.typical_mass).max(0.0)
    }

    /// `1 - eps`, computed directly as the typical mass.
    pub fn typical_mass(&self) -> f64 {
        self.typical_mass
    }

    pub fn contains(&self, seq: &[usize]) -> bool {
        is_typical(seq, &self.p, &self.params)
    }

    /// Pointwise probability of a length-`n` sequence.
    pub fn prob(&self, seq: &[usize]) -> f64 {
        if !self.contains(seq) {
            return 0.0;
        }
        let iid: f64 = seq.iter().map(|&s| self.p.get(s)).product();
        iid / self.typical_mass
    }

    /// Draws a sequence: a typical type by mass, then a uniform arrangement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let u = rng.gen::<f64>() * self.typical_mass;
        let t = self.cumulative.partition_point(|&c| c <= u).min(self.types.len() - 1);
        let mut seq: Vec<usize> = self.types[t]
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| std::iter::repeat(a).take(c))
            .collect();
        for i in (1..seq.len()).rev() {
            let j = rng.gen_range(0..=i);
            seq.swap(i, j);
        }
        seq
    }

    pub fn sample_seeded(&self, seed: u64) -> Vec<usize> {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}
