//! Probability vectors, Poissonized and multinomial sampling, and the
//! sample-splitting operation the estimator constructions rely on.

use crate::rng::RngSeed;
use crate::{Error, Result};
use rand_distr::{Binomial, Distribution as _, Poisson};
use serde::{Deserialize, Serialize};

/// A validated probability vector over `S` symbols.
///
/// Entries are non-negative and sum to 1 within `1e-12`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteEntry(i));
            }
            if w < 0.0 {
                return Err(Error::NegativeEntry(i));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZero);
        }
        Ok(Distribution {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    /// L1 distance `Σ_i |p_i − q_i|` to another distribution; lies in `[0, 2]`.
    pub fn l1_distance(&self, other: &Distribution) -> Result<f64> {
        l1_exact(self, other)
    }
}

/// Uniform over `s` symbols.
pub fn uniform(s: usize) -> Result<Distribution> {
    if s == 0 {
        return Err(Error::InvalidParameter("support size must be >= 1".into()));
    }
    Distribution::from_weights(&vec![1.0; s])
}

/// Zipf with weights `i^{-exponent}`, `i = 1..=s`.
pub fn zipf(s: usize, exponent: f64) -> Result<Distribution> {
    if s == 0 || !(exponent > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "zipf needs s >= 1 and exponent > 0, got s = {s}, exponent = {exponent}"
        )));
    }
    let weights: Vec<f64> = (1..=s).map(|i| (i as f64).powf(-exponent)).collect();
    Distribution::from_weights(&weights)
}

/// Mixture of a point mass at the first symbol (weight `gamma`) with the
/// uniform distribution (weight `1 − gamma`).
pub fn point_mass_mix(s: usize, gamma: f64) -> Result<Distribution> {
    if s == 0 || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "point_mass_mix needs s >= 1 and gamma in [0, 1], got s = {s}, gamma = {gamma}"
        )));
    }
    let mut weights = vec![(1.0 - gamma) / s as f64; s];
    weights[0] += gamma;
    Distribution::from_weights(&weights)
}

/// A distribution at exact L1 distance `delta` from `q`: moves `delta/2`
/// mass from the largest entry of `q` to the smallest other entry. The
/// construction is deterministic and keeps `P` close to `Q`'s non-smooth set.
pub fn near(q: &Distribution, delta: f64) -> Result<Distribution> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "near needs delta in [0, 2], got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(q.clone());
    }
    if q.support_size() < 2 {
        return Err(Error::InvalidParameter(
            "near with delta > 0 needs support size >= 2".into(),
        ));
    }
    let probs = q.probs();
    let i_max = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let i_min = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != i_max)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if probs[i_max] < delta / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "cannot move delta/2 = {} mass: largest entry is {}",
            delta / 2.0,
            probs[i_max]
        )));
    }
    let mut out = probs.to_vec();
    out[i_max] -= delta / 2.0;
    out[i_min] += delta / 2.0;
    Ok(Distribution { probs: out })
}

/// `Σ_i |p_i − q_i|`.
pub fn l1_exact(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.support_size() != q.support_size() {
        return Err(Error::LengthMismatch(p.support_size(), q.support_size()));
    }
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Per-symbol sampled counts with the nominal sampling rate `n`.
///
/// Under Poissonization `counts[i] ~ Poi(n p_i)` and the empirical
/// probability `counts[i] / n` may exceed 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountVector {
    pub counts: Vec<u64>,
    pub rate_n: f64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>, rate_n: f64) -> Result<Self> {
        if !(rate_n > 0.0) || !rate_n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rate_n must be positive and finite, got {rate_n}"
            )));
        }
        Ok(CountVector { counts, rate_n })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Empirical probability of symbol `i`.
    pub fn empirical(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.rate_n
    }
}

/// The two halves produced by binomial thinning, each at half the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCounts {
    pub first: CountVector,
    pub second: CountVector,
    pub halved_rate: f64,
}

/// Draws `counts[i] ~ Poi(n p_i)` independently per symbol.
///
/// Each symbol uses its own derived stream, so the result does not depend on
/// evaluation order.
pub fn sample_poissonized(p: &Distribution, n: f64, seed: RngSeed) -> Result<CountVector> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must be positive and finite, got {n}"
        )));
    }
    let counts = p
        .probs
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            let lambda = n * pi;
            if lambda == 0.0 {
                0
            } else {
                let mut rng = seed.child(i as u64).rng();
                Poisson::new(lambda)
                    .expect("positive finite lambda")
                    .sample(&mut rng) as u64
            }
        })
        .collect();
    CountVector::new(counts, n)
}

/// Draws a single multinomial sample of size `n` (fixed total, the
/// alternative to Poissonization) via sequential conditional binomials.
pub fn sample_multinomial(p: &Distribution, n: u64, seed: RngSeed) -> Result<CountVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("multinomial needs n >= 1".into()));
    }
    let mut rng = seed.rng();
    let mut remaining = n;
    let mut rest_mass = 1.0;
    let mut counts = Vec::with_capacity(p.support_size());
    for (i, &pi) in p.probs.iter().enumerate() {
        if remaining == 0 {
            counts.push(0);
            continue;
        }
        if i + 1 == p.support_size() {
            counts.push(remaining);
            remaining = 0;
            continue;
        }
        let cond = if rest_mass > 0.0 {
            (pi / rest_mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond)
                .expect("valid binomial")
                .sample(&mut rng)
        };
        counts.push(draw);
        remaining -= draw;
        rest_mass -= pi;
    }
    CountVector::new(counts, n as f64)
}

/// Thins each count by an independent fair coin, yielding two independent
/// halves; under Poissonized input each half is `Poi(n p_i / 2)`.
///
/// Per-symbol streams are derived from `(seed, symbol index)`, so the split
/// is deterministic under any execution order.
pub fn split_counts(x: &CountVector, seed: RngSeed) -> SplitCounts {
    let half = x.rate_n / 2.0;
    let mut first = Vec::with_capacity(x.len());
    let mut second = Vec::with_capacity(x.len());
    for (i, &c) in x.counts.iter().enumerate() {
        let kept = if c == 0 {
            0
        } else {
            let mut rng = seed.child(i as u64).rng();
            Binomial::new(c, 0.5)
                .expect("p = 1/2 is valid")
                .sample(&mut rng)
        };
        first.push(kept);
        second.push(c - kept);
    }
    SplitCounts {
        first: CountVector {
            counts: first,
            rate_n: half,
        },
        second: CountVector {
            counts: second,
            rate_n: half,
        },
        halved_rate: half,
    }
}
