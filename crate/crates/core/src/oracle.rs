//! Exact (truncated-series) expectations under Poisson sampling and
//! brute-force risk for tiny instances.
//!
//! This module is the independent verification engine: it evaluates
//! estimator kernels as black boxes against the Poisson pmf, so agreement
//! with an analytic target is evidence about the kernel, not about shared
//! code paths.

use crate::prob::{CountVector, Distribution};
use crate::{Error, Result};
use std::sync::OnceLock;

/// Controls where the infinite Poisson series is cut.
///
/// The truncation point `m*` is chosen so the Poisson tail mass beyond it is
/// below `tail_tol` (via the Chernoff tail bound), then extended while the
/// boundary term is still significant relative to the accumulated sum.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    pub tail_tol: f64,
    pub hard_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tail_tol: 1e-18,
            hard_cap: 1_000_000,
        }
    }
}

const LN_FACT_TABLE: usize = 1 << 16;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_TABLE];
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for k in 1..LN_FACT_TABLE {
            // Kahan-compensated cumulative sum of ln k.
            let y = (k as f64).ln() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            t[k] = sum;
        }
        t
    })
}

/// `ln k!`; table-backed, ln-gamma beyond the table.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < LN_FACT_TABLE {
        ln_fact_table()[k as usize]
    } else {
        statrs::function::gamma::ln_gamma(k as f64 + 1.0)
    }
}

/// `ln P(X = k)` for `X ~ Poi(lambda)`, `lambda > 0`.
fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    -lambda + k as f64 * lambda.ln() - ln_factorial(k)
}

/// `P(X = k)` for `X ~ Poi(lambda)`.
pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    ln_poisson_pmf(k, lambda).exp()
}

/// Smallest `m` with Poisson tail mass beyond it provably below `tail_tol`:
/// from `P(X >= (1+d)λ) <= exp(-d²λ/3) ∨ exp(-dλ/3)`.
fn truncation_point(lambda: f64, policy: &TruncationPolicy) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let l = -policy.tail_tol.ln();
    let delta = {
        let small = (3.0 * l / lambda).sqrt();
        if small <= 1.0 {
            small
        } else {
            (3.0 * l / lambda).max(1.0)
        }
    };
    let m = ((1.0 + delta) * lambda).ceil() + 8.0;
    if m > policy.hard_cap as f64 {
        return Err(Error::TruncationCap {
            cap: policy.hard_cap,
        });
    }
    Ok(m as u64)
}

/// `E[g(X)]` for `X ~ Poi(lambda)`, by truncated summation with log-space
/// pmf terms. `g` must grow at most polynomially (caller contract).
pub fn poisson_expectation<G: Fn(u64) -> f64>(
    g: G,
    lambda: f64,
    policy: &TruncationPolicy,
) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(g(0));
    }
    let mut m = truncation_point(lambda, policy)?;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut k = 0u64;
    loop {
        while k <= m {
            let term = g(k) * poisson_pmf(k, lambda);
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            k += 1;
        }
        // Extend past m* while the boundary term still matters (g may grow).
        let boundary = g(m).abs() * poisson_pmf(m, lambda);
        if boundary < policy.tail_tol * (1.0 + sum.abs()) {
            return Ok(sum);
        }
        let next = m + (m / 4).max(16);
        if next as usize > policy.hard_cap {
            return Err(Error::TruncationCap {
                cap: policy.hard_cap,
            });
        }
        m = next;
    }
}

/// `E|X − λ|` for `X ~ Poi(λ)` in closed form: `2 λ e^{−λ} λ^{⌊λ⌋} / ⌊λ⌋!`,
/// computed in log space.
pub fn expected_abs_dev(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let fl = lambda.floor() as u64;
    2.0 * lambda * (-lambda + fl as f64 * lambda.ln() - ln_factorial(fl)).exp()
}

/// Bias and variance of `kernel(X)` around `target` under `X ~ Poi(n p)`.
pub fn exact_bias_variance_1d<G: Fn(u64) -> f64>(
    kernel: G,
    p: f64,
    n: f64,
    target: f64,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let lambda = n * p;
    let mean = poisson_expectation(&kernel, lambda, policy)?;
    let second = poisson_expectation(|k| kernel(k).powi(2), lambda, policy)?;
    Ok((mean - target, (second - mean * mean).max(0.0)))
}

/// Bias and variance of `kernel(X, Y)` around `target` under the product
/// model `X ~ Poi(n p)`, `Y ~ Poi(n q)` independent.
pub fn exact_bias_variance_2d<G: Fn(u64, u64) -> f64>(
    kernel: G,
    p: f64,
    q: f64,
    n: f64,
    target: f64,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let (lx, ly) = (n * p, n * q);
    let mut mx = truncation_point(lx, policy)?;
    let mut my = truncation_point(ly, policy)?;
    loop {
        if (mx as usize + 1).saturating_mul(my as usize + 1) > policy.hard_cap {
            return Err(Error::TruncationCap {
                cap: policy.hard_cap,
            });
        }
        let wx: Vec<f64> = (0..=mx).map(|k| poisson_pmf(k, lx)).collect();
        let wy: Vec<f64> = (0..=my).map(|k| poisson_pmf(k, ly)).collect();
        let mut mean = 0.0f64;
        let mut second = 0.0f64;
        let mut cm = 0.0f64;
        let mut cs = 0.0f64;
        let mut edge = 0.0f64;
        for kx in 0..=mx {
            for ky in 0..=my {
                let v = kernel(kx, ky);
                let w = wx[kx as usize] * wy[ky as usize];
                let t = v * w;
                let y = t - cm;
                let s = mean + y;
                cm = (s - mean) - y;
                mean = s;
                let t2 = v * v * w;
                let y2 = t2 - cs;
                let s2 = second + y2;
                cs = (s2 - second) - y2;
                second = s2;
                if kx == mx || ky == my {
                    edge = edge.max(t.abs()).max(t2.abs());
                }
            }
        }
        if edge < policy.tail_tol * (1.0 + mean.abs() + second.abs()) {
            return Ok((mean - target, (second - mean * mean).max(0.0)));
        }
        mx += (mx / 4).max(16);
        my += (my / 4).max(16);
    }
}

/// Exact mean squared error of `estimator` under Poissonized sampling from
/// `P` with known `Q`, by enumerating the joint per-symbol outcome box.
///
/// The estimator is an arbitrary function of the full count vector (clipped
/// sums included), so the joint box cannot be factorized; this limits the
/// instance size to `S <= 3` and at most `hard_cap` joint outcomes.
pub fn brute_force_risk<F: Fn(&CountVector) -> f64>(
    p: &Distribution,
    q: &Distribution,
    n: f64,
    estimator: F,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let s = p.support_size();
    if s != q.support_size() {
        return Err(Error::LengthMismatch(s, q.support_size()));
    }
    if s > 3 {
        return Err(Error::InstanceTooLarge(format!("S = {s} > 3")));
    }
    let truth = crate::prob::l1_exact(p, q)?;
    let mut caps = Vec::with_capacity(s);
    let mut box_size = 1usize;
    for &pi in p.probs() {
        let m = truncation_point(n * pi, policy)? + 8;
        box_size = box_size.saturating_mul(m as usize + 1);
        caps.push(m);
    }
    if box_size > policy.hard_cap {
        return Err(Error::InstanceTooLarge(format!(
            "{box_size} joint outcomes exceed the {} cap",
            policy.hard_cap
        )));
    }
    let weights: Vec<Vec<f64>> = p
        .probs()
        .iter()
        .zip(&caps)
        .map(|(&pi, &m)| (0..=m).map(|k| poisson_pmf(k, n * pi)).collect())
        .collect();

    let mut counts = vec![0u64; s];
    let mut risk = 0.0f64;
    let mut comp = 0.0f64;
    loop {
        let w: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(&k, row)| row[k as usize])
            .product();
        if w > 0.0 {
            let cv = CountVector {
                counts: counts.clone(),
                rate_n: n,
            };
            let err = estimator(&cv) - truth;
            let term = w * err * err;
            let y = term - comp;
            let t = risk + y;
            comp = (t - risk) - y;
            risk = t;
        }
        // Odometer increment over the outcome box.
        let mut i = 0;
        loop {
            if i == s {
                return Ok(risk);
            }
            if counts[i] < caps[i] {
                counts[i] += 1;
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}
