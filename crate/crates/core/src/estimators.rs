//! The three L1 estimators: plug-in MLE, the known-`Q` construction, and
//! the unknown-`Q` construction, with their regime-classification geometry.

use crate::poly::{best_abs_poly, build_h2k, remez_best_approx, PolyCoeffs};
use crate::prob::{split_counts, CountVector, Distribution};
use crate::rng::RngSeed;
use crate::unbiased::{unbiased_from_bivar, UnbiasedKernel};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Whether the constructions thin the counts into independent halves or
/// feed the same counts to classification and estimation.
///
/// `Thinning` matches the analyzed constructions: the raw rate is halved
/// internally and the two halves are independent. `Reuse` skips splitting;
/// the constructions remain well-defined and deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Thinning,
    Reuse,
}

/// Tuning constants the analysis leaves symbolic.
///
/// Requires `c1 > c3 > c2 > 0`; the unknown-`Q` construction additionally
/// requires `c3/c1 < 8/(√2+1)² − 1 ≈ 0.373`. The approximation degree is
/// `K(n) = max(1, ⌊c2 ln n⌋)`, which must stay within `degree_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub split_mode: SplitMode,
    pub clip: [f64; 2],
    pub degree_cap: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            c1: 2.0,
            c2: 0.3,
            c3: 0.6,
            split_mode: SplitMode::Thinning,
            clip: [0.0, 2.0],
            degree_cap: crate::unbiased::DEGREE_CAP,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > self.c3 && self.c3 > self.c2 && self.c2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constants must satisfy c1 > c3 > c2 > 0, got c1 = {}, c3 = {}, c2 = {}",
                self.c1, self.c3, self.c2
            )));
        }
        if self.clip[0] > self.clip[1] {
            return Err(Error::InvalidParameter("clip bounds out of order".into()));
        }
        Ok(())
    }

    /// The ratio constraint the unknown-`Q` good events need.
    pub fn validate_unknown_q(&self) -> Result<()> {
        self.validate()?;
        let limit =
            8.0 / ((std::f64::consts::SQRT_2 + 1.0) * (std::f64::consts::SQRT_2 + 1.0)) - 1.0;
        if self.c3 / self.c1 >= limit {
            return Err(Error::InvalidParameter(format!(
                "unknown-Q requires c3/c1 < {limit:.4}, got {}",
                self.c3 / self.c1
            )));
        }
        Ok(())
    }

    /// `K(n) = max(1, ⌊c2 ln n⌋)`.
    pub fn degree(&self, n: f64) -> Result<usize> {
        let k = ((self.c2 * n.ln()).floor() as i64).max(1) as usize;
        if k > self.degree_cap {
            return Err(Error::DegreeCap {
                degree: k,
                cap: self.degree_cap,
            });
        }
        Ok(k)
    }
}

/// A closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Localization set `U(q; c1)`: `[0, 2 c1 ln n / n]` when `q` is below the
/// branch point `c1 ln n / n` (boundary included), else the window
/// `q ± sqrt(c1 q ln n / n)`.
pub fn region_u(q: f64, n: f64, c1: f64) -> Result<Interval> {
    region(q, n, c1, 2.0 * c1, c1)
}

/// Classification set `U1(q) ⊂ U(q; c1)`: cap `(c1 + c3) ln n / n` below the
/// branch point, window width `sqrt(c3 q ln n / n)` above it.
pub fn region_u1(q: f64, n: f64, c1: f64, c3: f64) -> Result<Interval> {
    region(q, n, c1, c1 + c3, c3)
}

fn region(q: f64, n: f64, c1: f64, cap_mult: f64, width_mult: f64) -> Result<Interval> {
    if !(n > 1.0) {
        return Err(Error::RateTooSmall(n, 1.0));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    let ln_over_n = n.ln() / n;
    if q <= c1 * ln_over_n {
        Ok(Interval {
            lo: 0.0,
            hi: cap_mult * ln_over_n,
        })
    } else {
        let w = (width_mult * q * ln_over_n).sqrt();
        Ok(Interval {
            lo: q - w,
            hi: q + w,
        })
    }
}

/// Per-symbol regime labels. Known-`Q` collapses the two non-smooth cases
/// by the branch of `q`: the origin box when `q` is small, the diagonal
/// window otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Above,
    Below,
    NonSmoothSquare,
    NonSmoothStripe,
}

/// Histogram of regime labels over symbols; part of the CLI estimate output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeHistogram {
    pub above: usize,
    pub below: usize,
    pub nonsmooth_square: usize,
    pub nonsmooth_stripe: usize,
}

impl RegimeHistogram {
    fn bump(&mut self, label: RegimeLabel) {
        match label {
            RegimeLabel::Above => self.above += 1,
            RegimeLabel::Below => self.below += 1,
            RegimeLabel::NonSmoothSquare => self.nonsmooth_square += 1,
            RegimeLabel::NonSmoothStripe => self.nonsmooth_stripe += 1,
        }
    }
}

/// Estimate plus the per-symbol regime tallies behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOutcome {
    pub estimate: f64,
    pub regime_histogram: RegimeHistogram,
}

/// `min(max(value, clip.lo), clip.hi)`; the constructions clip to `[0, 2]`.
pub fn clip(value: f64, cfg: &EstimatorConfig) -> f64 {
    value.max(cfg.clip[0]).min(cfg.clip[1])
}

/// Plug-in MLE with known `Q`: `Σ_i |X_i/n − q_i|`, unclipped.
pub fn mle_known_q(x: &CountVector, q: &Distribution) -> Result<f64> {
    if x.len() != q.support_size() {
        return Err(Error::LengthMismatch(x.len(), q.support_size()));
    }
    let terms: Vec<f64> = (0..x.len())
        .map(|i| (x.empirical(i) - q.probs()[i]).abs())
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Plug-in MLE with both sides sampled: `Σ_i |X_i/n − Y_i/n|`, unclipped.
pub fn mle_unknown_q(x: &CountVector, y: &CountVector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let terms: Vec<f64> = (0..x.len())
        .map(|i| (x.empirical(i) - y.empirical(i)).abs())
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Deterministic pairwise tree sum; independent of thread count and more
/// accurate than left-to-right accumulation on long symbol sums.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// The non-smooth-regime polynomial for known `q`: below the branch point,
/// the Remez best approximation of `|x − q|` on `U(q; c1) = [0, 2 c1 ln n/n]`;
/// above it, the scaled `|t|` approximant
/// `P_K(x; q) = Σ_j r_j (√(qΔ))^{1−j} (x − q)^j`, `Δ = c1 ln n / n`.
pub fn pk_known_q(q: f64, n: f64, cfg: &EstimatorConfig) -> Result<PolyCoeffs> {
    if !(n > 1.0) {
        return Err(Error::RateTooSmall(n, 1.0));
    }
    let k = cfg.degree(n)?;
    let delta = cfg.c1 * n.ln() / n;
    if q <= delta {
        let (poly, _) = remez_best_approx(|x| (x - q).abs(), [0.0, 2.0 * delta], k)?;
        Ok(poly)
    } else {
        let w = (q * delta).sqrt();
        let (abs_poly, _) = best_abs_poly(k)?;
        let coeffs = abs_poly.coeffs.iter().map(|r| r * w).collect();
        Ok(PolyCoeffs::new(coeffs, [q - w, q + w], q, w))
    }
}

fn effective_halves(
    x: &CountVector,
    cfg: &EstimatorConfig,
    seed: RngSeed,
) -> (CountVector, CountVector, f64) {
    match cfg.split_mode {
        SplitMode::Thinning => {
            let split = split_counts(x, seed);
            let n = split.halved_rate;
            (split.first, split.second, n)
        }
        SplitMode::Reuse => (x.clone(), x.clone(), x.rate_n),
    }
}

/// Known-`Q` construction: classify each symbol by where its first-half
/// empirical probability falls relative to `U1(q_i)`, then estimate with
/// the second half — signed plug-in outside, unbiased polynomial estimate
/// inside — and clip the sum to `[0, 2]`.
pub fn estimate_known_q(
    x: &CountVector,
    q: &Distribution,
    cfg: &EstimatorConfig,
    seed: RngSeed,
) -> Result<EstimateOutcome> {
    cfg.validate()?;
    if x.len() != q.support_size() {
        return Err(Error::LengthMismatch(x.len(), q.support_size()));
    }
    if x.rate_n < 3.0 {
        return Err(Error::RateTooSmall(x.rate_n, 3.0));
    }
    let (first, second, n) = effective_halves(x, cfg, seed);
    let delta = cfg.c1 * n.ln() / n;

    // Q is known, so the non-smooth kernel depends only on q_i; cache per
    // distinct value (uniform Q needs exactly one Remez run).
    let mut kernels: HashMap<u64, UnbiasedKernel> = HashMap::new();
    let mut histogram = RegimeHistogram::default();
    let mut terms = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let qi = q.probs()[i];
        let u1 = region_u1(qi, n, cfg.c1, cfg.c3)?;
        let p1 = first.empirical(i);
        let p2 = second.empirical(i);
        let (label, term) = if p1 > u1.hi {
            (RegimeLabel::Above, p2 - qi)
        } else if p1 < u1.lo {
            (RegimeLabel::Below, qi - p2)
        } else {
            let label = if qi <= delta {
                RegimeLabel::NonSmoothSquare
            } else {
                RegimeLabel::NonSmoothStripe
            };
            let kernel = match kernels.entry(qi.to_bits()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let poly = pk_known_q(qi, n, cfg)?;
                    e.insert(UnbiasedKernel::from_poly(&poly, n, cfg.degree_cap)?)
                }
            };
            (label, kernel.eval(second.counts[i]))
        };
        histogram.bump(label);
        terms.push(term);
    }
    Ok(EstimateOutcome {
        estimate: clip(pairwise_sum(&terms), cfg),
        regime_histogram: histogram,
    })
}

/// Membership in the two-dimensional classification stripe `U1`:
/// `|p̂ − q̂| <= sqrt((c1 + c3) ln n / n) (√p̂ + √q̂)`.
pub fn stripe_membership(p_hat: f64, q_hat: f64, n: f64, c1: f64, c3: f64) -> bool {
    let threshold = ((c1 + c3) * n.ln() / n).sqrt() * (p_hat.sqrt() + q_hat.sqrt());
    (p_hat - q_hat).abs() <= threshold
}

/// Four-way classification from the first-half pair `(p̂1, q̂1)`.
///
/// The four cases are mutually exclusive and exhaustive: when
/// `p̂ + q̂ < c1 ln n/n` the Above/Below threshold
/// `sqrt((c1+c3)(ln n/n)) (√p̂+√q̂) >= sqrt((c1+c3)(ln n/n)(p̂+q̂))` already
/// exceeds `p̂ + q̂ >= |p̂ − q̂|`, so the square case cannot overlap the
/// strict inequalities.
pub fn classify_2d(p_hat: f64, q_hat: f64, n: f64, cfg: &EstimatorConfig) -> RegimeLabel {
    let threshold = ((cfg.c1 + cfg.c3) * n.ln() / n).sqrt() * (p_hat.sqrt() + q_hat.sqrt());
    let diff = p_hat - q_hat;
    if diff > threshold {
        RegimeLabel::Above
    } else if diff < -threshold {
        RegimeLabel::Below
    } else if p_hat + q_hat < cfg.c1 * n.ln() / n {
        RegimeLabel::NonSmoothSquare
    } else {
        RegimeLabel::NonSmoothStripe
    }
}

fn stripe_width(p_hat1: f64, q_hat1: f64, n: f64, c1: f64) -> f64 {
    (8.0 * c1 * n.ln() / n).sqrt() * (p_hat1 + q_hat1).max(1.0 / n).sqrt()
}

/// Rescales the `|t|` approximant coefficients to the window `[-w, w]`.
fn scaled_abs_poly(abs_coeffs: &[f64], w: f64) -> PolyCoeffs {
    PolyCoeffs::new(abs_coeffs.iter().map(|r| r * w).collect(), [-w, w], 0.0, w)
}

/// The stripe-case polynomial `P_K^(2)(x, y) = Σ_j r_j W^{1−j} (x − y)^j` in
/// `t = x − y` on `[−W, W]`, with data-dependent width
/// `W = sqrt(8 c1 ln n / n) · sqrt((p̂1 + q̂1) ∨ 1/n)`.
pub fn pk2_stripe(p_hat1: f64, q_hat1: f64, n: f64, cfg: &EstimatorConfig) -> Result<PolyCoeffs> {
    if !(n > 1.0) {
        return Err(Error::RateTooSmall(n, 1.0));
    }
    let k = cfg.degree(n)?;
    let (abs_poly, _) = best_abs_poly(k)?;
    Ok(scaled_abs_poly(
        &abs_poly.coeffs,
        stripe_width(p_hat1, q_hat1, n, cfg.c1),
    ))
}

/// Unknown-`Q` construction: split both streams, classify each symbol with
/// the first halves, then estimate from the second halves — signed plug-in
/// when the pair is off the stripe, the unbiased `h_2K` estimate on the
/// origin square, and the conditionally-unbiased stripe polynomial (via
/// two-sample `(p − q)^j` kernels) on the rest of the stripe. The sum is
/// clipped to `[0, 2]`. Symbols with zero counts in all four streams land
/// in the square case and contribute exactly 0, so padding the support
/// leaves the estimate unchanged.
pub fn estimate_unknown_q(
    x: &CountVector,
    y: &CountVector,
    cfg: &EstimatorConfig,
    seed: RngSeed,
) -> Result<EstimateOutcome> {
    cfg.validate_unknown_q()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.rate_n < 3.0 || y.rate_n < 3.0 {
        return Err(Error::RateTooSmall(x.rate_n.min(y.rate_n), 3.0));
    }
    if (x.rate_n - y.rate_n).abs() > 1e-9 * x.rate_n {
        return Err(Error::InvalidParameter(format!(
            "the two streams must share one rate, got {} and {}",
            x.rate_n, y.rate_n
        )));
    }
    let (x1, x2, n) = effective_halves(x, cfg, seed.child(0));
    let (y1, y2, _) = effective_halves(y, cfg, seed.child(1));

    // The square-case polynomial is shared by every symbol. The stripe
    // width is data-dependent, so that kernel is rebuilt per symbol, but
    // its |t| coefficients depend only on K and are computed once.
    let square = build_h2k(cfg.degree(n)?, 2.0 * cfg.c1 * n.ln() / n)?;
    let (abs_poly, _) = best_abs_poly(cfg.degree(n)?)?;
    let mut histogram = RegimeHistogram::default();
    let mut terms = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (p1, q1) = (x1.empirical(i), y1.empirical(i));
        let (cx2, cy2) = (x2.counts[i], y2.counts[i]);
        let label = classify_2d(p1, q1, n, cfg);
        let term = match label {
            RegimeLabel::Above => x2.empirical(i) - y2.empirical(i),
            RegimeLabel::Below => y2.empirical(i) - x2.empirical(i),
            RegimeLabel::NonSmoothSquare => unbiased_from_bivar(&square, cx2, cy2, n)?,
            RegimeLabel::NonSmoothStripe => {
                let poly = scaled_abs_poly(&abs_poly.coeffs, stripe_width(p1, q1, n, cfg.c1));
                UnbiasedKernel::from_poly_two_sample(&poly, n, cfg.degree_cap)?
                    .eval_two_sample(cx2, cy2)
            }
        };
        histogram.bump(label);
        terms.push(term);
    }
    Ok(EstimateOutcome {
        estimate: clip(pairwise_sum(&terms), cfg),
        regime_histogram: histogram,
    })
}

/// Diagnostic variant of [`estimate_unknown_q`] that only approximates on
/// the origin square: any symbol whose first-half pair leaves the square
/// gets the absolute plug-in `|p̂2 − q̂2|`, stripe or not. Agrees with the
/// full construction exactly when no symbol leaves the square; used to
/// demonstrate that origin-only approximation is not enough.
pub fn estimate_unknown_q_origin_only(
    x: &CountVector,
    y: &CountVector,
    cfg: &EstimatorConfig,
    seed: RngSeed,
) -> Result<EstimateOutcome> {
    cfg.validate_unknown_q()?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.rate_n < 3.0 || y.rate_n < 3.0 {
        return Err(Error::RateTooSmall(x.rate_n.min(y.rate_n), 3.0));
    }
    let (x1, x2, n) = effective_halves(x, cfg, seed.child(0));
    let (y1, y2, _) = effective_halves(y, cfg, seed.child(1));
    let square = build_h2k(cfg.degree(n)?, 2.0 * cfg.c1 * n.ln() / n)?;
    let mut histogram = RegimeHistogram::default();
    let mut terms = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let label = classify_2d(x1.empirical(i), y1.empirical(i), n, cfg);
        let term = match label {
            RegimeLabel::NonSmoothSquare => {
                unbiased_from_bivar(&square, x2.counts[i], y2.counts[i], n)?
            }
            _ => (x2.empirical(i) - y2.empirical(i)).abs(),
        };
        histogram.bump(label);
        terms.push(term);
    }
    Ok(EstimateOutcome {
        estimate: clip(pairwise_sum(&terms), cfg),
        regime_histogram: histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{l1_exact, sample_poissonized, uniform, zipf};
    use proptest::prelude::*;

    #[test]
    fn config_ordering_is_enforced() {
        assert!(EstimatorConfig::default().validate().is_ok());
        assert!(EstimatorConfig::default().validate_unknown_q().is_ok());
        let bad = EstimatorConfig {
            c2: 0.7,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let ratio = EstimatorConfig {
            c1: 1.0,
            c3: 0.9,
            c2: 0.1,
            ..Default::default()
        };
        assert!(ratio.validate().is_ok());
        assert!(ratio.validate_unknown_q().is_err());
    }

    #[test]
    fn degree_rule() {
        let cfg = EstimatorConfig::default();
        assert_eq!(cfg.degree(3.0).unwrap(), 1); // floor(0.3 * 1.0986) = 0 -> 1
        assert_eq!(cfg.degree(1e4).unwrap(), 2);
        assert_eq!(cfg.degree(1e9).unwrap(), 6);
        let tight = EstimatorConfig {
            degree_cap: 1,
            ..Default::default()
        };
        assert!(tight.degree(1e9).is_err());
    }

    #[test]
    fn region_u_formulas() {
        // Small-q branch at q = 0, n = 100, c1 = 2.
        let u = region_u(0.0, 100.0, 2.0).unwrap();
        assert_eq!(u.lo, 0.0);
        assert!((u.hi - 4.0 * 100f64.ln() / 100.0).abs() < 1e-15);
        assert!((u.hi - 0.18420680743952367).abs() < 1e-12);

        // Large-q branch at q = 0.5, n = 1e4, c1 = 2.
        let u = region_u(0.5, 1e4, 2.0).unwrap();
        let w = (2.0 * 0.5 * 1e4f64.ln() / 1e4).sqrt();
        assert!((w - 0.03034854258770293).abs() < 1e-12);
        assert!((u.lo - (0.5 - w)).abs() < 1e-15);
        assert!((u.hi - (0.5 + w)).abs() < 1e-15);

        // The branch point itself takes the small-q cap (left-closed).
        let n = 100.0f64;
        let q_star = 2.0 * n.ln() / n;
        let u = region_u(q_star, n, 2.0).unwrap();
        assert_eq!(u.lo, 0.0);

        assert!(region_u(0.5, 1.0, 2.0).is_err());
        assert!(region_u(1.5, 100.0, 2.0).is_err());
    }

    #[test]
    fn region_u1_formulas_and_containment() {
        let u1 = region_u1(0.0, 100.0, 2.0, 0.6).unwrap();
        assert!((u1.hi - 2.6 * 100f64.ln() / 100.0).abs() < 1e-15);

        // U1(q) ⊆ U(q; c1) on a fine grid of q.
        let n = 500.0;
        for i in 0..=1000 {
            let q = i as f64 / 1000.0;
            let u = region_u(q, n, 2.0).unwrap();
            let u1 = region_u1(q, n, 2.0, 0.6).unwrap();
            assert!(u.lo <= u1.lo + 1e-15 && u1.hi <= u.hi + 1e-15, "q = {q}");
        }

        // Raising c3 toward c1 widens the small-q cap toward 2 c1 ln n / n.
        let narrow = region_u1(0.0, 100.0, 2.0, 0.3).unwrap();
        let wide = region_u1(0.0, 100.0, 2.0, 1.9).unwrap();
        assert!(narrow.hi < wide.hi);
        assert!(wide.hi < region_u(0.0, 100.0, 2.0).unwrap().hi + 1e-15);
    }

    #[test]
    fn mle_known_q_edges() {
        let q = zipf(4, 1.0).unwrap();
        let zeros = CountVector::new(vec![0; 4], 10.0).unwrap();
        assert!((mle_known_q(&zeros, &q).unwrap() - 1.0).abs() < 1e-12);

        // Counts exactly matching n q give zero.
        let q = Distribution::from_weights(&[0.25, 0.75]).unwrap();
        let x = CountVector::new(vec![1, 3], 4.0).unwrap();
        assert_eq!(mle_known_q(&x, &q).unwrap(), 0.0);

        assert!(mle_known_q(&zeros, &q).is_err());
    }

    #[test]
    fn mle_unknown_q_edges() {
        let x = CountVector::new(vec![3, 1, 2], 6.0).unwrap();
        assert_eq!(mle_unknown_q(&x, &x).unwrap(), 0.0);
        let zeros = CountVector::new(vec![0, 0, 0], 6.0).unwrap();
        assert_eq!(mle_unknown_q(&x, &zeros).unwrap(), 1.0);
    }

    #[test]
    fn mle_known_q_mean_matches_per_symbol_closed_form() {
        // Under Poissonization the MLE mean is the sum of per-symbol
        // deviations; with p = q <= 1/n each term is 2 q e^{-n q}.
        let s = 4usize;
        let n = 2.0;
        let q = uniform(s).unwrap();
        let policy = crate::oracle::TruncationPolicy::default();
        let per_symbol =
            crate::oracle::poisson_expectation(|k| (k as f64 / n - 0.25).abs(), n * 0.25, &policy)
                .unwrap();
        let branch = 2.0 * 0.25 * (-n * 0.25f64).exp();
        assert!((per_symbol - branch).abs() < 1e-12);

        // Monte Carlo mean of the full estimator against S times the term.
        let root = RngSeed::new(13);
        let reps = 20_000;
        let mut sum = 0.0;
        for t in 0..reps {
            let x = sample_poissonized(&q, n, root.child(t)).unwrap();
            sum += mle_known_q(&x, &q).unwrap();
        }
        let mean = sum / reps as f64;
        let expect = s as f64 * per_symbol;
        // SE of the mean is bounded by sqrt(S/n / reps).
        let se = ((s as f64 / n) / reps as f64).sqrt();
        assert!((mean - expect).abs() < 5.0 * se, "mean {mean} vs {expect}");
    }

    #[test]
    fn clip_bounds() {
        let cfg = EstimatorConfig::default();
        assert_eq!(clip(-0.3, &cfg), 0.0);
        assert_eq!(clip(2.7, &cfg), 2.0);
        assert_eq!(clip(1.1, &cfg), 1.1);
    }

    #[test]
    fn pk_known_q_large_branch_matches_formula() {
        // K = 2 via c2 ln n in (2, 3): P = sqrt(qΔ)/8 + (x-q)^2/sqrt(qΔ).
        let cfg = EstimatorConfig {
            c2: 0.35,
            ..Default::default()
        };
        let n = 2000.0f64;
        let k = cfg.degree(n).unwrap();
        assert_eq!(k, 2);
        let q = 0.4;
        let delta = cfg.c1 * n.ln() / n;
        let w = (q * delta).sqrt();
        let poly = pk_known_q(q, n, &cfg).unwrap();
        for &x in &[q - w, q, q + 0.3 * w] {
            let want = w / 8.0 + (x - q) * (x - q) / w;
            assert!((poly.eval(x) - want).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn pk_known_q_zero_q_degenerates_to_identity() {
        let cfg = EstimatorConfig::default();
        let n = 100.0f64;
        let poly = pk_known_q(0.0, n, &cfg).unwrap();
        for &x in &[0.0, 0.05, 0.15] {
            assert!((poly.eval(x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn pk_known_q_error_bound_constant_is_stable() {
        // sup over U(q;c1) of |P - |x-q|| / (q ∧ sqrt(q ln n/n)/K), fitted
        // across n, should not drift (the bias bound with fitted constant).
        let cfg = EstimatorConfig::default();
        let mut fitted: Vec<f64> = Vec::new();
        for &n in &[1e3, 1e5, 1e7] {
            let k = cfg.degree(n).unwrap() as f64;
            let mut worst = 0.0f64;
            for &q in &[1e-4, 2e-3, 0.05, 0.4, 0.9] {
                let poly = pk_known_q(q, n, &cfg).unwrap();
                let u = region_u(q, n, cfg.c1).unwrap();
                let cap = q.min((q * n.ln() / n).sqrt() / k);
                if cap == 0.0 {
                    continue;
                }
                let mut sup = 0.0f64;
                for i in 0..=400 {
                    let x = u.lo + (u.hi - u.lo) * i as f64 / 400.0;
                    sup = sup.max((poly.eval(x) - (x - q).abs()).abs());
                }
                worst = worst.max(sup / cap);
            }
            fitted.push(worst);
        }
        let max = fitted.iter().cloned().fold(0.0, f64::max);
        let min = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 4.0, "fitted constants {fitted:?}");
    }

    #[test]
    fn estimate_known_q_is_clipped_and_reduces_to_plugin_when_smooth() {
        let cfg = EstimatorConfig {
            split_mode: SplitMode::Reuse,
            ..Default::default()
        };
        // All q_i far above the small-q cap and counts far above U1.
        let q = uniform(4).unwrap();
        let n = 400.0;
        let x = CountVector::new(vec![200, 180, 20, 0], n).unwrap();
        let out = estimate_known_q(&x, &q, &cfg, RngSeed::new(0)).unwrap();
        assert!(out.estimate >= 0.0 && out.estimate <= 2.0);
        // Above fires for symbols 0 and 1; Below for 2 and 3.
        assert_eq!(out.regime_histogram.above, 2);
        assert_eq!(out.regime_histogram.below, 2);
        let plugin: f64 = (0..4)
            .map(|i| {
                let diff = x.empirical(i) - 0.25;
                if diff > 0.0 {
                    diff
                } else {
                    -diff
                }
            })
            .sum();
        assert!((out.estimate - plugin.clamp(0.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn estimate_known_q_rejects_small_n() {
        let q = uniform(2).unwrap();
        let x = CountVector::new(vec![1, 1], 2.0).unwrap();
        assert!(matches!(
            estimate_known_q(&x, &q, &EstimatorConfig::default(), RngSeed::new(0)),
            Err(Error::RateTooSmall(_, _))
        ));
    }

    #[test]
    fn known_q_point_mass_consistency() {
        // Q = P = point mass: estimates concentrate near 0 for large n.
        let cfg = EstimatorConfig::default();
        let p = Distribution::from_weights(&[1.0]).unwrap();
        let n = 1e4;
        let root = RngSeed::new(31);
        let mut vals: Vec<f64> = (0..41)
            .map(|t| {
                let x = sample_poissonized(&p, n, root.child(t)).unwrap();
                estimate_known_q(&x, &p, &cfg, root.child(1000 + t))
                    .unwrap()
                    .estimate
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        let median = vals[vals.len() / 2];
        assert!(median < 0.01, "median {median}");
    }

    #[test]
    fn classification_cases_partition_the_plane() {
        let cfg = EstimatorConfig::default();
        let n = 200.0f64;
        let thr = |p: f64, q: f64| ((cfg.c1 + cfg.c3) * n.ln() / n).sqrt() * (p.sqrt() + q.sqrt());
        for i in 0..200 {
            for j in 0..200 {
                let p = i as f64 / 199.0;
                let q = j as f64 / 199.0;
                // The paper's four raw conditions, tested independently.
                let above = p - q > thr(p, q);
                let below = p - q < -thr(p, q);
                let square = p + q < cfg.c1 * n.ln() / n;
                let stripe =
                    stripe_membership(p, q, n, cfg.c1, cfg.c3) && p + q >= cfg.c1 * n.ln() / n;
                let fired = [above, below, square, stripe]
                    .iter()
                    .filter(|&&b| b)
                    .count();
                assert_eq!(fired, 1, "at ({p}, {q})");
                let label = classify_2d(p, q, n, &cfg);
                let expect = if above {
                    RegimeLabel::Above
                } else if below {
                    RegimeLabel::Below
                } else if square {
                    RegimeLabel::NonSmoothSquare
                } else {
                    RegimeLabel::NonSmoothStripe
                };
                assert_eq!(label, expect);
            }
        }
    }

    #[test]
    fn classify_swap_symmetry() {
        let cfg = EstimatorConfig::default();
        let n = 150.0;
        for &(p, q) in &[(0.4, 0.1), (0.01, 0.02), (0.3, 0.3), (0.0, 0.5)] {
            let a = classify_2d(p, q, n, &cfg);
            let b = classify_2d(q, p, n, &cfg);
            let want = match a {
                RegimeLabel::Above => RegimeLabel::Below,
                RegimeLabel::Below => RegimeLabel::Above,
                other => other,
            };
            assert_eq!(b, want);
        }
        // The diagonal is always inside the stripe (threshold positive).
        assert!(stripe_membership(0.3, 0.3, 100.0, 2.0, 0.6));
    }

    #[test]
    fn pk2_stripe_formula_and_symmetry() {
        let cfg = EstimatorConfig {
            c2: 0.35,
            ..Default::default()
        };
        let n = 2000.0f64;
        assert_eq!(cfg.degree(n).unwrap(), 2);
        let (p1, q1) = (0.2f64, 0.23f64);
        let w = (8.0 * cfg.c1 * n.ln() / n).sqrt() * (p1 + q1).max(1.0 / n).sqrt();
        let poly = pk2_stripe(p1, q1, n, &cfg).unwrap();
        for &t in &[-w, -0.2 * w, 0.0, 0.7 * w] {
            let want = w / 8.0 + t * t / w;
            assert!((poly.eval(t) - want).abs() < 1e-12);
            assert!((poly.eval(t) - poly.eval(-t)).abs() < 1e-15);
        }
    }

    #[test]
    fn stripe_width_covers_the_localized_diagonal() {
        // |p - q| <= W whenever (p, q) is in the stripe U and
        // p + q <= 2 (p1 + q1).
        let cfg = EstimatorConfig::default();
        let n = 300.0f64;
        let mut checked = 0usize;
        for i in 0..60 {
            for j in 0..60 {
                let p = i as f64 / 59.0;
                let q = j as f64 / 59.0;
                let in_u =
                    (p - q).abs() <= (2.0 * cfg.c1 * n.ln() / n).sqrt() * (p.sqrt() + q.sqrt());
                if !in_u {
                    continue;
                }
                // First-half pair consistent with localization.
                let (p1, q1) = (0.5 * p + 0.01, 0.5 * q + 0.01);
                if p + q > 2.0 * (p1 + q1) {
                    continue;
                }
                let w = (8.0 * cfg.c1 * n.ln() / n).sqrt() * (p1 + q1).max(1.0 / n).sqrt();
                assert!((p - q).abs() <= w + 1e-12, "({p}, {q})");
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn estimate_unknown_q_identical_reused_streams() {
        let cfg = EstimatorConfig {
            split_mode: SplitMode::Reuse,
            ..Default::default()
        };
        let x = CountVector::new(vec![40, 0, 3, 17], 60.0).unwrap();
        let out = estimate_unknown_q(&x, &x, &cfg, RngSeed::new(0)).unwrap();
        assert!(out.estimate >= 0.0 && out.estimate <= 2.0);
        // Identical streams: Above/Below never fire.
        assert_eq!(out.regime_histogram.above, 0);
        assert_eq!(out.regime_histogram.below, 0);
    }

    #[test]
    fn estimate_unknown_q_swap_symmetry_in_reuse_mode() {
        let cfg = EstimatorConfig {
            split_mode: SplitMode::Reuse,
            ..Default::default()
        };
        let x = CountVector::new(vec![12, 0, 800, 3, 5, 0, 41], 900.0).unwrap();
        let y = CountVector::new(vec![9, 2, 760, 0, 5, 1, 80], 900.0).unwrap();
        let a = estimate_unknown_q(&x, &y, &cfg, RngSeed::new(0)).unwrap();
        let b = estimate_unknown_q(&y, &x, &cfg, RngSeed::new(0)).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-10);
        assert_eq!(a.regime_histogram.above, b.regime_histogram.below);
        assert_eq!(
            a.regime_histogram.nonsmooth_square,
            b.regime_histogram.nonsmooth_square
        );
    }

    #[test]
    fn zero_count_symbols_change_nothing() {
        let cfg = EstimatorConfig::default();
        let seed = RngSeed::new(5);
        let x = CountVector::new(vec![30, 2, 0, 9], 50.0).unwrap();
        let y = CountVector::new(vec![25, 0, 1, 12], 50.0).unwrap();
        let base = estimate_unknown_q(&x, &y, &cfg, seed).unwrap();
        let mut xpad = x.counts.clone();
        let mut ypad = y.counts.clone();
        xpad.extend([0; 6]);
        ypad.extend([0; 6]);
        let xp = CountVector::new(xpad, 50.0).unwrap();
        let yp = CountVector::new(ypad, 50.0).unwrap();
        let padded = estimate_unknown_q(&xp, &yp, &cfg, seed).unwrap();
        assert_eq!(base.estimate, padded.estimate);

        // Known-Q side: padding with zero-count, zero-mass symbols.
        let q = Distribution::from_weights(&[2.0, 1.0, 1.0, 4.0]).unwrap();
        let base = estimate_known_q(&x, &q, &cfg, seed).unwrap();
        let qpad = Distribution::from_weights(&[2.0, 1.0, 1.0, 4.0, 0.0, 0.0]).unwrap();
        let xp = CountVector::new([x.counts.clone(), vec![0, 0]].concat(), 50.0).unwrap();
        let padded = estimate_known_q(&xp, &qpad, &cfg, seed).unwrap();
        assert!((base.estimate - padded.estimate).abs() < 1e-12);
    }

    #[test]
    fn estimators_beat_nothing_but_stay_in_range_on_random_data() {
        let cfg = EstimatorConfig::default();
        let root = RngSeed::new(77);
        let p = zipf(40, 1.1).unwrap();
        let q = uniform(40).unwrap();
        let truth = l1_exact(&p, &q).unwrap();
        let mut worst_known = 0.0f64;
        for t in 0..20 {
            let x = sample_poissonized(&p, 500.0, root.child(2 * t)).unwrap();
            let y = sample_poissonized(&q, 500.0, root.child(2 * t + 1)).unwrap();
            let known = estimate_known_q(&x, &q, &cfg, root.child(1000 + t)).unwrap();
            let unknown = estimate_unknown_q(&x, &y, &cfg, root.child(2000 + t)).unwrap();
            assert!((0.0..=2.0).contains(&known.estimate));
            assert!((0.0..=2.0).contains(&unknown.estimate));
            worst_known = worst_known.max((known.estimate - truth).abs());
        }
        assert!(worst_known < 0.5, "known-Q off by {worst_known}");

        // The stripe polynomial is a constant at K = 1, so the two-sample
        // construction needs n large enough for K >= 2 before accuracy on
        // stripe-heavy instances is meaningful.
        let n = 50_000.0;
        let mut worst_unknown = 0.0f64;
        for t in 0..8 {
            let x = sample_poissonized(&p, n, root.child(5000 + 2 * t)).unwrap();
            let y = sample_poissonized(&q, n, root.child(5001 + 2 * t)).unwrap();
            let unknown = estimate_unknown_q(&x, &y, &cfg, root.child(6000 + t)).unwrap();
            worst_unknown = worst_unknown.max((unknown.estimate - truth).abs());
        }
        assert!(worst_unknown < 0.35, "unknown-Q off by {worst_unknown}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn outputs_always_in_range(
            counts_x in proptest::collection::vec(0u64..400, 6),
            counts_y in proptest::collection::vec(0u64..400, 6),
            seed in any::<u64>(),
        ) {
            let cfg = EstimatorConfig::default();
            let x = CountVector::new(counts_x, 120.0).unwrap();
            let y = CountVector::new(counts_y, 120.0).unwrap();
            let q = uniform(6).unwrap();
            let a = estimate_known_q(&x, &q, &cfg, RngSeed::new(seed)).unwrap().estimate;
            let b = estimate_unknown_q(&x, &y, &cfg, RngSeed::new(seed)).unwrap().estimate;
            prop_assert!((0.0..=2.0).contains(&a));
            prop_assert!((0.0..=2.0).contains(&b));
        }

        #[test]
        fn exactly_one_regime_fires(p in 0.0f64..1.0, q in 0.0f64..1.0, n in 5.0f64..5e4) {
            let cfg = EstimatorConfig::default();
            let thr = ((cfg.c1 + cfg.c3) * n.ln() / n).sqrt() * (p.sqrt() + q.sqrt());
            let conditions = [
                p - q > thr,
                p - q < -thr,
                p + q < cfg.c1 * n.ln() / n,
                stripe_membership(p, q, n, cfg.c1, cfg.c3) && p + q >= cfg.c1 * n.ln() / n,
            ];
            prop_assert_eq!(conditions.iter().filter(|&&b| b).count(), 1);
        }
    }
}
