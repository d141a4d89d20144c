//! Unbiased estimation, under Poisson sampling, of monomials `p^r`, shifted
//! monomials `(p − q)^j`, and two-sample `(p − q)^j`, plus the transform
//! from polynomial coefficients to an unbiased functional estimator.
//!
//! The defining property throughout: the exact Poisson expectation of each
//! kernel equals its analytic target. Alternating-sign binomial sums lose
//! digits, so every kernel sum is Kahan-compensated.

use crate::poly::{BivarPolyCoeffs, PolyCoeffs};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Default cap on kernel degrees. Coefficients of bounded polynomials grow
/// like `(√2 + 1)^degree`, so double precision runs out of headroom well
/// past the `K = c₂ ln n` degrees the estimators use; the cap guards misuse.
pub const DEGREE_CAP: usize = 30;

const BINOM_MAX: usize = DEGREE_CAP + 1;

fn binomial(n: usize, k: usize) -> f64 {
    static TABLE: OnceLock<Vec<[f64; BINOM_MAX + 1]>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![[0.0; BINOM_MAX + 1]; BINOM_MAX + 1];
        for n in 0..=BINOM_MAX {
            t[n][0] = 1.0;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1] + if k <= n - 1 { t[n - 1][k] } else { 0.0 };
            }
        }
        t
    });
    table[n][k]
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, term: f64) {
        let y = term - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `Π_{h=0}^{r-1} (count/n − h/n)`; the unique unbiased estimator of `p^r`
/// under `count ~ Poi(n p)`. The empty product (`r = 0`) is 1.
pub fn falling_factorial_estimate(count: u64, n: f64, r: usize) -> f64 {
    let mut prod = 1.0;
    for h in 0..r {
        prod *= (count as f64 - h as f64) / n;
    }
    prod
}

/// `g_{j,q}`: the unique unbiased estimator of `(p − q)^j` when `q` is a
/// known shift: `Σ_k C(j,k) (−q)^{j−k} Π_{h<k} (count/n − h/n)`.
pub fn g_shift(count: u64, n: f64, j: usize, q: f64) -> f64 {
    let mut acc = Kahan::default();
    for k in 0..=j {
        let term = binomial(j, k) * neg_pow(q, j - k) * falling_factorial_estimate(count, n, k);
        acc.add(term);
    }
    acc.sum
}

#[inline]
fn neg_pow(q: f64, e: usize) -> f64 {
    // (-q)^e with an exact 1 at e = 0.
    if e == 0 {
        1.0
    } else {
        (-q).powi(e as i32)
    }
}

/// Closed-form second moment `E[g_{j,q}²] = Σ_k C(j,k)² (p−q)^{2(j−k)} p^k k!/n^k`,
/// the Laguerre identity `j! (p/n)^j L_j(−n(p−q)²/p)` expanded. For `p = 0`
/// the kernel is the constant `(−q)^j`, so the moment is `q^{2j}`.
pub fn g_shift_second_moment(p: f64, q: f64, n: f64, j: usize) -> f64 {
    if p == 0.0 {
        return q.powi(2 * j as i32);
    }
    let mut acc = Kahan::default();
    let mut pk_fact = 1.0; // p^k k! / n^k
    let mut dpow = 1.0; // (p-q)^{2k} built upward, consumed downward
    let d2 = (p - q) * (p - q);
    let mut dpows = vec![1.0; j + 1];
    for k in 1..=j {
        dpow *= d2;
        dpows[k] = dpow;
    }
    for k in 0..=j {
        let c = binomial(j, k);
        acc.add(c * c * dpows[j - k] * pk_fact);
        pk_fact *= p * (k as f64 + 1.0) / n;
    }
    acc.sum
}

/// `Â_j`: the unique unbiased estimator of `(p − q)^j` from two independent
/// Poisson counts, via falling factorials of both:
/// `Σ_k C(j,k) ff_k(x) (−1)^{j−k} ff_{j−k}(y)`.
pub fn a_hat(count_x: u64, count_y: u64, n: f64, j: usize) -> f64 {
    let mut acc = Kahan::default();
    for k in 0..=j {
        let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(
            binomial(j, k)
                * falling_factorial_estimate(count_x, n, k)
                * sign
                * falling_factorial_estimate(count_y, n, j - k),
        );
    }
    acc.sum
}

/// Which shifted-monomial family a kernel's terms expand in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelReference {
    /// Terms are `(p − q)^j` for a fixed known shift `q`; estimated with
    /// [`g_shift`].
    FixedShift(f64),
    /// Terms are `(p − q)^j` with both sides sampled; estimated with
    /// [`a_hat`].
    TwoSample,
}

/// A polynomial compiled into unbiased-estimator form: a list of
/// `(exponent, weight)` terms whose expectation is `Σ w_j (p − ref)^j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnbiasedKernel {
    pub terms: Vec<(usize, f64)>,
    pub reference: KernelReference,
    pub rate_n: f64,
}

impl UnbiasedKernel {
    /// Compiles a univariate polynomial: each basis monomial
    /// `u^j = ((x − c)/s)^j` contributes weight `coeff_j s^{−j}` on the
    /// shifted monomial `(x − c)^j`.
    pub fn from_poly(poly: &PolyCoeffs, n: f64, cap: usize) -> Result<Self> {
        if poly.degree > cap {
            return Err(Error::DegreeCap {
                degree: poly.degree,
                cap,
            });
        }
        let terms = poly
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, c * poly.scale.powi(-(j as i32))))
            .collect();
        Ok(UnbiasedKernel {
            terms,
            reference: KernelReference::FixedShift(poly.center),
            rate_n: n,
        })
    }

    /// Compiles a polynomial in `t = x − y` (center must be 0): weights
    /// `coeff_j s^{−j}` on the two-sample monomials `(p − q)^j`.
    pub fn from_poly_two_sample(poly: &PolyCoeffs, n: f64, cap: usize) -> Result<Self> {
        if poly.degree > cap {
            return Err(Error::DegreeCap {
                degree: poly.degree,
                cap,
            });
        }
        if poly.center != 0.0 {
            return Err(Error::InvalidParameter(
                "two-sample kernels need a polynomial centered at t = 0".into(),
            ));
        }
        let terms = poly
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, c * poly.scale.powi(-(j as i32))))
            .collect();
        Ok(UnbiasedKernel {
            terms,
            reference: KernelReference::TwoSample,
            rate_n: n,
        })
    }

    /// Evaluates a fixed-shift kernel on one count.
    pub fn eval(&self, count: u64) -> f64 {
        let q = match self.reference {
            KernelReference::FixedShift(q) => q,
            KernelReference::TwoSample => panic!("two-sample kernel evaluated on one count"),
        };
        let mut acc = Kahan::default();
        for &(j, w) in &self.terms {
            acc.add(w * g_shift(count, self.rate_n, j, q));
        }
        acc.sum
    }

    /// Evaluates a two-sample kernel on a count pair.
    pub fn eval_two_sample(&self, count_x: u64, count_y: u64) -> f64 {
        assert!(matches!(self.reference, KernelReference::TwoSample));
        let mut acc = Kahan::default();
        for &(j, w) in &self.terms {
            acc.add(w * a_hat(count_x, count_y, self.rate_n, j));
        }
        acc.sum
    }
}

/// The value whose Poisson expectation equals `poly(p)`.
pub fn unbiased_from_poly(poly: &PolyCoeffs, count: u64, n: f64) -> Result<f64> {
    Ok(UnbiasedKernel::from_poly(poly, n, DEGREE_CAP)?.eval(count))
}

/// The value whose product-Poisson expectation equals `bipoly(p, q)`:
/// independence lets every `x^i y^j` be replaced by the product of
/// univariate falling-factorial kernels.
pub fn unbiased_from_bivar(
    bipoly: &BivarPolyCoeffs,
    count_x: u64,
    count_y: u64,
    n: f64,
) -> Result<f64> {
    if bipoly.degree > DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree: bipoly.degree,
            cap: DEGREE_CAP,
        });
    }
    let k = bipoly.degree + 1;
    let inv_side = 1.0 / bipoly.side;
    let ffx: Vec<f64> = (0..k)
        .map(|i| falling_factorial_estimate(count_x, n, i) * inv_side.powi(i as i32))
        .collect();
    let ffy: Vec<f64> = (0..k)
        .map(|j| falling_factorial_estimate(count_y, n, j) * inv_side.powi(j as i32))
        .collect();
    let mut acc = Kahan::default();
    for i in 0..k {
        if ffx[i] == 0.0 {
            continue;
        }
        for j in 0..k {
            let c = bipoly.coeff(i, j);
            if c != 0.0 {
                acc.add(c * ffx[i] * ffy[j]);
            }
        }
    }
    Ok(acc.sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{
        exact_bias_variance_1d, exact_bias_variance_2d, poisson_expectation, TruncationPolicy,
    };
    use crate::poly::best_abs_poly;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::{Distribution as _, Poisson};

    #[test]
    fn falling_factorial_base_cases() {
        assert_eq!(falling_factorial_estimate(17, 4.0, 0), 1.0);
        assert_eq!(falling_factorial_estimate(12, 4.0, 1), 3.0);
        // r = 2: (X/n)(X/n - 1/n)
        assert_eq!(falling_factorial_estimate(3, 2.0, 2), 1.5 * 1.0);
    }

    #[test]
    fn falling_factorial_is_unbiased_for_powers() {
        let policy = TruncationPolicy::default();
        let (n, p) = (10.0, 0.5);
        let mean =
            poisson_expectation(|k| falling_factorial_estimate(k, n, 2), n * p, &policy).unwrap();
        assert!((mean - 0.25).abs() < 1e-9);
        for r in 0..=6 {
            let mean = poisson_expectation(
                |k| falling_factorial_estimate(k, 20.0, r),
                20.0 * 0.3,
                &policy,
            )
            .unwrap();
            assert!((mean - 0.3f64.powi(r as i32)).abs() < 1e-10, "r = {r}");
        }
    }

    #[test]
    fn g_shift_base_cases() {
        assert_eq!(g_shift(9, 3.0, 0, 0.7), 1.0);
        let v = g_shift(9, 3.0, 1, 0.7);
        assert!((v - (3.0 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn g_shift_is_unbiased() {
        let policy = TruncationPolicy::default();
        let (p, q, n) = (0.2, 0.1, 20.0);
        let (bias, _) =
            exact_bias_variance_1d(|k| g_shift(k, n, 3, q), p, n, (p - q).powi(3), &policy)
                .unwrap();
        assert!(bias.abs() < 1e-9, "bias {bias}");
        assert!(((p - q).powi(3) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn g_shift_with_zero_shift_is_falling_factorial() {
        for count in [0u64, 1, 5, 40] {
            for j in 0..=8 {
                let a = g_shift(count, 7.0, j, 0.0);
                let b = falling_factorial_estimate(count, 7.0, j);
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1.0),
                    "count {count}, j {j}"
                );
            }
        }
    }

    #[test]
    fn second_moment_closed_forms() {
        assert_eq!(g_shift_second_moment(0.4, 0.2, 9.0, 0), 1.0);
        let (p, q, n) = (0.4, 0.25, 9.0);
        let want = (p - q) * (p - q) + p / n;
        assert!((g_shift_second_moment(p, q, n, 1) - want).abs() < 1e-14);
        assert_eq!(g_shift_second_moment(0.0, 0.3, 5.0, 2), 0.3f64.powi(4));
    }

    #[test]
    fn second_moment_matches_oracle() {
        let policy = TruncationPolicy::default();
        for &(p, q, n) in &[(0.05, 0.3, 12.0), (0.3, 0.3, 40.0), (0.9, 0.05, 7.0)] {
            for j in 0..=5 {
                let oracle =
                    poisson_expectation(|k| g_shift(k, n, j, q).powi(2), n * p, &policy).unwrap();
                let closed = g_shift_second_moment(p, q, n, j);
                assert!(
                    (oracle - closed).abs() < 1e-8 * closed.abs().max(1.0),
                    "p {p} q {q} n {n} j {j}: {oracle} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn second_moment_matches_monte_carlo() {
        let (p, q, n, j) = (0.3, 0.2, 15.0, 2);
        let reps = 100_000;
        let mut rng = RngSeed::new(4).rng();
        let poi = Poisson::new(n * p).unwrap();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..reps {
            let k = poi.sample(&mut rng) as u64;
            let v = g_shift(k, n, j, q).powi(2);
            sum += v;
            sumsq += v * v;
        }
        let mc = sum / reps as f64;
        let se = ((sumsq / reps as f64 - mc * mc) / reps as f64).sqrt();
        let closed = g_shift_second_moment(p, q, n, j);
        assert!(
            (mc - closed).abs() < 5.0 * se,
            "mc {mc}, closed {closed}, se {se}"
        );
    }

    #[test]
    fn a_hat_base_cases() {
        assert_eq!(a_hat(3, 9, 5.0, 0), 1.0);
        let v = a_hat(3, 9, 5.0, 1);
        assert!((v - (0.6 - 1.8)).abs() < 1e-15);
    }

    #[test]
    fn a_hat_is_unbiased() {
        let policy = TruncationPolicy::default();
        let (p, q, n) = (0.3, 0.1, 25.0);
        let (bias, _) =
            exact_bias_variance_2d(|kx, ky| a_hat(kx, ky, n, 2), p, q, n, 0.04, &policy).unwrap();
        assert!(bias.abs() < 1e-9, "bias {bias}");
    }

    #[test]
    fn a_hat_matches_any_expansion_point() {
        // A_j is the unique unbiased estimator; expanding around any r via
        // g_{k,r}(x) (-1)^{j-k} g_{j-k,r}(y) gives the same value.
        let mut rng = RngSeed::new(8).rng();
        for _ in 0..200 {
            let x = rng.random_range(0u64..30);
            let y = rng.random_range(0u64..30);
            let n = rng.random_range(1.0..50.0);
            let j = rng.random_range(0usize..=6);
            let canonical = a_hat(x, y, n, j);
            for r in [0.0, 0.13, (x + y) as f64 / (2.0 * n)] {
                let mut alt = 0.0;
                for k in 0..=j {
                    let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
                    alt += binomial(j, k) * g_shift(x, n, k, r) * sign * g_shift(y, n, j - k, r);
                }
                let tol = 1e-10 * canonical.abs().max(1.0);
                assert!(
                    (canonical - alt).abs() < tol,
                    "x {x} y {y} n {n} j {j} r {r}"
                );
            }
        }
    }

    #[test]
    fn a_hat_second_moment_bound() {
        // E[A_j^2] <= (2 (p-q)^2 ∨ 8 j (p ∨ q)/n)^j on a small grid.
        let policy = TruncationPolicy::default();
        for &(p, q) in &[(0.05, 0.3), (0.3, 0.3), (0.6, 0.1)] {
            for &n in &[10.0, 60.0] {
                for j in 1..=4usize {
                    let (bias, var) =
                        exact_bias_variance_2d(|kx, ky| a_hat(kx, ky, n, j), p, q, n, 0.0, &policy)
                            .unwrap();
                    let second = var + bias * bias;
                    let bound = (2.0 * (p - q) * (p - q)).max(8.0 * j as f64 * p.max(q) / n);
                    assert!(
                        second <= bound.powi(j as i32) * (1.0 + 1e-9),
                        "p {p} q {q} n {n} j {j}: {second} > {}",
                        bound.powi(j as i32)
                    );
                }
            }
        }
    }

    #[test]
    fn poly_kernel_constant_and_identity() {
        let c = crate::poly::PolyCoeffs::constant(2.5, [0.0, 1.0]);
        assert_eq!(unbiased_from_poly(&c, 7, 3.0).unwrap(), 2.5);
        let ident = crate::poly::PolyCoeffs::new(vec![0.0, 1.0], [0.0, 1.0], 0.0, 1.0);
        let v = unbiased_from_poly(&ident, 6, 3.0).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn poly_kernel_is_unbiased_for_squares() {
        let policy = TruncationPolicy::default();
        let sq = crate::poly::PolyCoeffs::new(vec![0.0, 0.0, 1.0], [0.0, 1.0], 0.0, 1.0);
        let (n, p) = (10.0, 0.4);
        let (bias, _) = exact_bias_variance_1d(
            |k| unbiased_from_poly(&sq, k, n).unwrap(),
            p,
            n,
            0.16,
            &policy,
        )
        .unwrap();
        assert!(bias.abs() < 1e-9);
    }

    #[test]
    fn poly_kernel_honors_center_and_scale() {
        // poly(x) = ((x - 0.3)/0.2)^2 evaluated through the kernel route.
        let poly = crate::poly::PolyCoeffs::new(vec![0.0, 0.0, 1.0], [0.1, 0.5], 0.3, 0.2);
        let policy = TruncationPolicy::default();
        let (n, p) = (30.0, 0.45);
        let target = ((p - 0.3) / 0.2f64).powi(2);
        let (bias, _) = exact_bias_variance_1d(
            |k| unbiased_from_poly(&poly, k, n).unwrap(),
            p,
            n,
            target,
            &policy,
        )
        .unwrap();
        assert!(bias.abs() < 1e-9, "bias {bias}");
    }

    #[test]
    fn bivar_kernel_unbiased_for_xy_and_h2k() {
        let policy = TruncationPolicy::default();
        // xy on the unit square.
        let mut coeffs = vec![0.0; 4];
        coeffs[3] = 1.0; // (1,1) entry in row-major 2x2
        let xy = crate::poly::BivarPolyCoeffs::new(coeffs, 1, 1.0);
        let (n, p, q) = (10.0, 0.2, 0.5);
        let (bias, _) = exact_bias_variance_2d(
            |kx, ky| unbiased_from_bivar(&xy, kx, ky, n).unwrap(),
            p,
            q,
            n,
            0.1,
            &policy,
        )
        .unwrap();
        assert!(bias.abs() < 1e-9);

        let c = crate::poly::BivarPolyCoeffs::new(vec![0.7, 0.0, 0.0, 0.0], 1, 1.0);
        assert_eq!(unbiased_from_bivar(&c, 5, 9, 4.0).unwrap(), 0.7);

        // h_2K: expectation equals the polynomial value, i.e. the bias
        // against |p - q| is exactly the approximation error.
        let h = crate::poly::build_h2k(3, 0.1).unwrap();
        let (p, q, n) = (0.01, 0.02, 100.0);
        let (bias, _) = exact_bias_variance_2d(
            |kx, ky| unbiased_from_bivar(&h, kx, ky, n).unwrap(),
            p,
            q,
            n,
            h.eval(p, q),
            &policy,
        )
        .unwrap();
        assert!(bias.abs() < 1e-8, "bias {bias}");
    }

    #[test]
    fn bivar_kernel_vanishes_on_zero_counts_when_origin_is_zero() {
        let h = crate::poly::build_h2k(4, 0.05).unwrap();
        assert_eq!(unbiased_from_bivar(&h, 0, 0, 12.0).unwrap(), 0.0);
    }

    #[test]
    fn degree_cap_is_enforced() {
        let poly = crate::poly::PolyCoeffs::new(vec![1.0; 40], [0.0, 1.0], 0.0, 1.0);
        assert!(matches!(
            unbiased_from_poly(&poly, 2, 5.0),
            Err(Error::DegreeCap {
                degree: 39,
                cap: DEGREE_CAP
            })
        ));
    }

    #[test]
    fn abs_poly_kernel_through_g_shift() {
        // P_K(x; q) for the large-q branch: scaled |t| approximant around q.
        let policy = TruncationPolicy::default();
        let (q, n) = (0.4, 60.0);
        let w = 0.07f64;
        let (abs2, _) = best_abs_poly(2).unwrap();
        let scaled = crate::poly::PolyCoeffs::new(
            abs2.coeffs.iter().map(|c| c * w).collect(),
            [q - w, q + w],
            q,
            w,
        );
        for &p in &[0.35, 0.4, 0.44] {
            let (bias, _) = exact_bias_variance_1d(
                |k| unbiased_from_poly(&scaled, k, n).unwrap(),
                p,
                n,
                scaled.eval(p),
                &policy,
            )
            .unwrap();
            assert!(bias.abs() < 1e-9, "p {p}: bias {bias}");
        }
    }
}
