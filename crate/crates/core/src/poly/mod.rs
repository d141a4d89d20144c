//! Best uniform polynomial approximation machinery: Remez exchange on
//! intervals, the `|t|` approximant, filtered tensor-Chebyshev bivariate
//! approximants, the product polynomial `h_2K`, and coefficient diagnostics.

mod cheb2d;
mod remez;

pub use cheb2d::{build_h2k, cheb_filtered_2d};
pub use remez::{best_abs_poly, remez_best_approx};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A univariate polynomial in monomial basis over the shifted/scaled
/// variable `u = (x − center) / scale`, valid on `domain`.
///
/// Evaluation uses Horner on `u` to control conditioning; coefficients of
/// best approximants grow like `(√2 + 1)^degree`, so evaluating in the raw
/// variable would lose the low-order digits first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCoeffs {
    pub degree: usize,
    pub domain: [f64; 2],
    pub center: f64,
    pub scale: f64,
    pub coeffs: Vec<f64>,
}

impl PolyCoeffs {
    pub fn new(coeffs: Vec<f64>, domain: [f64; 2], center: f64, scale: f64) -> Self {
        assert!(
            !coeffs.is_empty(),
            "a polynomial has at least the constant coefficient"
        );
        assert!(scale > 0.0, "scale must be positive");
        PolyCoeffs {
            degree: coeffs.len() - 1,
            domain,
            center,
            scale,
            coeffs,
        }
    }

    pub fn constant(c: f64, domain: [f64; 2]) -> Self {
        let center = 0.5 * (domain[0] + domain[1]);
        let scale = (0.5 * (domain[1] - domain[0])).max(1.0);
        PolyCoeffs::new(vec![c], domain, center, scale)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.scale;
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }
}

/// A bivariate polynomial on the square `[0, side]²`, monomial in the
/// scaled variables `(x/side, y/side)`; `coeffs` is row-major
/// `(degree+1) × (degree+1)` with entry `(i, j)` multiplying
/// `(x/side)^i (y/side)^j`.
///
/// Monomial coefficients of near-best approximants grow like
/// `(√2 + 1)^degree`, which exhausts double precision around degree 20.
/// Constructors in this module therefore attach the Chebyshev tensor the
/// polynomial was built from, and `eval` prefers it; the monomial matrix
/// remains the serialization and estimator-transform contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivarPolyCoeffs {
    pub degree: usize,
    pub side: f64,
    pub coeffs: Vec<f64>,
    #[serde(skip)]
    pub(crate) stabilized: Option<ChebTensorEval>,
}

/// Chebyshev tensor on `[-1, 1]²` of the unit-square function, with a value
/// scale and an origin offset (the constant-removal term, stored as the
/// evaluated origin value so subtracting it is exact by construction).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChebTensorEval {
    pub(crate) coeffs: Vec<f64>,
    pub(crate) degree: usize,
    pub(crate) value_scale: f64,
    pub(crate) origin_offset: f64,
}

impl ChebTensorEval {
    fn eval_raw(&self, u: f64, v: f64) -> f64 {
        let t = 2.0 * u - 1.0;
        let s = 2.0 * v - 1.0;
        let k = self.degree + 1;
        let mut collapsed = Vec::with_capacity(k);
        for i in 0..k {
            collapsed.push(clenshaw(&self.coeffs[i * k..(i + 1) * k], s));
        }
        clenshaw(&collapsed, t)
    }

    pub(crate) fn eval(&self, u: f64, v: f64) -> f64 {
        self.value_scale * self.eval_raw(u, v) - self.origin_offset
    }

    /// Freezes the current origin value as the offset, making every later
    /// `eval(0, 0)` an exact zero (identical computation, exact cancel).
    pub(crate) fn remove_origin(&mut self) {
        self.origin_offset = self.value_scale * self.eval_raw(0.0, 0.0);
    }
}

fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let tmp = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = tmp;
    }
    t * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

impl BivarPolyCoeffs {
    pub fn new(coeffs: Vec<f64>, degree: usize, side: f64) -> Self {
        assert_eq!(coeffs.len(), (degree + 1) * (degree + 1));
        assert!(side > 0.0);
        BivarPolyCoeffs {
            degree,
            side,
            coeffs,
            stabilized: None,
        }
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.degree + 1) + j]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let u = x / self.side;
        let v = y / self.side;
        if let Some(stable) = &self.stabilized {
            return stable.eval(u, v);
        }
        let k = self.degree + 1;
        let mut acc = 0.0;
        for i in (0..k).rev() {
            let row = &self.coeffs[i * k..(i + 1) * k];
            let mut inner = 0.0;
            for &c in row.iter().rev() {
                inner = inner * v + c;
            }
            acc = acc * u + inner;
        }
        acc
    }
}

/// Outcome of a sup-error scan or a Remez run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub sup_error: f64,
    pub grid_resolution: usize,
    pub equioscillation_points: Option<Vec<f64>>,
}

/// Sup of `|poly − f|` over a uniform grid on the polynomial's domain.
///
/// A grid sup is a lower bound on the true sup error; refining the grid can
/// only increase it.
pub fn approx_error_sup<F>(poly: &PolyCoeffs, f: F, grid_resolution: usize) -> ApproxReport
where
    F: Fn(f64) -> f64 + Sync,
{
    let res = grid_resolution.max(2);
    let [lo, hi] = poly.domain;
    let sup = (0..res)
        .into_par_iter()
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (res - 1) as f64;
            (poly.eval(x) - f(x)).abs()
        })
        .reduce(|| 0.0, f64::max);
    ApproxReport {
        sup_error: sup,
        grid_resolution: res,
        equioscillation_points: None,
    }
}

/// Bivariate version of [`approx_error_sup`] over a uniform grid on
/// `[0, side]²`.
pub fn approx_error_sup_2d<F>(poly: &BivarPolyCoeffs, f: F, grid_resolution: usize) -> ApproxReport
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let res = grid_resolution.max(2);
    let side = poly.side;
    let sup = (0..res * res)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / res, idx % res);
            let x = side * i as f64 / (res - 1) as f64;
            let y = side * j as f64 / (res - 1) as f64;
            (poly.eval(x, y) - f(x, y)).abs()
        })
        .reduce(|| 0.0, f64::max);
    ApproxReport {
        sup_error: sup,
        grid_resolution: res,
        equioscillation_points: None,
    }
}

/// Result of a coefficient-magnitude check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffBoundOutcome {
    pub ok: bool,
    pub violating_index: Option<usize>,
}

const SQRT2_PLUS_1: f64 = std::f64::consts::SQRT_2 + 1.0;

fn coeff_bound_interval(nu: usize, n: usize, a: f64, ulo: f64, uhi: f64) -> f64 {
    let mid = 0.5 * (ulo + uhi);
    if mid.abs() <= 1e-12 * (ulo.abs() + uhi.abs()) {
        // Symmetric interval [-b, b]: |a_nu| <= A b^{-nu} (sqrt(2)+1)^n.
        a * uhi.powi(-(nu as i32)) * SQRT2_PLUS_1.powi(n as i32)
    } else {
        // General interval: |a_nu| <= 2^{7n/2} A |mid|^{-nu} (|(b+a)/(b-a)|^n + 1).
        let ratio = ((uhi + ulo) / (uhi - ulo)).abs();
        2f64.powf(3.5 * n as f64) * a * mid.abs().powi(-(nu as i32)) * (ratio.powi(n as i32) + 1.0)
    }
}

/// Checks every coefficient against the bound implied by `|poly| <= a` on
/// its domain (caller-asserted). Used as a sanity gate before forming
/// unbiased estimators, where coefficient blow-up translates into variance.
pub fn coeff_bound_check(poly: &PolyCoeffs, a: f64) -> CoeffBoundOutcome {
    let n = poly.degree;
    let ulo = (poly.domain[0] - poly.center) / poly.scale;
    let uhi = (poly.domain[1] - poly.center) / poly.scale;
    for (nu, &c) in poly.coeffs.iter().enumerate() {
        if c.abs() > coeff_bound_interval(nu, n, a, ulo, uhi) {
            return CoeffBoundOutcome {
                ok: false,
                violating_index: Some(nu),
            };
        }
    }
    CoeffBoundOutcome {
        ok: true,
        violating_index: None,
    }
}

/// Tensor extension of [`coeff_bound_check`] for the unit-square basis:
/// each variable contributes the general-interval factor on `[0, 1]`, with
/// the sup bound `a` counted once. Violating index is row-major.
pub fn coeff_bound_check_2d(poly: &BivarPolyCoeffs, a: f64) -> CoeffBoundOutcome {
    let n = poly.degree;
    let per_var = |nu: usize| coeff_bound_interval(nu, n, 1.0, 0.0, 1.0);
    let k = poly.degree + 1;
    for i in 0..k {
        for j in 0..k {
            let bound = a * per_var(i) * per_var(j);
            if poly.coeff(i, j).abs() > bound {
                return CoeffBoundOutcome {
                    ok: false,
                    violating_index: Some(i * k + j),
                };
            }
        }
    }
    CoeffBoundOutcome {
        ok: true,
        violating_index: None,
    }
}
