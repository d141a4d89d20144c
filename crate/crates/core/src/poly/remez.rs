//! Remez exchange for best uniform approximation on an interval.
//!
//! The iteration runs internally in Chebyshev basis on `[-1, 1]` (monomial
//! Vandermonde systems are hopeless beyond degree ~20) and converts to the
//! monomial form of [`PolyCoeffs`] only at the boundary.

use super::{ApproxReport, PolyCoeffs};
use crate::{Error, Result};
use std::f64::consts::PI;

const MAX_EXCHANGES: usize = 100;
const LEVEL_RTOL: f64 = 1e-12;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn cheb_clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let tmp = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = tmp;
    }
    t * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

/// Gaussian elimination with partial pivoting; `a` is row-major n×n.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

pub(crate) struct ChebRemez {
    /// Chebyshev coefficients of the approximant on `[-1, 1]`.
    pub cheb: Vec<f64>,
    pub sup_error: f64,
    /// Final reference (equioscillation points), increasing in `t`.
    pub extrema: Vec<f64>,
}

/// Derivative-free maximization of `h` on `[a, b]` by golden section.
fn golden_max<F: Fn(f64) -> f64>(h: F, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    for _ in 0..60 {
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - GOLDEN * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + GOLDEN * (b - a);
            hd = h(d);
        }
        if b - a < 1e-14 {
            break;
        }
    }
    0.5 * (a + b)
}

pub(crate) fn remez_chebyshev<G: Fn(f64) -> f64>(g: G, k: usize) -> Result<ChebRemez> {
    let npts = k + 2;
    // Chebyshev-distributed scan grid, dense enough to separate the extrema
    // of endpoint-singular targets like sqrt at degree ~30.
    let scan_len = (256 * (k + 1)).max(8192);
    let scan: Vec<f64> = (0..=scan_len)
        .map(|i| -(PI * i as f64 / scan_len as f64).cos())
        .collect();
    let gvals: Vec<f64> = scan.iter().map(|&t| g(t)).collect();
    for (i, &v) in gvals.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteFunction(scan[i]));
        }
    }
    let gscale = gvals
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-300);

    let mut reference: Vec<f64> = (0..npts)
        .map(|i| -(PI * i as f64 / (npts - 1) as f64).cos())
        .collect();

    let mut last_residual = f64::INFINITY;
    let mut restarts = 0usize;
    for iteration in 0..MAX_EXCHANGES {
        // Levelled-error system: sum_j b_j T_j(t_i) + (-1)^i E = g(t_i).
        let n = npts;
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (i, &t) in reference.iter().enumerate() {
            let theta = t.clamp(-1.0, 1.0).acos();
            for j in 0..=k {
                a[i * n + j] = (j as f64 * theta).cos();
            }
            a[i * n + k + 1] = if i % 2 == 0 { 1.0 } else { -1.0 };
            rhs[i] = g(t);
        }
        let sol = solve_dense(a, rhs).ok_or(Error::NonConvergence {
            iterations: iteration,
            residual: last_residual,
        })?;
        let cheb = sol[..=k].to_vec();
        let level = sol[k + 1].abs();

        let resid = |t: f64| g(t) - cheb_clenshaw(&cheb, t);
        let rvals: Vec<f64> = scan
            .iter()
            .enumerate()
            .map(|(i, &t)| gvals[i] - cheb_clenshaw(&cheb, t))
            .collect();
        let max_scan = rvals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

        // Exact representation: the residual is rounding noise.
        if max_scan <= 1e-14 * gscale {
            return Ok(ChebRemez {
                cheb,
                sup_error: max_scan,
                extrema: reference,
            });
        }

        // Local extrema of |r| on the scan, refined by golden section.
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        for i in 0..rvals.len() {
            let v = rvals[i].abs();
            if v == 0.0 {
                continue;
            }
            let left_ok = i == 0 || rvals[i - 1].abs() <= v;
            let right_ok = i + 1 == rvals.len() || rvals[i + 1].abs() <= v;
            if left_ok && right_ok {
                let a = if i == 0 { scan[0] } else { scan[i - 1] };
                let b = if i + 1 == scan.len() {
                    scan[scan.len() - 1]
                } else {
                    scan[i + 1]
                };
                let sign = rvals[i].signum();
                let t = if b > a {
                    golden_max(|t| sign * resid(t), a, b)
                } else {
                    scan[i]
                };
                let r = resid(t);
                // Keep the better of the refined point and the scan point.
                if r.abs() >= v {
                    candidates.push((t, r));
                } else {
                    candidates.push((scan[i], rvals[i]));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
        candidates.dedup_by(|a, b| {
            if (a.0 - b.0).abs() < 1e-13 {
                if a.1.abs() > b.1.abs() {
                    *b = *a;
                }
                true
            } else {
                false
            }
        });

        // Enforce sign alternation: keep the largest of each same-sign run.
        let mut alternating: Vec<(f64, f64)> = Vec::new();
        for cand in candidates {
            match alternating.last_mut() {
                Some(last) if last.1.signum() == cand.1.signum() => {
                    if cand.1.abs() > last.1.abs() {
                        *last = cand;
                    }
                }
                _ => alternating.push(cand),
            }
        }

        let max_ext = alternating.iter().fold(0.0f64, |m, &(_, r)| m.max(r.abs()));
        last_residual = max_ext;

        // Residual evaluations carry ~eps * |g| of absolute noise, so the
        // relative agreement test needs a matching absolute floor.
        let tolerance = LEVEL_RTOL * max_ext + 16.0 * f64::EPSILON * gscale;

        if std::env::var_os("L1DIST_REMEZ_DEBUG").is_some() {
            eprintln!(
                "iter {iteration}: level {level:e}, max_ext {max_ext:e}, alternating {}",
                alternating.len()
            );
        }

        if alternating.len() < npts {
            // Not enough alternations to exchange; acceptable when the
            // levelled error already matches the observed maximum.
            if max_ext - level <= tolerance {
                return Ok(ChebRemez {
                    cheb,
                    sup_error: max_ext,
                    extrema: reference,
                });
            }
            // Degenerate exchange. Happens when a symmetric reference on a
            // symmetric target collapses the levelled system to plain
            // interpolation (E = 0); a phase-shifted reference breaks the
            // symmetry and the iteration proceeds normally.
            if restarts < 3 {
                restarts += 1;
                let phase = 0.37 * restarts as f64;
                reference = (0..npts)
                    .map(|i| -(PI * (i as f64 + phase) / (npts as f64 - 1.0 + phase)).cos())
                    .collect();
                continue;
            }
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual: max_ext,
            });
        }
        while alternating.len() > npts {
            let first = alternating.first().unwrap().1.abs();
            let last = alternating.last().unwrap().1.abs();
            if first <= last {
                alternating.remove(0);
            } else {
                alternating.pop();
            }
        }

        reference = alternating.iter().map(|&(t, _)| t).collect();

        if max_ext - level <= tolerance {
            return Ok(ChebRemez {
                cheb,
                sup_error: max_ext,
                extrema: reference,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_EXCHANGES,
        residual: last_residual,
    })
}

/// Monomial coefficients (in `t`) from Chebyshev coefficients.
pub(crate) fn cheb_to_monomial(cheb: &[f64]) -> Vec<f64> {
    let k = cheb.len() - 1;
    let mut out = vec![0.0; k + 1];
    let mut t_prev = vec![0.0; k + 1];
    let mut t_cur = vec![0.0; k + 1];
    t_prev[0] = 1.0; // T_0
    out[0] += cheb[0];
    if k >= 1 {
        t_cur[1] = 1.0; // T_1
        for (o, &c) in out.iter_mut().zip(&t_cur) {
            *o += cheb[1] * c;
        }
        for j in 2..=k {
            // T_j = 2 t T_{j-1} - T_{j-2}
            let mut t_next = vec![0.0; k + 1];
            for i in 0..k {
                t_next[i + 1] += 2.0 * t_cur[i];
            }
            for i in 0..=k {
                t_next[i] -= t_prev[i];
            }
            for i in 0..=k {
                out[i] += cheb[j] * t_next[i];
            }
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    out
}

/// Best degree-`k` uniform approximation of `f` on `[lo, hi]`.
///
/// Returns the polynomial and a report carrying the equioscillation level
/// and the final reference points. Iteration stops when the observed
/// extremal residuals agree with the levelled error to relative `1e-12`,
/// or errors out after 100 exchanges.
pub fn remez_best_approx<F: Fn(f64) -> f64>(
    f: F,
    domain: [f64; 2],
    k: usize,
) -> Result<(PolyCoeffs, ApproxReport)> {
    let [lo, hi] = domain;
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidParameter(format!(
            "invalid domain [{lo}, {hi}]"
        )));
    }
    if hi - lo < 1e-14 {
        let mid = 0.5 * (lo + hi);
        let value = f(mid);
        if !value.is_finite() {
            return Err(Error::NonFiniteFunction(mid));
        }
        return Ok((
            PolyCoeffs::constant(value, domain),
            ApproxReport {
                sup_error: 0.0,
                grid_resolution: 1,
                equioscillation_points: Some(vec![mid]),
            },
        ));
    }
    let c = 0.5 * (lo + hi);
    let s = 0.5 * (hi - lo);
    let run = remez_chebyshev(|t| f(c + s * t), k)?;
    let poly = PolyCoeffs::new(cheb_to_monomial(&run.cheb), domain, c, s);
    let points = run.extrema.iter().map(|&t| c + s * t).collect();
    Ok((
        poly,
        ApproxReport {
            sup_error: run.sup_error,
            grid_resolution: 0,
            equioscillation_points: Some(points),
        },
    ))
}

/// Best degree-`k` approximation of `|t|` on `[-1, 1]`.
///
/// Built from the degree-`⌊k/2⌋` approximation of `√x` on `[0, 1]`: the best
/// approximant of an even function is even, so composing with `x = t²`
/// yields the full-degree solution with odd coefficients exactly zero.
pub fn best_abs_poly(k: usize) -> Result<(PolyCoeffs, ApproxReport)> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "best_abs_poly needs degree >= 1".into(),
        ));
    }
    let m = k / 2;
    let run = remez_chebyshev(|t| (0.5 * (t + 1.0)).sqrt(), m)?;
    let in_u = cheb_to_monomial(&run.cheb); // u = 2x - 1, x in [0, 1]

    // R(t) = P(t^2) with u = 2 t^2 - 1: Horner over the z = t^2 polynomial.
    let mut z_coeffs = vec![0.0; m + 1];
    z_coeffs[0] = in_u[m];
    let mut top = 0usize;
    for j in (0..m).rev() {
        // acc <- acc * (2z - 1) + a_j
        let mut next = vec![0.0; m + 1];
        for i in 0..=top {
            next[i + 1] += 2.0 * z_coeffs[i];
            next[i] -= z_coeffs[i];
        }
        next[0] += in_u[j];
        top += 1;
        z_coeffs = next;
    }
    let mut coeffs = vec![0.0; k + 1];
    for (i, &z) in z_coeffs.iter().enumerate() {
        coeffs[2 * i] = z;
    }

    let mut points: Vec<f64> = Vec::new();
    for &t in &run.extrema {
        let x = (0.5 * (t + 1.0)).max(0.0).sqrt();
        points.push(x);
        if x > 0.0 {
            points.push(-x);
        }
    }
    points.sort_by(f64::total_cmp);

    Ok((
        PolyCoeffs::new(coeffs, [-1.0, 1.0], 0.0, 1.0),
        ApproxReport {
            sup_error: run.sup_error,
            grid_resolution: 0,
            equioscillation_points: Some(points),
        },
    ))
}
