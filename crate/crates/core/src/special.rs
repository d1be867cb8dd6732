//! Special functions and quadrature rules shared by the solvers.
//!
//! Everything here is deterministic and allocation-light; the adaptive
//! integrator is a global-subdivision Gauss–Kronrod scheme in the spirit of
//! QUADPACK's QAG, generalised to vector-valued integrands so that several
//! moments over the same region can share one set of function evaluations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the Gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_p requires a > 0");
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q requires a > 0");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

/// Unregularized lower incomplete gamma `γ(a, x)`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    gamma_p(a, x) * gamma(a)
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Error returned when adaptive quadrature cannot meet its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("quadrature did not converge: estimate {value:e}, error {error:e} after {intervals} intervals")]
pub struct QuadratureError {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn kronrod_segment<const K: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; K], [f64; K])
where
    F: FnMut(f64) -> [f64; K],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = [0.0; K];
    let mut res_g = [0.0; K];
    for k in 0..K {
        res_k[k] = fc[k] * WGK[7];
        res_g[k] = fc[k] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            res_k[k] += WGK[j] * s;
            if j % 2 == 1 {
                res_g[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; K];
    for k in 0..K {
        res_k[k] *= half;
        res_g[k] *= half;
        err[k] = (res_k[k] - res_g[k]).abs();
    }
    (res_k, err)
}

struct Segment<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
    priority: f64,
}

impl<const K: usize> PartialEq for Segment<K> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const K: usize> Eq for Segment<K> {}
impl<const K: usize> PartialOrd for Segment<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Segment<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// Tolerances for [`integrate_vec`]. A component is converged when its error
/// is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_intervals: 2000,
        }
    }

    pub const fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

/// Adaptive Gauss–Kronrod quadrature of a vector-valued integrand over `[a, b]`.
///
/// Returns the value and error estimate per component. Fails only when the
/// interval budget is exhausted; callers that prefer a best-effort value can
/// read it from the error.
pub fn integrate_vec<const K: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<([f64; K], [f64; K]), QuadratureError>
where
    F: FnMut(f64) -> [f64; K],
{
    if a == b {
        return Ok(([0.0; K], [0.0; K]));
    }
    let (v, e) = kronrod_segment(&mut f, a, b);
    let mut total = v;
    let mut total_err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
        priority: e.iter().cloned().fold(0.0, f64::max),
    });
    let converged = |val: &[f64; K], err: &[f64; K]| {
        (0..K).all(|k| err[k] <= tol.abs.max(tol.rel * val[k].abs()))
    };
    let mut intervals = 1;
    while !converged(&total, &total_err) {
        if intervals >= tol.max_intervals {
            let worst = (0..K)
                .max_by(|&i, &j| total_err[i].total_cmp(&total_err[j]))
                .unwrap_or(0);
            return Err(QuadratureError {
                value: total[worst],
                error: total_err[worst],
                intervals,
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = kronrod_segment(&mut f, seg.a, mid);
        let (v2, e2) = kronrod_segment(&mut f, mid, seg.b);
        for k in 0..K {
            total[k] += v1[k] + v2[k] - seg.value[k];
            total_err[k] += e1[k] + e2[k] - seg.error[k];
        }
        // Priority is the worst component error relative to its own target so
        // that small moments are not starved by large ones.
        let weight = |err: &[f64; K]| {
            (0..K)
                .map(|k| err[k] / tol.abs.max(tol.rel * total[k].abs()).max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        };
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            priority: weight(&e1),
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            priority: weight(&e2),
        });
        intervals += 1;
    }
    // Recompute the sums from the live segments to shed accumulated rounding.
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for seg in heap.iter() {
        for k in 0..K {
            value[k] += seg.value[k];
            error[k] += seg.error[k];
        }
    }
    Ok((value, error))
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64), QuadratureError>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x| [f(x)], a, b, tol).map(|(v, e)| (v[0], e[0]))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL), ascending.
/// `diag` has length n, `off[k]` couples rows k and k+1.
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Gauss–Hermite rule for the weight `exp(-x^2)`.
///
/// Returns the nodes and the *scaled* weights `w_i * exp(x_i^2)`, so that
/// `∫ g(x) dx ≈ Σ scaled_i g(x_i)` for integrands that already carry their
/// own Gaussian decay. Raw weights underflow for large rules; the scaled form
/// stays O(1) for every node.
///
/// Nodes come from the eigenvalues of the Jacobi matrix, polished by Newton
/// steps on the orthonormal recurrence, which also yields the weights.
pub fn gauss_hermite_scaled(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut nodes = if n == 1 {
        vec![0.0]
    } else {
        tridiagonal_eigenvalues(&vec![0.0; n], &off)
    };
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let half = n / 2;
    for i in half..n {
        let mut z = nodes[i];
        let mut log_pp = 0.0;
        for _ in 0..3 {
            // orthonormal Hermite recurrence with running rescale
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            let mut log_scale = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
                if p1.abs() > 1e150 {
                    p1 *= 1e-150;
                    p2 *= 1e-150;
                    log_scale += 150.0 * std::f64::consts::LN_10;
                }
            }
            let pp = (2.0 * nf).sqrt() * p2;
            log_pp = pp.abs().ln() + log_scale;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let w = (2.0_f64.ln() + z * z - 2.0 * log_pp).exp();
        // mirror onto the negative half
        nodes[i] = z;
        weights[i] = w;
        nodes[n - 1 - i] = -z;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[half] = 0.0;
    }
    (nodes, weights)
}

/// Solve `f(x) = 0` on `[lo, hi]` by bisection with secant polishing.
/// Returns `None` when the bracket does not contain a sign change.
pub fn bracketed_root<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..300 {
        // secant guess, fall back to bisection when it leaves the bracket
        let mut x = hi - fhi * (hi - lo) / (fhi - flo);
        let width = hi - lo;
        if !(x > lo + 0.01 * width && x < hi - 0.01 * width) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        if (hi - lo).abs() <= rel_tol * x.abs().max(f64::MIN_POSITIVE) {
            return Some(0.5 * (lo + hi));
        }
    }
    Some(0.5 * (lo + hi))
}
