//! One-dimensional deterministic quadrature.

use crate::{Error, Result, Scalar};

/// Result of a deterministic integration: value and an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<S> {
    pub value: S,
    pub error: S,
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    tol: S,
    max_depth: u32,
) -> Result<Quadrature<S>> {
    if b <= a {
        return Ok(Quadrature {
            value: S::zero(),
            error: S::zero(),
        });
    }
    let two = S::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut err = S::zero();
    let value = simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut err);
    if !(err <= tol * S::lit(10.0)) {
        return Err(Error::Quadrature {
            achieved: err.to_f64_lossy(),
            requested: tol.to_f64_lossy(),
        });
    }
    Ok(Quadrature { value, error: err })
}

#[inline]
fn simpson<S: Scalar>(a: S, b: S, fa: S, fm: S, fb: S) -> S {
    (b - a) / S::lit(6.0) * (fa + S::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: u32,
    err: &mut S,
) -> S {
    let two = S::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let fifteen = S::lit(15.0);
    if depth == 0 || delta.abs() <= fifteen * tol {
        *err = *err + delta.abs() / fifteen;
        return left + right + delta / fifteen;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / two, depth - 1, err)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / two, depth - 1, err)
}

/// Integrates over `[a, b]` split at the given interior breakpoints, so that
/// jump discontinuities never fall inside a Simpson panel.
pub fn piecewise_simpson<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    breakpoints: &[S],
    tol: S,
) -> Result<Quadrature<S>> {
    let mut cuts: Vec<S> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let pieces = S::from_usize(edges.len() - 1).unwrap();
    let mut value = S::zero();
    let mut error = S::zero();
    for w in edges.windows(2) {
        // Evaluate strictly inside each piece so one-sided limits are used at
        // the breakpoints.
        let (lo, hi) = (w[0], w[1]);
        let shrink = (hi - lo) * S::lit(1e-13);
        let q = adaptive_simpson(f, lo + shrink, hi - shrink, tol / pieces, 40)?;
        value = value + q.value;
        error = error + q.error;
    }
    Ok(Quadrature { value, error })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre over the pieces delimited by `edges`.
pub fn composite_gauss<F: FnMut(f64) -> f64>(
    f: &mut F,
    edges: &[f64],
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut s = 0.0;
        for (x, wt) in nodes.iter().zip(weights) {
            s += wt * f(mid + half * x);
        }
        total += half * s;
    }
    total
}
