//! Small quadrature toolkit: adaptive Simpson for smooth integrands and
//! trapezoid sums over tabulated grids. Used for noise normalization,
//! integrability checks, and cross-checking closed forms.

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// `tol` is an absolute tolerance for the whole interval; it is split in
/// half on each recursion, which bounds the accumulated error by `tol` up
/// to the usual Richardson factor.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson_slice(a, b, fa, fm, fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[inline]
fn simpson_slice(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_slice(a, m, fa, flm, fm);
    let right = simpson_slice(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Trapezoid integral of tabulated values `ys` over abscissae `xs`.
///
/// The grid need not be uniform; `xs` must be strictly increasing.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}
