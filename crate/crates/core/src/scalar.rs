//! Bracketed scalar root finding and minimization used by the cut solver.

/// Outcome of a bracketed scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Found {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's method on `[a, b]` with `f(a)` and `f(b)` already known. Requires
/// opposite signs (or a zero endpoint); returns `None` otherwise.
pub(crate) fn brent_root_from<F>(
    mut f: F,
    (mut a, mut fa): (f64, f64),
    (mut b, mut fb): (f64, f64),
    xtol: f64,
    max_iter: usize,
) -> Option<Found>
where
    F: FnMut(f64) -> f64,
{
    if !(fa.is_finite() && fb.is_finite()) {
        return None;
    }
    if fa == 0.0 {
        return Some(Found { x: a, value: 0.0, iterations: 0, converged: true });
    }
    if fb == 0.0 {
        return Some(Found { x: b, value: 0.0, iterations: 0, converged: true });
    }
    if fa.signum() == fb.signum() {
        return None;
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(Found { x: b, value: fb, iterations: iter, converged: true });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return None;
        }
    }
    Some(Found { x: b, value: fb, iterations: max_iter, converged: false })
}

/// Root of a monotone function near `guess`: steps from the guess towards
/// the sign change with doubling step length, then refines with Brent.
/// Returns `None` if no sign change exists on `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn monotone_root_near<F>(
    mut f: F,
    guess: f64,
    step: f64,
    (lo, hi): (f64, f64),
    increasing: bool,
    xtol: f64,
    max_iter: usize,
) -> Option<Found>
where
    F: FnMut(f64) -> f64,
{
    let mut a = guess.clamp(lo, hi);
    let mut fa = f(a);
    if fa == 0.0 {
        return Some(Found { x: a, value: 0.0, iterations: 0, converged: true });
    }
    if fa.is_nan() {
        return None;
    }
    let rightwards = (fa < 0.0) == increasing;
    let mut step = step.abs().max(f64::MIN_POSITIVE);
    loop {
        let b = if rightwards { (a + step).min(hi) } else { (a - step).max(lo) };
        if b == a {
            return None;
        }
        let fb = f(b);
        if fb.is_nan() {
            return None;
        }
        if fb == 0.0 || fb.signum() != fa.signum() {
            let (l, r) = if a < b { ((a, fa), (b, fb)) } else { ((b, fb), (a, fa)) };
            return brent_root_from(f, l, r, xtol, max_iter);
        }
        a = b;
        fa = fb;
        step *= 2.0;
    }
}

/// Brent's bounded minimizer (golden section with parabolic steps) on `[a, b]`.
pub(crate) fn brent_min<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Found
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a, b);
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 1..=max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = 1.0e-10 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Found { x, value: fx, iterations: iter, converged: true };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(mid - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Found { x, value: fx, iterations: max_iter, converged: false }
}
