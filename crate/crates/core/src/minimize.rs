//! Bracketed scalar minimization (Brent's parabolic / golden-section hybrid).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizeError {
    #[error("no convergence after {iterations} iterations, bracket [{lower}, {upper}]")]
    NoConvergence { iterations: usize, lower: f64, upper: f64 },
    #[error("invalid bracket [{0}, {1}]")]
    InvalidBracket(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Minimizes `f` on `[lower, upper]` to absolute tolerance `xtol` in `x`.
pub fn brent(
    f: impl Fn(f64) -> f64,
    lower: f64,
    upper: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Minimum, MinimizeError> {
    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(MinimizeError::InvalidBracket(lower, upper));
    }
    let (mut a, mut b) = (lower, upper);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);

    for iter in 1..=max_iter {
        let m = 0.5 * (a + b);
        let tol1 = 1e-12 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(Minimum { x, value: fx, iterations: iter });
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
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
    Err(MinimizeError::NoConvergence { iterations: max_iter, lower: a, upper: b })
}

/// Plain golden-section search, kept as an independent cross-check for
/// [`brent`].
pub fn golden_section(f: impl Fn(f64) -> f64, lower: f64, upper: f64, xtol: f64) -> Minimum {
    let (mut a, mut b) = (lower, upper);
    let mut c = b - (1.0 - GOLDEN) * (b - a);
    let mut d = a + (1.0 - GOLDEN) * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while (b - a).abs() > xtol {
        iterations += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (1.0 - GOLDEN) * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (1.0 - GOLDEN) * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    Minimum { x, value: f(x), iterations }
}
