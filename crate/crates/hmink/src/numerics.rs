//! Shared numerical kernels: safeguarded rootfinding, adaptive Simpson
//! quadrature, cumulative integration on grids, one-step RK4, and central
//! finite differences.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("invalid bracket [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi} have the same sign")]
    InvalidBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("non-finite function value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("iteration limit {max_iter} reached (best x = {best})")]
    IterationLimit { max_iter: usize, best: f64 },
    #[error("subdivision limit reached, best estimate {estimate}")]
    SubdivisionLimit { estimate: f64 },
    #[error("invalid grid function: {0}")]
    InvalidGrid(String),
    #[error("invalid tolerance: abs_tol + rel_tol must be positive")]
    InvalidTolerance,
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Absolute/relative tolerance pair plus an iteration cap.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol >= 0.0) || !(rel_tol >= 0.0) || abs_tol + rel_tol <= 0.0 || max_iter == 0 {
            return Err(NumericsError::InvalidTolerance);
        }
        Ok(Self { abs_tol, rel_tol, max_iter })
    }

    /// Combined tolerance at scale `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.abs_tol + self.rel_tol * x.abs()
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_iter: 200 }
    }
}

/// A sampled real function on a strictly increasing grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl GridFunction {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(NumericsError::InvalidGrid(format!(
                "length mismatch: {} abscissae vs {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(NumericsError::InvalidGrid("need at least 2 points".into()));
        }
        if xs[0] != 0.0 {
            return Err(NumericsError::InvalidGrid(format!("grid must start at 0, got {}", xs[0])));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NumericsError::InvalidGrid("abscissae not strictly increasing".into()));
        }
        if let Some(&y) = xs.iter().chain(ys.iter()).find(|v| !v.is_finite()) {
            return Err(NumericsError::InvalidGrid(format!("non-finite entry {y}")));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Sup-norm distance to another grid function on the same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.ys
            .iter()
            .zip(&other.ys)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_finite(x: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NumericsError::NonFinite { x, value })
    }
}

/// Bracketed root search with secant acceleration and bisection fallback.
///
/// Requires f(lo) and f(hi) of opposite sign (or zero at an endpoint); the
/// returned root never leaves [lo, hi].
pub fn find_root_bracketed<F>(mut f: F, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = check_finite(a, f(a))?;
    let mut fb = check_finite(b, f(b))?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::InvalidBracket { lo, hi, flo: fa, fhi: fb });
    }
    // Illinois-modified regula falsi: when the same endpoint is retained
    // twice its stored value is halved, which prevents the stagnation of
    // plain false position and makes the bracket itself converge.
    let mut side = 0i8;
    for _ in 0..tol.max_iter {
        let mut x = (fa * b - fb * a) / (fa - fb);
        if !(x > a.min(b) && x < a.max(b)) || !x.is_finite() {
            x = 0.5 * (a + b);
        }
        if (b - a).abs() <= tol.at(x) {
            return Ok(x);
        }
        let fx = check_finite(x, f(x))?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Err(NumericsError::IterationLimit { max_iter: tol.max_iter, best: 0.5 * (a + b) })
}

/// Newton iteration with an analytic derivative, safeguarded by bisection on
/// a sign-changing bracket.
pub fn find_root_newton<F, D>(mut f: F, mut df: D, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = check_finite(a, f(a))?;
    let fb = check_finite(b, f(b))?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::InvalidBracket { lo, hi, flo: fa, fhi: fb });
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..tol.max_iter {
        let fx = check_finite(x, f(x))?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !next.is_finite() || next <= a || next >= b {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= tol.at(next) || (b - a).abs() <= tol.at(next) {
            return Ok(next);
        }
        x = next;
    }
    Err(NumericsError::IterationLimit { max_iter: tol.max_iter, best: x })
}

const MAX_SIMPSON_DEPTH: usize = 40;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson_rec<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = check_finite(lm, f(lm))?;
    let frm = check_finite(rm, f(rm))?;
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_SIMPSON_DEPTH {
        return Err(NumericsError::SubdivisionLimit { estimate: left + right + delta / 15.0 });
    }
    let l = adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1)?;
    let r = adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate_adaptive<F>(mut f: F, a: f64, b: f64, tol: &Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = check_finite(a, f(a))?;
    let fb = check_finite(b, f(b))?;
    let m = 0.5 * (a + b);
    let fm = check_finite(m, f(m))?;
    let whole = simpson(fa, fm, fb, b - a);
    let eps = tol.at(whole).max(f64::EPSILON * whole.abs());
    adaptive_simpson_rec(&mut f, a, b, fa, fm, fb, whole, eps, 0)
}

/// Composite-trapezoid primitive of `g` on its own grid. Monotone
/// nondecreasing whenever g >= 0.
pub fn cumulative_integral(g: &GridFunction) -> GridFunction {
    let xs = g.xs();
    let ys = g.ys();
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..xs.len() {
        acc += 0.5 * (ys[k - 1] + ys[k]) * (xs[k] - xs[k - 1]);
        out.push(acc);
    }
    GridFunction { xs: xs.to_vec(), ys: out }
}

/// Integral of the Lagrange cubic through (x0..x3, y0..y3) over [a, b].
/// Works in coordinates centered on the integration interval: evaluating
/// the quartic antiderivative at the absolute abscissae would subtract two
/// O(x^4) values whose difference is only O(h^4).
fn cubic_piece_integral(x: [f64; 4], y: [f64; 4], a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let (lo, hi) = (a - mid, b - mid);
    let mut total = 0.0;
    for i in 0..4 {
        // antiderivative of the i-th Lagrange basis polynomial via expansion
        // of prod_{j != i} (t - x_j), t relative to the interval midpoint
        let mut roots = [0.0f64; 3];
        let mut m = 0;
        let mut denom = 1.0;
        for j in 0..4 {
            if j != i {
                roots[m] = x[j] - mid;
                m += 1;
                denom *= x[i] - x[j];
            }
        }
        let (r0, r1, r2) = (roots[0], roots[1], roots[2]);
        // (t-r0)(t-r1)(t-r2) = t^3 + c2 t^2 + c1 t + c0
        let c2 = -(r0 + r1 + r2);
        let c1 = r0 * r1 + r0 * r2 + r1 * r2;
        let c0 = -r0 * r1 * r2;
        let anti = |t: f64| t * t * t * t / 4.0 + c2 * t * t * t / 3.0 + c1 * t * t / 2.0 + c0 * t;
        total += y[i] / denom * (anti(hi) - anti(lo));
    }
    total
}

/// Fourth-order cumulative primitive: each interval is integrated with the
/// Lagrange cubic through its four nearest grid points. Works on non-uniform
/// grids; unlike [`cumulative_integral`] it does not guarantee monotonicity
/// for nonnegative integrands.
pub fn cumulative_integral_cubic(g: &GridFunction) -> GridFunction {
    let xs = g.xs();
    let ys = g.ys();
    let n = xs.len();
    if n < 4 {
        return cumulative_integral(g);
    }
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n - 1 {
        let i0 = k.saturating_sub(1).min(n - 4);
        let x = [xs[i0], xs[i0 + 1], xs[i0 + 2], xs[i0 + 3]];
        let y = [ys[i0], ys[i0 + 1], ys[i0 + 2], ys[i0 + 3]];
        acc += cubic_piece_integral(x, y, xs[k], xs[k + 1]);
        out.push(acc);
    }
    GridFunction { xs: xs.to_vec(), ys: out }
}

/// One classical fourth-order Runge-Kutta step.
pub fn ode_advance<F>(mut rhs: F, state: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let check = |k: &[f64]| -> Result<()> {
        for &v in k {
            if !v.is_finite() {
                return Err(NumericsError::NonFinite { x: t, value: v });
            }
        }
        Ok(())
    };
    let k1 = rhs(t, state);
    check(&k1)?;
    let s2: Vec<f64> = state.iter().zip(&k1).map(|(y, k)| y + 0.5 * dt * k).collect();
    let k2 = rhs(t + 0.5 * dt, &s2);
    check(&k2)?;
    let s3: Vec<f64> = state.iter().zip(&k2).map(|(y, k)| y + 0.5 * dt * k).collect();
    let k3 = rhs(t + 0.5 * dt, &s3);
    check(&k3)?;
    let s4: Vec<f64> = state.iter().zip(&k3).map(|(y, k)| y + dt * k).collect();
    let k4 = rhs(t + dt, &s4);
    check(&k4)?;
    Ok(state
        .iter()
        .enumerate()
        .map(|(i, y)| y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Central difference (f(x+h) - f(x-h)) / (2h).
pub fn derivative_fd<F>(mut f: F, x: f64, h: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let fp = check_finite(x + h, f(x + h))?;
    let fm = check_finite(x - h, f(x - h))?;
    Ok((fp - fm) / (2.0 * h))
}
