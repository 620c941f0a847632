//! Geodesic-sphere geometry in H^3(a) and the derived profile functions.
//!
//! For a geodesic sphere of radius r in the model space of constant
//! curvature a <= 0 (a = 0 is Euclidean R^3):
//!
//! ```text
//! V(r) = 2 pi (sinh(s r) cosh(s r) - s r) / s^3       s = sqrt(-a)
//! S(r) = 4 pi sinh(s r)^2 / s^2
//! M(r) = 8 pi sinh(s r) cosh(s r) / s
//! ```
//!
//! with (V)' = S and (S)' = M. The isoperimetric profile eta(x) is the area
//! of the sphere of volume x, the total-mean-curvature profile xi(x) its
//! total mean curvature, and xi^2 = 16 pi eta - 4 a eta^2, eta' eta = xi.

use crate::numerics::{find_root_newton, NumericsError, Result, Tolerance};
use std::f64::consts::PI;

/// Ambient curvature parameter of H^3(a).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceForm {
    a: f64,
}

impl SpaceForm {
    pub fn new(a: f64) -> Result<Self> {
        if !(a <= 0.0) {
            return Err(NumericsError::Domain(format!("curvature must satisfy a <= 0, got {a}")));
        }
        Ok(Self { a })
    }

    pub fn euclidean() -> Self {
        Self { a: 0.0 }
    }

    pub fn hyperbolic() -> Self {
        Self { a: -1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// sqrt(-a); zero in the Euclidean case.
    pub fn s(&self) -> f64 {
        (-self.a).sqrt()
    }

    pub fn is_euclidean(&self) -> bool {
        self.a == 0.0
    }
}

/// Geodesic sphere data at one radius.
#[derive(Debug, Clone, Copy)]
pub struct SpherePoint {
    pub r: f64,
    pub volume: f64,
    pub area: f64,
    pub tmc: f64,
}

impl SpherePoint {
    pub fn at(r: f64, sf: SpaceForm) -> Self {
        Self { r, volume: sphere_volume(r, sf), area: sphere_area(r, sf), tmc: sphere_tmc(r, sf) }
    }
}

/// Switch to Taylor series below this value of sqrt(-a) * r; the closed
/// forms cancel to O(x^3) there.
const SERIES_CUT: f64 = 1e-4;

/// sinh(sqrt(-a) r)/sqrt(-a), continuous in a at 0 (where it equals r).
pub fn warp(r: f64, sf: SpaceForm) -> f64 {
    let s = sf.s();
    if sf.is_euclidean() {
        return r;
    }
    let x = s * r;
    if x < SERIES_CUT {
        // sinh x = x + x^3/6 + x^5/120 + x^7/5040 + x^9/362880
        let x2 = x * x;
        r * (1.0 + x2 * (1.0 / 6.0 + x2 * (1.0 / 120.0 + x2 * (1.0 / 5040.0 + x2 / 362880.0))))
    } else {
        x.sinh() / s
    }
}

/// Derivative of [`warp`] in r: cosh(sqrt(-a) r).
pub fn warp_deriv(r: f64, sf: SpaceForm) -> f64 {
    (sf.s() * r).cosh()
}

// sinh(x) cosh(x) - x = 2x^3/3 + 2x^5/15 + 4x^7/315 + 2x^9/2835 + 4x^11/155925
fn sinh_cosh_minus_x_series(x: f64) -> f64 {
    let x2 = x * x;
    x * x2
        * (2.0 / 3.0
            + x2 * (2.0 / 15.0
                + x2 * (4.0 / 315.0 + x2 * (2.0 / 2835.0 + x2 * (4.0 / 155925.0)))))
}

// sinh(x)^2 = x^2 + x^4/3 + 2x^6/45 + x^8/315 + 2x^10/14175
fn sinh_sq_series(x: f64) -> f64 {
    let x2 = x * x;
    x2 * (1.0 + x2 * (1.0 / 3.0 + x2 * (2.0 / 45.0 + x2 * (1.0 / 315.0 + x2 * (2.0 / 14175.0)))))
}

// sinh(x) cosh(x) = x + 2x^3/3 + 2x^5/15 + 4x^7/315 + 2x^9/2835
fn sinh_cosh_series(x: f64) -> f64 {
    x + sinh_cosh_minus_x_series(x)
}

/// Volume of the geodesic ball of radius r.
pub fn sphere_volume(r: f64, sf: SpaceForm) -> f64 {
    if sf.is_euclidean() {
        return 4.0 / 3.0 * PI * r * r * r;
    }
    let s = sf.s();
    let x = s * r;
    let core = if x < SERIES_CUT { sinh_cosh_minus_x_series(x) } else { x.sinh() * x.cosh() - x };
    2.0 * PI * core / (s * s * s)
}

/// Area of the geodesic sphere of radius r.
pub fn sphere_area(r: f64, sf: SpaceForm) -> f64 {
    if sf.is_euclidean() {
        return 4.0 * PI * r * r;
    }
    let s = sf.s();
    let x = s * r;
    let core = if x < SERIES_CUT { sinh_sq_series(x) } else { x.sinh().powi(2) };
    4.0 * PI * core / (s * s)
}

/// Total mean curvature (H = trace II) of the geodesic sphere of radius r.
pub fn sphere_tmc(r: f64, sf: SpaceForm) -> f64 {
    if sf.is_euclidean() {
        return 8.0 * PI * r;
    }
    let s = sf.s();
    let x = s * r;
    let core = if x < SERIES_CUT { sinh_cosh_series(x) } else { x.sinh() * x.cosh() };
    8.0 * PI * core / s
}

/// Radius of the geodesic ball with volume x, by safeguarded Newton with
/// derivative S (since V' = S).
pub fn radius_from_volume(x: f64, sf: SpaceForm) -> Result<f64> {
    if x < 0.0 {
        return Err(NumericsError::Domain(format!("volume must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if sf.is_euclidean() {
        return Ok((3.0 * x / (4.0 * PI)).cbrt());
    }
    // Two upper estimates, both rigorous: the Euclidean ball radius
    // (V_a >= V_0 pointwise) and the asymptotic inverse of
    // V ~ pi e^{2 s r} / (2 s^3) (the true V is below that envelope).
    // Newton from the cube-root bracket alone crawls linearly down the
    // exponential tail; the log estimate lands within O(1) of the root.
    let s = sf.s();
    let r_cbrt = (3.0 * x / (4.0 * PI)).cbrt();
    let r_log = (2.0 * s * s * s * x / PI).ln() / (2.0 * s);
    let mut hi =
        if r_log.is_finite() && r_log > 0.0 { r_cbrt.min(r_log) } else { r_cbrt }.max(1e-3);
    // grow the bracket until V(hi) >= x (the estimates are upper bounds in
    // exact arithmetic; the loop guards against rounding at the boundary)
    let mut guard = 0;
    while sphere_volume(hi, sf) < x {
        hi *= 2.0;
        guard += 1;
        if guard > 400 {
            return Err(NumericsError::Domain(format!("failed to bracket volume {x}")));
        }
    }
    let tol = Tolerance::new(0.0, 1e-14, 200)?;
    find_root_newton(|r| sphere_volume(r, sf) - x, |r| sphere_area(r, sf), 0.0, hi, &tol)
}

/// Isoperimetric profile: area of the geodesic sphere with volume x.
pub fn eta(x: f64, sf: SpaceForm) -> Result<f64> {
    Ok(sphere_area(radius_from_volume(x, sf)?, sf))
}

/// Total-mean-curvature profile, evaluated through the identity
/// xi = sqrt(16 pi eta - 4 a eta^2). The route through M(V^{-1}) is kept as
/// a test oracle.
pub fn xi(x: f64, sf: SpaceForm) -> Result<f64> {
    let e = eta(x, sf)?;
    Ok(xi_from_eta(e, sf))
}

/// xi as a function of eta: sqrt(16 pi eta - 4 a eta^2).
pub fn xi_from_eta(eta: f64, sf: SpaceForm) -> f64 {
    (16.0 * PI * eta - 4.0 * sf.a() * eta * eta).sqrt()
}

/// Profile derivative eta'(x) = xi(x) / eta(x); singular at x = 0.
pub fn eta_deriv(x: f64, sf: SpaceForm) -> Result<f64> {
    if x <= 0.0 {
        return Err(NumericsError::Domain(
            "eta'(x) is singular at x = 0 (eta ~ c x^(2/3))".into(),
        ));
    }
    let e = eta(x, sf)?;
    Ok(xi_from_eta(e, sf) / e)
}
