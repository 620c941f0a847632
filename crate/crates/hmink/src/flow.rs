//! Axisymmetric harmonic mean curvature flow in H^3(a).
//!
//! Surfaces are radial graphs rho(u), u in [0, pi], over a fixed center in
//! the warped-product metric dr^2 + phi(r)^2 (du^2 + sin^2(u) dv^2) with
//! phi the warp factor of the space form. The flow moves each point with
//! normal speed F = G/H = k1 k2 / (k1 + k2); on a graph this becomes
//! d(rho)/dt = -F v with v = sqrt(1 + rho_u^2 / phi^2).
//!
//! For a radial graph the principal directions are the meridian and the
//! rotation orbit, with
//!
//! ```text
//! k_m = (-phi rho_uu + phi^2 phi' + 2 phi' rho_u^2) / W^3
//! k_r = (phi' - rho_u cot(u) / phi) / W,          W^2 = phi^2 + rho_u^2
//! ```
//!
//! (phi, phi' at rho(u); at the poles rho_u cot(u) -> rho_uu and the two
//! curvatures coincide). These formulas are validated against the sphere
//! closed forms and the Gauss-Bonnet identity int(k1 k2) = 4 pi - a S,
//! which holds with equality in constant curvature.

use crate::numerics::{ode_advance, NumericsError};
use crate::profiles::{self, SpaceForm};
use crate::qiter;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("surface not strictly convex at node {node} (u = {u}): k_m = {k_m}, k_r = {k_r}")]
    NotConvex { node: usize, u: f64, k_m: f64, k_r: f64 },
    #[error("mean curvature nonpositive at node {node}; harmonic mean speed undefined")]
    SpeedUndefined { node: usize },
    #[error("stability gate violated: dt = {dt} exceeds {dt_max}; reduce the time step")]
    StabilityGate { dt: f64, dt_max: f64 },
    #[error("surface collapsed: t = {t} is at or past the collapse time T = {collapse}")]
    Collapsed { t: f64, collapse: f64 },
    #[error("flow step failed at t = {t}: {source}")]
    Step {
        t: f64,
        #[source]
        source: Box<FlowError>,
        partial: Box<FlowTrace>,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Convex surface of revolution given as a radial graph over the polar
/// angle. The grid is uniform on [0, pi] including both endpoints.
#[derive(Debug, Clone)]
pub struct AxisymmetricSurface {
    sf: SpaceForm,
    rhos: Vec<f64>,
}

/// Integral measures of one surface.
#[derive(Debug, Clone, Copy)]
pub struct GeometricMeasures {
    /// Surface area.
    pub s: f64,
    /// Enclosed volume.
    pub v: f64,
    /// Total mean curvature, H = trace II.
    pub m: f64,
    /// Total Gauss-Kronecker curvature.
    pub tot_g: f64,
}

/// Pointwise data computed once per surface evaluation.
struct NodeGeometry {
    k_m: Vec<f64>,
    k_r: Vec<f64>,
    /// graph-to-normal speed factor v = W / phi
    v: Vec<f64>,
    /// area element weight W * phi * sin(u)
    weight: Vec<f64>,
}

impl AxisymmetricSurface {
    /// Build from ordinates; validates positivity and strict convexity.
    pub fn new(sf: SpaceForm, rhos: Vec<f64>) -> Result<Self> {
        if rhos.len() < 64 {
            return Err(FlowError::Config(format!(
                "need at least 64 grid nodes, got {}",
                rhos.len()
            )));
        }
        if let Some((node, &r)) = rhos.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(FlowError::Config(format!("rho must be positive, got {r} at node {node}")));
        }
        let surf = Self { sf, rhos };
        surf.geometry()?; // convexity check
        Ok(surf)
    }

    pub fn n(&self) -> usize {
        self.rhos.len()
    }

    pub fn h(&self) -> f64 {
        PI / (self.n() - 1) as f64
    }

    pub fn space_form(&self) -> SpaceForm {
        self.sf
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn us(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n()).map(|j| j as f64 * h).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.rhos.iter().cloned().fold(0.0, f64::max)
    }

    /// CSV with columns u, rho.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,rho\n");
        let h = self.h();
        for (j, r) in self.rhos.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", j as f64 * h, r));
        }
        out
    }

    fn geometry(&self) -> Result<NodeGeometry> {
        geometry_of(self.sf, &self.rhos).map_err(|e| match e {
            GeomFailure::NotConvex { node, k_m, k_r } => {
                FlowError::NotConvex { node, u: node as f64 * self.h(), k_m, k_r }
            }
            GeomFailure::NonFinite { node } => FlowError::Numerics(NumericsError::NonFinite {
                x: node as f64 * self.h(),
                value: f64::NAN,
            }),
        })
    }
}

enum GeomFailure {
    NotConvex { node: usize, k_m: f64, k_r: f64 },
    NonFinite { node: usize },
}

/// Fourth-order first and second u-derivatives with ghost-node reflection
/// (rho is even about both poles, so rho' = 0 there by construction).
fn derivatives(rhos: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rhos.len();
    let at = |j: isize| -> f64 {
        // reflect across u = 0 and u = pi
        let m = (n - 1) as isize;
        let j = if j < 0 { -j } else if j > m { 2 * m - j } else { j };
        rhos[j as usize]
    };
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    for j in 0..n as isize {
        let (m2, m1, p1, p2) = (at(j - 2), at(j - 1), at(j + 1), at(j + 2));
        let c = rhos[j as usize];
        d1.push((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h));
        d2.push((-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h));
    }
    (d1, d2)
}

fn geometry_of(sf: SpaceForm, rhos: &[f64]) -> std::result::Result<NodeGeometry, GeomFailure> {
    let n = rhos.len();
    let h = PI / (n - 1) as f64;
    let (d1, d2) = derivatives(rhos, h);
    let mut k_m = Vec::with_capacity(n);
    let mut k_r = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for j in 0..n {
        let u = j as f64 * h;
        let rho = rhos[j];
        let phi = profiles::warp(rho, sf);
        let dphi = profiles::warp_deriv(rho, sf);
        let (ru, ruu) = (d1[j], d2[j]);
        let w2 = phi * phi + ru * ru;
        let w = w2.sqrt();
        let km = (-phi * ruu + phi * phi * dphi + 2.0 * dphi * ru * ru) / (w * w2);
        let kr = if j == 0 || j == n - 1 {
            // rho_u cot(u) -> rho_uu at the poles
            (dphi - ruu / phi) / w
        } else {
            (dphi - ru * (u.cos() / u.sin()) / phi) / w
        };
        if !km.is_finite() || !kr.is_finite() {
            return Err(GeomFailure::NonFinite { node: j });
        }
        if km <= 0.0 || kr <= 0.0 {
            return Err(GeomFailure::NotConvex { node: j, k_m: km, k_r: kr });
        }
        k_m.push(km);
        k_r.push(kr);
        v.push(w / phi);
        weight.push(w * phi * u.sin());
    }
    Ok(NodeGeometry { k_m, k_r, v, weight })
}

/// Composite Simpson over the uniform u-grid (with a 3/8 block when the
/// interval count is odd).
fn integrate_u(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let intervals = n - 1;
    let (simpson_end, total) = if intervals % 2 == 0 {
        (n - 1, 0.0)
    } else {
        // 3/8 rule on the last three intervals
        let k = n - 4;
        let tail = 3.0 * h / 8.0
            * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
        (k, tail)
    };
    let mut acc = 0.0;
    let mut j = 0;
    while j + 2 <= simpson_end {
        acc += values[j] + 4.0 * values[j + 1] + values[j + 2];
        j += 2;
    }
    total + acc * h / 3.0
}

/// Geodesic sphere of radius r0 as a flow fixture.
pub fn make_sphere(r0: f64, sf: SpaceForm, n: usize) -> Result<AxisymmetricSurface> {
    if !(r0 > 0.0) {
        return Err(FlowError::Config(format!("radius must be positive, got {r0}")));
    }
    AxisymmetricSurface::new(sf, vec![r0; n])
}

fn legendre(mode: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if mode == 0 {
        return p0;
    }
    for k in 1..mode {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Sphere perturbed by a Legendre mode: rho(u) = r0 (1 + eps P_mode(cos u)).
/// Fails if the perturbation breaks strict convexity.
pub fn make_perturbed_sphere(
    r0: f64,
    eps: f64,
    mode: usize,
    sf: SpaceForm,
    n: usize,
) -> Result<AxisymmetricSurface> {
    if !(r0 > 0.0) {
        return Err(FlowError::Config(format!("radius must be positive, got {r0}")));
    }
    if mode < 2 {
        return Err(FlowError::Config("perturbation mode must be >= 2".into()));
    }
    let h = PI / (n - 1) as f64;
    let rhos = (0..n)
        .map(|j| r0 * (1.0 + eps * legendre(mode, (j as f64 * h).cos())))
        .collect();
    AxisymmetricSurface::new(sf, rhos)
}

/// Principal curvatures (meridian, rotational) at every node.
pub fn principal_curvatures(surf: &AxisymmetricSurface) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = surf.geometry()?;
    Ok((g.k_m, g.k_r))
}

/// Integral measures S, V, M, total Gauss-Kronecker curvature.
pub fn measure(surf: &AxisymmetricSurface) -> Result<GeometricMeasures> {
    let g = surf.geometry()?;
    Ok(measure_with(surf, &g))
}

fn measure_with(surf: &AxisymmetricSurface, g: &NodeGeometry) -> GeometricMeasures {
    let n = surf.n();
    let h = surf.h();
    let sf = surf.sf;
    let mut area_i = Vec::with_capacity(n);
    let mut tmc_i = Vec::with_capacity(n);
    let mut gk_i = Vec::with_capacity(n);
    let mut vol_i = Vec::with_capacity(n);
    for j in 0..n {
        let w = g.weight[j];
        area_i.push(w);
        tmc_i.push((g.k_m[j] + g.k_r[j]) * w);
        gk_i.push(g.k_m[j] * g.k_r[j] * w);
        vol_i.push(radial_volume_primitive(surf.rhos[j], sf) * (j as f64 * h).sin());
    }
    GeometricMeasures {
        s: 2.0 * PI * integrate_u(&area_i, h),
        v: 2.0 * PI * integrate_u(&vol_i, h),
        m: 2.0 * PI * integrate_u(&tmc_i, h),
        tot_g: 2.0 * PI * integrate_u(&gk_i, h),
    }
}

/// int_0^rho phi(r)^2 dr in closed form.
fn radial_volume_primitive(rho: f64, sf: SpaceForm) -> f64 {
    if sf.is_euclidean() {
        return rho * rho * rho / 3.0;
    }
    // (sinh(s rho) cosh(s rho) / s - rho) / (2 s^2); reuse the series-safe
    // sphere volume: V(rho) = 4 pi * primitive
    profiles::sphere_volume(rho, sf) / (4.0 * PI)
}

/// Pointwise harmonic mean curvature speed F = k1 k2 / (k1 + k2).
pub fn hmcf_speed(surf: &AxisymmetricSurface) -> Result<Vec<f64>> {
    let g = surf.geometry()?;
    speeds_of(&g).map_err(|node| FlowError::SpeedUndefined { node })
}

fn speeds_of(g: &NodeGeometry) -> std::result::Result<Vec<f64>, usize> {
    g.k_m
        .iter()
        .zip(&g.k_r)
        .enumerate()
        .map(|(j, (&km, &kr))| {
            let h = km + kr;
            if h <= 0.0 {
                Err(j)
            } else {
                Ok(km * kr / h)
            }
        })
        .collect()
}

/// Largest admissible time step for the current surface: the explicit
/// scheme is gated by the linearized diffusivity of the graph speed,
/// dt <= 0.5 h^2 / max_j D_j with D = v (phi / W^3) k_r^2 / (k_m + k_r)^2.
pub fn stability_dt_max(surf: &AxisymmetricSurface) -> Result<f64> {
    let g = surf.geometry()?;
    Ok(stability_dt_max_with(surf, &g))
}

fn stability_dt_max_with(surf: &AxisymmetricSurface, g: &NodeGeometry) -> f64 {
    let h = surf.h();
    let mut d_max = 0.0f64;
    for j in 0..surf.n() {
        let phi = profiles::warp(surf.rhos[j], surf.sf);
        let w = g.v[j] * phi; // W = v phi
        let ratio = g.k_r[j] / (g.k_m[j] + g.k_r[j]);
        let d = g.v[j] * phi / (w * w * w) * ratio * ratio;
        d_max = d_max.max(d);
    }
    0.5 * h * h / d_max
}

/// One explicit RK4 step of d(rho)/dt = -F v. The stability gate is checked
/// on the incoming surface; the result is re-validated for convexity.
pub fn hmcf_step(surf: &AxisymmetricSurface, dt: f64) -> Result<AxisymmetricSurface> {
    if dt == 0.0 {
        return Ok(surf.clone());
    }
    let g = surf.geometry()?;
    let dt_max = stability_dt_max_with(surf, &g);
    if dt > dt_max {
        return Err(FlowError::StabilityGate { dt, dt_max });
    }
    let sf = surf.sf;
    let n = surf.n();
    let rhs = |_t: f64, state: &[f64]| -> Vec<f64> {
        match geometry_of(sf, state) {
            Ok(g) => match speeds_of(&g) {
                Ok(f) => f.iter().zip(&g.v).map(|(f, v)| -f * v).collect(),
                Err(_) => vec![f64::NAN; n],
            },
            Err(_) => vec![f64::NAN; n],
        }
    };
    let next = ode_advance(rhs, &surf.rhos, 0.0, dt).map_err(|e| match e {
        // NaN sentinel: a Runge-Kutta stage lost convexity
        NumericsError::NonFinite { .. } => FlowError::NotConvex {
            node: 0,
            u: 0.0,
            k_m: f64::NAN,
            k_r: f64::NAN,
        },
        other => FlowError::Numerics(other),
    })?;
    AxisymmetricSurface::new(sf, next)
}

/// Exact radius of the shrinking geodesic sphere under harmonic mean
/// curvature flow: cosh(s r(t)) = cosh(s r0) exp(a t / 2) for a < 0, and
/// r(t) = sqrt(r0^2 - t) for a = 0.
pub fn sphere_flow_exact(r0: f64, sf: SpaceForm, t: f64) -> Result<f64> {
    if sf.is_euclidean() {
        let collapse = r0 * r0;
        if t >= collapse {
            return Err(FlowError::Collapsed { t, collapse });
        }
        return Ok((r0 * r0 - t).sqrt());
    }
    let s = sf.s();
    let collapse = -2.0 / sf.a() * (s * r0).cosh().ln();
    let arg = (s * r0).cosh() * (sf.a() * t / 2.0).exp();
    if t >= collapse || arg <= 1.0 {
        return Err(FlowError::Collapsed { t, collapse });
    }
    Ok(arg.acosh() / s)
}

/// Collapse time of the sphere flow.
pub fn sphere_collapse_time(r0: f64, sf: SpaceForm) -> f64 {
    if sf.is_euclidean() {
        r0 * r0
    } else {
        -2.0 / sf.a() * (sf.s() * r0).cosh().ln()
    }
}

/// Flow run parameters.
#[derive(Debug, Clone, Copy)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Terminate cleanly once max rho falls below this.
    pub stop_radius: f64,
    pub record_every: usize,
    pub n_grid: usize,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_max > 0.0) || !(self.stop_radius > 0.0) {
            return Err(FlowError::Config("dt, t_max, stop_radius must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(FlowError::Config("record_every must be positive".into()));
        }
        if self.n_grid < 64 {
            return Err(FlowError::Config("n_grid must be at least 64".into()));
        }
        Ok(())
    }
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { dt: 1e-4, t_max: 0.4, stop_radius: 0.05, record_every: 100, n_grid: 256 }
    }
}

/// One recorded sample along a flow.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowRecord {
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "totG")]
    pub tot_g: f64,
    pub phi1: f64,
    #[serde(rename = "phiInf")]
    pub phi_inf: f64,
    /// |dS/dt + totG| over the interval ending here (0 on the first record).
    #[serde(rename = "dS_residual")]
    pub ds_residual: f64,
    /// |dV/dt + int F dmu| over the interval ending here.
    #[serde(rename = "dV_residual")]
    pub dv_residual: f64,
    pub kappa_min: f64,
    #[serde(skip)]
    pub speed_integral: f64,
    #[serde(skip)]
    pub max_rho: f64,
}

/// Time series of measures and auxiliary functions along one flow run.
#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub a: f64,
    pub dt: f64,
    pub h: f64,
    pub records: Vec<FlowRecord>,
}

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,S,V,M,totG,phi1,phiInf,dS_residual,dV_residual,kappa_min\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t,
                r.s,
                r.v,
                r.m,
                r.tot_g,
                r.phi1,
                r.phi_inf,
                r.ds_residual,
                r.dv_residual,
                r.kappa_min
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization")
    }
}

fn make_record(
    surf: &AxisymmetricSurface,
    t: f64,
    prev: Option<&FlowRecord>,
) -> Result<FlowRecord> {
    let g = surf.geometry()?;
    let meas = measure_with(surf, &g);
    let sf = surf.sf;
    let a = sf.a();
    let base = meas.m * meas.m - 16.0 * PI * meas.s + 2.0 * a * meas.s * meas.s;
    let phi1 = base - qiter::p1(meas.v, sf)?;
    let eta_v = profiles::eta(meas.v, sf)?;
    let phi_inf = base + 2.0 * a * eta_v * eta_v;
    let speeds = speeds_of(&g).map_err(|node| FlowError::SpeedUndefined { node })?;
    let h = surf.h();
    let fs: Vec<f64> = speeds.iter().zip(&g.weight).map(|(f, w)| f * w).collect();
    let speed_integral = 2.0 * PI * integrate_u(&fs, h);
    let kappa_min = g
        .k_m
        .iter()
        .chain(&g.k_r)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let (ds_residual, dv_residual) = match prev {
        None => (0.0, 0.0),
        Some(p) => {
            let dtr = t - p.t;
            let ds = (meas.s - p.s) / dtr + 0.5 * (meas.tot_g + p.tot_g);
            let dv = (meas.v - p.v) / dtr + 0.5 * (speed_integral + p.speed_integral);
            (ds.abs(), dv.abs())
        }
    };
    Ok(FlowRecord {
        t,
        s: meas.s,
        v: meas.v,
        m: meas.m,
        tot_g: meas.tot_g,
        phi1,
        phi_inf,
        ds_residual,
        dv_residual,
        kappa_min,
        speed_integral,
        max_rho: surf.max_radius(),
    })
}

/// Run the flow until t_max, stop_radius, or failure. On a step failure the
/// partial trace is attached to the error.
pub fn run_flow(surf: &AxisymmetricSurface, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let mut trace =
        FlowTrace { a: surf.sf.a(), dt: cfg.dt, h: surf.h(), records: Vec::new() };
    let mut current = surf.clone();
    let mut t = 0.0;
    let first = make_record(&current, t, None)?;
    trace.records.push(first);

    let n_steps = (cfg.t_max / cfg.dt).round() as usize;
    for step in 1..=n_steps {
        match hmcf_step(&current, cfg.dt) {
            Ok(next) => current = next,
            Err(e) => {
                return Err(FlowError::Step {
                    t,
                    source: Box::new(e),
                    partial: Box::new(trace),
                });
            }
        }
        t = step as f64 * cfg.dt;
        let should_record = step % cfg.record_every == 0 || step == n_steps;
        let stopping = current.max_radius() < cfg.stop_radius;
        if should_record || stopping {
            let rec = make_record(&current, t, trace.records.last())?;
            trace.records.push(rec);
        }
        if stopping {
            break;
        }
    }
    Ok(trace)
}

/// First-variation residuals of a small outward normal offset:
/// dS/d(eps) = M and dV/d(eps) = S.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OffsetReport {
    pub ds_rel: f64,
    pub dv_rel: f64,
}

pub fn normal_offset_check(surf: &AxisymmetricSurface, eps: f64) -> Result<OffsetReport> {
    let g = surf.geometry()?;
    let base = measure_with(surf, &g);
    let offset_rhos: Vec<f64> =
        surf.rhos.iter().zip(&g.v).map(|(r, v)| r + eps * v).collect();
    let offset = AxisymmetricSurface::new(surf.sf, offset_rhos)?;
    let out = measure(&offset)?;
    Ok(OffsetReport {
        ds_rel: ((out.s - base.s) / eps - base.m).abs() / base.m,
        dv_rel: ((out.v - base.v) / eps - base.s).abs() / base.s,
    })
}

/// Pass/fail audit of the monotone quantities along a recorded trace.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Largest upward jump of phi1 between consecutive records.
    pub phi1_max_rise: f64,
    pub phi_inf_max_rise: f64,
    /// Discretization tolerance 1e-3 |phi(0)| + 10 (dt + h^2) M(0)^2.
    pub tolerance_phi1: f64,
    pub tolerance_phi_inf: f64,
    /// Largest upward jump of the unsquared variant of phi_inf (with
    /// 2 a eta(V) in place of 2 a eta(V)^2). Monitored only; no
    /// monotonicity is asserted for it.
    pub phi_inf_linear_max_rise: f64,
    pub max_ds_residual_rel: f64,
    pub max_dv_residual_rel: f64,
    pub max_gauss_bonnet_rel: f64,
    pub kappa_min: f64,
    /// Worst violation of M(t) >= sharp bound - 1e-3 M(t).
    pub sharp_bound_worst: f64,
    /// Worst violation of S(t) >= eta(V(t)) - 1e-6.
    pub feasibility_worst: f64,
    pub pass: bool,
}

pub fn monotone_audit(trace: &FlowTrace) -> Result<AuditReport> {
    if trace.records.len() < 3 {
        return Err(FlowError::Config("audit needs at least 3 records".into()));
    }
    let sf = SpaceForm::new(trace.a).map_err(FlowError::Numerics)?;
    let r0 = &trace.records[0];
    let scale = 10.0 * (trace.dt + trace.h * trace.h) * r0.m * r0.m;
    let tolerance_phi1 = 1e-3 * r0.phi1.abs() + scale;
    let tolerance_phi_inf = 1e-3 * r0.phi_inf.abs() + scale;

    let mut phi1_max_rise = 0.0f64;
    let mut phi_inf_max_rise = 0.0f64;
    let mut phi_inf_linear_max_rise = 0.0f64;
    let linear = |r: &FlowRecord| -> Result<f64> {
        let e = profiles::eta(r.v, sf)?;
        // phi_inf stores base + 2 a eta^2; swap the last term for 2 a eta
        Ok(r.phi_inf - 2.0 * sf.a() * e * e + 2.0 * sf.a() * e)
    };
    for w in trace.records.windows(2) {
        phi1_max_rise = phi1_max_rise.max(w[1].phi1 - w[0].phi1);
        phi_inf_max_rise = phi_inf_max_rise.max(w[1].phi_inf - w[0].phi_inf);
        phi_inf_linear_max_rise = phi_inf_linear_max_rise.max(linear(&w[1])? - linear(&w[0])?);
    }

    let mut max_ds = 0.0f64;
    let mut max_dv = 0.0f64;
    let mut max_gb = 0.0f64;
    let mut kappa_min = f64::INFINITY;
    let mut sharp_worst = 0.0f64;
    let mut feas_worst = 0.0f64;
    for (i, r) in trace.records.iter().enumerate() {
        let gb_exact = 4.0 * PI - sf.a() * r.s;
        max_gb = max_gb.max((r.tot_g - gb_exact).abs() / gb_exact);
        kappa_min = kappa_min.min(r.kappa_min);
        if i > 0 {
            max_ds = max_ds.max(r.ds_residual / r.tot_g);
            max_dv = max_dv.max(r.dv_residual / r.speed_integral);
        }
        let sharp = crate::bounds::bound_sharp(r.s, r.v, sf)?;
        sharp_worst = sharp_worst.max(sharp - 1e-3 * r.m - r.m);
        let eta_v = profiles::eta(r.v, sf)?;
        feas_worst = feas_worst.max(eta_v - 1e-6 - r.s);
    }

    let pass = phi1_max_rise <= tolerance_phi1
        && phi_inf_max_rise <= tolerance_phi_inf
        && max_ds <= 2e-3
        && max_dv <= 2e-3
        && max_gb <= 1e-6
        && kappa_min > 0.0
        && sharp_worst <= 0.0
        && feas_worst <= 0.0;

    Ok(AuditReport {
        phi1_max_rise,
        phi_inf_max_rise,
        tolerance_phi1,
        tolerance_phi_inf,
        phi_inf_linear_max_rise,
        max_ds_residual_rel: max_ds,
        max_dv_residual_rel: max_dv,
        max_gauss_bonnet_rel: max_gb,
        kappa_min,
        sharp_bound_worst: sharp_worst,
        feasibility_worst: feas_worst,
        pass,
    })
}
