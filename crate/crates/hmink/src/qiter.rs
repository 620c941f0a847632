//! The fixed-point iteration behind the sharp bound: starting from
//! Q_1(x) = sqrt(16 pi eta(x) - 2 a eta(x)^2), iterate
//!
//! ```text
//! Q_{n+1}(x) = sqrt(16 pi eta(x) - 2 a eta(x)^2 - 4 a int_0^x Q_n)
//! ```
//!
//! For a < 0 this is a monotone operator on [0, xi]; the iterates increase
//! pointwise to the total-mean-curvature profile xi, which is the fixed
//! point (xi^2 + 4 a int_0^x xi = 16 pi eta - 2 a eta^2). For a = 0 the
//! integral term vanishes and the sequence is stationary at xi from n = 1.

use crate::numerics::{
    cumulative_integral_cubic, integrate_adaptive, GridFunction, NumericsError, Result, Tolerance,
};
use crate::profiles::{self, SpaceForm};
use serde::Serialize;
use std::f64::consts::PI;

/// Configuration of one iteration run.
#[derive(Debug, Clone, Copy)]
pub struct IterationConfig {
    pub sf: SpaceForm,
    pub x_max: f64,
    pub n_points: usize,
    pub sup_tol: f64,
    pub max_n: usize,
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0) {
            return Err(NumericsError::Domain("x_max must be positive".into()));
        }
        if self.n_points < 16 {
            return Err(NumericsError::Domain("need at least 16 grid points".into()));
        }
        if !(self.sup_tol > 0.0) {
            return Err(NumericsError::Domain("sup_tol must be positive".into()));
        }
        if self.max_n == 0 {
            return Err(NumericsError::Domain("max_n must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            sf: SpaceForm::hyperbolic(),
            x_max: 50.0,
            n_points: 2001,
            sup_tol: 1e-4,
            max_n: 200,
        }
    }
}

/// Result of [`run_iteration`]: the recorded iterates plus convergence
/// certificates against the independently known limit xi.
#[derive(Debug)]
pub struct IterationReport {
    pub config: IterationConfig,
    pub iterates: Vec<GridFunction>,
    /// sup_x |xi(x) - Q_n(x)| per iterate.
    pub gaps: Vec<f64>,
    /// sup-norm fixed-point residual per iterate.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub n_final: usize,
    /// xi sampled on the iteration grid.
    pub xi: GridFunction,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    a: f64,
    x_max: f64,
    n_points: usize,
    gaps: &'a [f64],
    residuals: &'a [f64],
    converged: bool,
    n_final: usize,
}

impl IterationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ReportJson {
            a: self.config.sf.a(),
            x_max: self.config.x_max,
            n_points: self.config.n_points,
            gaps: &self.gaps,
            residuals: &self.residuals,
            converged: self.converged,
            n_final: self.n_final,
        })
        .expect("report serialization")
    }

    /// CSV with columns x, q1, q2, ..., xi.
    pub fn iterates_csv(&self) -> String {
        let mut out = String::from("x");
        for n in 1..=self.iterates.len() {
            out.push_str(&format!(",q{n}"));
        }
        out.push_str(",xi\n");
        let xs = self.xi.xs();
        for k in 0..xs.len() {
            out.push_str(&format!("{:.16e}", xs[k]));
            for q in &self.iterates {
                out.push_str(&format!(",{:.16e}", q.ys()[k]));
            }
            out.push_str(&format!(",{:.16e}\n", self.xi.ys()[k]));
        }
        out
    }
}

/// Precomputed sphere-radius parametrization of the iteration grid.
///
/// The grid is uniform in the sphere radius r with x_k = V(r_k), so
/// eta(x_k) = S(r_k) and xi(x_k) = M(r_k) are exact and the graded x-grid
/// resolves the x^(1/3) behavior of the profiles at the origin.
struct ProfileGrid {
    xs: Vec<f64>,
    eta: Vec<f64>,
    xi: Vec<f64>,
}

impl ProfileGrid {
    fn build(sf: SpaceForm, x_max: f64, n_points: usize) -> Result<Self> {
        let r_max = profiles::radius_from_volume(x_max, sf)?;
        let n = n_points;
        let mut xs = Vec::with_capacity(n);
        let mut eta = Vec::with_capacity(n);
        let mut xi = Vec::with_capacity(n);
        for k in 0..n {
            let r = r_max * k as f64 / (n - 1) as f64;
            xs.push(profiles::sphere_volume(r, sf));
            eta.push(profiles::sphere_area(r, sf));
            xi.push(profiles::sphere_tmc(r, sf));
        }
        xs[0] = 0.0;
        Ok(Self { xs, eta, xi })
    }
}

/// Q_1(x) = sqrt(16 pi eta(x) - 2 a eta(x)^2).
pub fn q1(x: f64, sf: SpaceForm) -> Result<f64> {
    let e = profiles::eta(x, sf)?;
    Ok(q1_from_eta(e, sf))
}

fn q1_from_eta(eta: f64, sf: SpaceForm) -> f64 {
    (16.0 * PI * eta - 2.0 * sf.a() * eta * eta).sqrt()
}

/// P_1(x) = -4a int_0^x Q_1, by adaptive quadrature in the radius variable
/// (dx = S(r) dr keeps the integrand smooth at the origin).
pub fn p1(x: f64, sf: SpaceForm) -> Result<f64> {
    if sf.is_euclidean() || x == 0.0 {
        return Ok(0.0);
    }
    let r = profiles::radius_from_volume(x, sf)?;
    let tol = Tolerance::new(1e-12, 1e-12, 200)?;
    let integral = integrate_adaptive(
        |t| {
            let s = profiles::sphere_area(t, sf);
            q1_from_eta(s, sf) * s
        },
        0.0,
        r,
        &tol,
    )?;
    Ok(-4.0 * sf.a() * integral)
}

fn eta_on_grid(q: &GridFunction, sf: SpaceForm) -> Result<Vec<f64>> {
    q.xs().iter().map(|&x| profiles::eta(x, sf)).collect()
}

/// Primitive int_0^{x_k} Q dx on the grid of Q, computed in the radius
/// variable: with x = V(r), dx = eta dr, so the integrand Q(x(r)) eta(x(r))
/// is smooth at the origin (Q eta ~ r^3) and the node spacing in r is mild
/// even where the x-grid stretches exponentially. Direct cubic integration
/// in x loses several digits on both ends.
fn cumulative_dx(q: &GridFunction, eta: &[f64], sf: SpaceForm) -> Result<GridFunction> {
    let rs: Vec<f64> = q
        .xs()
        .iter()
        .map(|&x| profiles::radius_from_volume(x, sf))
        .collect::<Result<_>>()?;
    let gs: Vec<f64> = q.ys().iter().zip(eta).map(|(&qv, &e)| qv * e).collect();
    let in_r = GridFunction::new(rs, gs)?;
    let prim = cumulative_integral_cubic(&in_r);
    GridFunction::new(q.xs().to_vec(), prim.ys().to_vec())
}

fn next_q_with_eta(q: &GridFunction, eta: &[f64], sf: SpaceForm) -> Result<GridFunction> {
    let a = sf.a();
    let primitive = cumulative_dx(q, eta, sf)?;
    let ys: Vec<f64> = eta
        .iter()
        .zip(primitive.ys())
        .map(|(&e, &p)| {
            let radicand = 16.0 * PI * e - 2.0 * a * e * e - 4.0 * a * p;
            if radicand < 0.0 {
                Err(NumericsError::Domain(format!(
                    "negative radicand {radicand}: corrupted iteration state"
                )))
            } else {
                Ok(radicand.sqrt())
            }
        })
        .collect::<Result<_>>()?;
    GridFunction::new(q.xs().to_vec(), ys)
}

/// One application of the iteration operator on a sampled Q.
pub fn next_q(q: &GridFunction, sf: SpaceForm) -> Result<GridFunction> {
    let eta = eta_on_grid(q, sf)?;
    next_q_with_eta(q, &eta, sf)
}

/// P_n(x) = -4a int_0^x Q_n on the grid of Q.
pub fn p_from_q(q: &GridFunction, sf: SpaceForm) -> Result<GridFunction> {
    let eta = eta_on_grid(q, sf)?;
    let primitive = cumulative_dx(q, &eta, sf)?;
    let ys: Vec<f64> = primitive.ys().iter().map(|&p| -4.0 * sf.a() * p).collect();
    GridFunction::new(q.xs().to_vec(), ys)
}

/// Gridded residual Q^2 + 4a int_0^x Q - (16 pi eta - 2a eta^2); vanishes
/// exactly (up to quadrature) iff Q solves the fixed-point relation.
pub fn fixed_point_residual(q: &GridFunction, sf: SpaceForm) -> Result<GridFunction> {
    let eta = eta_on_grid(q, sf)?;
    fixed_point_residual_with_eta(q, &eta, sf)
}

fn fixed_point_residual_with_eta(
    q: &GridFunction,
    eta: &[f64],
    sf: SpaceForm,
) -> Result<GridFunction> {
    let a = sf.a();
    let primitive = cumulative_dx(q, eta, sf)?;
    let ys: Vec<f64> = q
        .ys()
        .iter()
        .zip(primitive.ys())
        .zip(eta)
        .map(|((&qv, &p), &e)| qv * qv + 4.0 * a * p - (16.0 * PI * e - 2.0 * a * e * e))
        .collect();
    GridFunction::new(q.xs().to_vec(), ys)
}

fn sup_abs(g: &GridFunction) -> f64 {
    g.ys().iter().map(|y| y.abs()).fold(0.0, f64::max)
}

/// Run the iteration from Q_1 until the sup-norm gap to xi drops below
/// `sup_tol` or `max_n` iterates have been produced.
pub fn run_iteration(cfg: &IterationConfig) -> Result<IterationReport> {
    cfg.validate()?;
    let grid = ProfileGrid::build(cfg.sf, cfg.x_max, cfg.n_points)?;
    let xi = GridFunction::new(grid.xs.clone(), grid.xi.clone())?;
    let q1_ys: Vec<f64> = grid.eta.iter().map(|&e| q1_from_eta(e, cfg.sf)).collect();
    let mut q = GridFunction::new(grid.xs.clone(), q1_ys)?;

    let mut iterates = Vec::new();
    let mut gaps = Vec::new();
    let mut residuals = Vec::new();
    let mut converged = false;
    loop {
        let gap = xi.sup_distance(&q);
        let residual = sup_abs(&fixed_point_residual_with_eta(&q, &grid.eta, cfg.sf)?);
        iterates.push(q.clone());
        gaps.push(gap);
        residuals.push(residual);
        if gap <= cfg.sup_tol {
            converged = true;
            break;
        }
        if iterates.len() >= cfg.max_n {
            break;
        }
        q = next_q_with_eta(&q, &grid.eta, cfg.sf)?;
    }
    let n_final = iterates.len();
    Ok(IterationReport { config: *cfg, iterates, gaps, residuals, converged, n_final, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{sphere_area, sphere_tmc, sphere_volume};

    const V1: f64 = 5.110932705708289;
    const S1: f64 = 17.355387381771437;
    const M1: f64 = 45.576472051551502;

    fn h3() -> SpaceForm {
        SpaceForm::hyperbolic()
    }

    fn xi_sampled(sf: SpaceForm, x_max: f64, n: usize) -> GridFunction {
        let r_max = profiles::radius_from_volume(x_max, sf).unwrap();
        let mut xs: Vec<f64> = (0..n)
            .map(|k| sphere_volume(r_max * k as f64 / (n - 1) as f64, sf))
            .collect();
        xs[0] = 0.0;
        let ys: Vec<f64> = (0..n)
            .map(|k| sphere_tmc(r_max * k as f64 / (n - 1) as f64, sf))
            .collect();
        GridFunction::new(xs, ys).unwrap()
    }

    #[test]
    fn q1_values() {
        assert_eq!(q1(0.0, h3()).unwrap(), 0.0);
        // q1(V(1)) = sqrt(16 pi S + 2 S^2), strictly below xi = M
        let v = q1(V1, h3()).unwrap();
        let expect = (16.0 * PI * S1 + 2.0 * S1 * S1).sqrt();
        assert!((v - expect).abs() < 1e-8);
        assert!((v - 38.403071001199276).abs() < 1e-8);
        assert!(v < M1);
        // at a = 0, q1 = xi
        let e = SpaceForm::euclidean();
        for k in 1..=10 {
            let x = k as f64;
            assert!((q1(x, e).unwrap() - profiles::xi(x, e).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn xi_is_fixed_point() {
        let xi = xi_sampled(h3(), 50.0, 2001);
        let next = next_q(&xi, h3()).unwrap();
        assert!(xi.sup_distance(&next) < 1e-6);
        let res = fixed_point_residual(&xi, h3()).unwrap();
        let sup = res.ys().iter().map(|y| y.abs()).fold(0.0, f64::max);
        assert!(sup < 1e-6, "sup residual {sup}");
    }

    #[test]
    fn next_q_strictly_between_q1_and_xi() {
        let cfg = IterationConfig { n_points: 2001, ..Default::default() };
        let grid = ProfileGrid::build(cfg.sf, cfg.x_max, cfg.n_points).unwrap();
        let q1g = GridFunction::new(
            grid.xs.clone(),
            grid.eta.iter().map(|&e| q1_from_eta(e, cfg.sf)).collect(),
        )
        .unwrap();
        let q2 = next_q(&q1g, cfg.sf).unwrap();
        // at the grid point nearest V(1)
        let k = grid.xs.iter().position(|&x| x >= V1).unwrap();
        let (lo, hi) = (q1g.ys()[k], grid.xi[k]);
        let mid = q2.ys()[k];
        assert!(mid > lo && mid < hi, "{lo} < {mid} < {hi}");
    }

    #[test]
    fn next_q_independent_of_input_when_euclidean() {
        let e = SpaceForm::euclidean();
        let xs: Vec<f64> = (0..64).map(|k| (k as f64 / 63.0).powi(3) * 10.0).collect();
        let q_zero = GridFunction::new(xs.clone(), vec![0.0; 64]).unwrap();
        let q_big = GridFunction::new(xs.clone(), xs.iter().map(|&x| x + 1.0).collect()).unwrap();
        let a = next_q(&q_zero, e).unwrap();
        let b = next_q(&q_big, e).unwrap();
        assert!(a.sup_distance(&b) < 1e-12);
        for (k, &x) in xs.iter().enumerate() {
            let expect = (16.0 * PI * profiles::eta(x, e).unwrap()).sqrt();
            assert!((a.ys()[k] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn p_from_q_at_xi() {
        // int_0^x xi = eta^2 / 2, so P = -4a * eta^2/2 = 2 eta^2 at a = -1
        let xi = xi_sampled(h3(), 50.0, 2001);
        let p = p_from_q(&xi, h3()).unwrap();
        for (k, &x) in xi.xs().iter().enumerate().step_by(100) {
            let e = profiles::eta(x, h3()).unwrap();
            assert!((p.ys()[k] - 2.0 * e * e).abs() <= 1e-5 * (1.0 + 2.0 * e * e), "x={x}");
        }
        // a = 0 and Q = 0 give the zero function
        let efm = SpaceForm::euclidean();
        let z = p_from_q(&xi, efm).unwrap();
        assert!(z.ys().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn p1_matches_grid_primitive() {
        let cfg = IterationConfig::default();
        let grid = ProfileGrid::build(cfg.sf, cfg.x_max, cfg.n_points).unwrap();
        let q1g = GridFunction::new(
            grid.xs.clone(),
            grid.eta.iter().map(|&e| q1_from_eta(e, cfg.sf)).collect(),
        )
        .unwrap();
        let p = p_from_q(&q1g, cfg.sf).unwrap();
        for k in (1..grid.xs.len()).step_by(250) {
            let adaptive = p1(grid.xs[k], cfg.sf).unwrap();
            assert!(
                (adaptive - p.ys()[k]).abs() <= 1e-6 * (1.0 + adaptive),
                "x={} adaptive={} grid={}",
                grid.xs[k],
                adaptive,
                p.ys()[k]
            );
        }
    }

    #[test]
    fn residual_of_zero_function() {
        let xs: Vec<f64> = (0..32).map(|k| k as f64).collect();
        let q = GridFunction::new(xs.clone(), vec![0.0; 32]).unwrap();
        let res = fixed_point_residual(&q, h3()).unwrap();
        for (k, &x) in xs.iter().enumerate() {
            if x > 0.0 {
                assert!(res.ys()[k] < 0.0, "residual must be negative at x={x}");
            }
        }
    }

    #[test]
    fn iteration_converges_hyperbolic() {
        let cfg = IterationConfig::default();
        let rep = run_iteration(&cfg).unwrap();
        assert!(rep.converged);
        assert!(*rep.gaps.last().unwrap() <= cfg.sup_tol);
        // gaps strictly decreasing, iterates pointwise increasing
        assert!(rep.gaps.windows(2).all(|w| w[1] < w[0] + 1e-9));
        for w in rep.iterates.windows(2) {
            for (a, b) in w[0].ys().iter().zip(w[1].ys()) {
                assert!(*b >= *a - 1e-12);
            }
        }
        // bounded above by xi
        for q in &rep.iterates {
            for (qv, xv) in q.ys().iter().zip(rep.xi.ys()) {
                assert!(*qv <= *xv + 1e-6);
            }
        }
    }

    #[test]
    fn iteration_stationary_euclidean() {
        let cfg = IterationConfig { sf: SpaceForm::euclidean(), x_max: 10.0, ..Default::default() };
        let rep = run_iteration(&cfg).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.n_final, 1);
        assert!(rep.gaps[0] < 1e-9);
    }

    #[test]
    fn iteration_forced_early_stop() {
        let cfg = IterationConfig { max_n: 1, ..Default::default() };
        let rep = run_iteration(&cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterates.len(), 1);
    }

    #[test]
    fn derivative_comparison_along_limit() {
        // Q(Q' + 2a) for the final iterate vs xi(xi' + 2a), centered
        // differences in the radius parametrization; both strictly positive
        let cfg = IterationConfig::default();
        let rep = run_iteration(&cfg).unwrap();
        let q = rep.iterates.last().unwrap();
        let n = q.len();
        let r_max = profiles::radius_from_volume(cfg.x_max, cfg.sf).unwrap();
        let h = r_max / (n - 1) as f64;
        let a = cfg.sf.a();
        for k in (1..n - 1).step_by(50) {
            let s_r = sphere_area(r_max * k as f64 / (n - 1) as f64, cfg.sf);
            let dq = (q.ys()[k + 1] - q.ys()[k - 1]) / (2.0 * h) / s_r;
            let dxi = (rep.xi.ys()[k + 1] - rep.xi.ys()[k - 1]) / (2.0 * h) / s_r;
            let lhs = q.ys()[k] * (dq + 2.0 * a);
            let rhs = rep.xi.ys()[k] * (dxi + 2.0 * a);
            assert!(lhs > 0.0 && rhs > 0.0, "positivity at k={k}");
            assert!((lhs - rhs).abs() / rhs.abs() < 1e-3, "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn report_serialization_shapes() {
        let cfg = IterationConfig { x_max: 5.0, n_points: 64, sup_tol: 1e-3, ..Default::default() };
        let rep = run_iteration(&cfg).unwrap();
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(json["a"], -1.0);
        assert_eq!(json["n_points"], 64);
        assert!(json["converged"].as_bool().unwrap());
        let csv = rep.iterates_csv();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("x,q1,"));
        assert!(header.ends_with(",xi"));
        assert_eq!(csv.lines().count(), 65);
    }
}
