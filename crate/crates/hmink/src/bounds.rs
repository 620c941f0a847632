//! Lower bounds for the total mean curvature M of a closed convex surface
//! in terms of its area S, enclosed volume V and the ambient curvature a,
//! together with the flat double-disk counterexample to the Santalo
//! conjecture.
//!
//! With eta the isoperimetric profile and xi the total-mean-curvature
//! profile of H^3(a):
//!
//! * Euclidean (Minkowski):      M >= sqrt(16 pi S)
//! * Santalo (conjectured, false): M >= sqrt(16 pi S - 4 a S^2)
//! * Ghomi-Spruck:               M >= sqrt(16 pi S - 2 a S^2)
//! * sharp:                      M >= sqrt(16 pi S - 2 a S^2 - 2 a eta(V)^2)
//! * BGL (a = -1 only):          M >= sqrt(S) sqrt(S + 4 pi)
//!                                    + 4 pi arcsinh(sqrt(S / 4 pi)) + 2 V
//! * profile:                    M >= xi(V)
//! * Gallego-Solanes:            M >= sqrt(-a) S

use crate::numerics::{find_root_bracketed, NumericsError, Result, Tolerance};
use crate::profiles::{self, SpaceForm};
use serde::Serialize;
use std::f64::consts::PI;

/// Area/volume data of a closed surface, optionally with a known total mean
/// curvature (used for concrete surfaces like the double disk).
#[derive(Debug, Clone, Copy)]
pub struct SurfaceData {
    pub s: f64,
    pub v: f64,
    pub m: Option<f64>,
    pub sf: SpaceForm,
}

pub fn bound_euclidean(s: f64) -> f64 {
    (16.0 * PI * s).sqrt()
}

/// The conjectured Santalo bound sqrt(16 pi S - 4 a S^2); equals the total
/// mean curvature of the geodesic sphere with area S, but is false for
/// general convex surfaces (see [`double_disk`]).
pub fn bound_santalo(s: f64, sf: SpaceForm) -> f64 {
    (16.0 * PI * s - 4.0 * sf.a() * s * s).sqrt()
}

pub fn bound_ghomi_spruck(s: f64, sf: SpaceForm) -> f64 {
    (16.0 * PI * s - 2.0 * sf.a() * s * s).sqrt()
}

/// The sharp bound sqrt(16 pi S - 2 a S^2 - 2 a eta(V)^2).
pub fn bound_sharp(s: f64, v: f64, sf: SpaceForm) -> Result<f64> {
    let e = profiles::eta(v, sf)?;
    Ok((16.0 * PI * s - 2.0 * sf.a() * (s * s + e * e)).sqrt())
}

/// The Brendle-Guan-Li bound, stated for the standard hyperbolic space
/// a = -1 only.
pub fn bound_bgl(s: f64, v: f64, sf: SpaceForm) -> Result<f64> {
    if sf.a() != -1.0 {
        return Err(NumericsError::Domain(format!(
            "BGL bound is stated for a = -1 only, got a = {}",
            sf.a()
        )));
    }
    Ok(s.sqrt() * (s + 4.0 * PI).sqrt() + 4.0 * PI * (s / (4.0 * PI)).sqrt().asinh() + 2.0 * v)
}

/// The profile bound M >= xi(V).
pub fn bound_profile(v: f64, sf: SpaceForm) -> Result<f64> {
    profiles::xi(v, sf)
}

pub fn bound_gallego_solanes(s: f64, sf: SpaceForm) -> f64 {
    sf.s() * s
}

/// First quermassintegral A_1 = M - 2V for surfaces in H^3.
pub fn quermass_a1(m: f64, v: f64) -> f64 {
    m - 2.0 * v
}

const FEASIBILITY_TOL: f64 = 1e-9;

/// Whether (S, V) can come from a closed surface: S >= eta(V) up to
/// tolerance (Kleiner's isoperimetric inequality).
pub fn feasible(s: f64, v: f64, sf: SpaceForm) -> Result<bool> {
    Ok(s >= profiles::eta(v, sf)? - FEASIBILITY_TOL)
}

/// All bounds evaluated at one (S, V, a) triple.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub a: f64,
    pub euclidean: f64,
    pub santalo: f64,
    pub ghomi_spruck: f64,
    pub sharp: f64,
    /// Present only at a = -1.
    pub bgl: Option<f64>,
    pub profile: f64,
    pub gallego_solanes: f64,
    pub feasible: bool,
}

pub fn bounds_report(s: f64, v: f64, sf: SpaceForm) -> Result<BoundsReport> {
    Ok(BoundsReport {
        s,
        v,
        a: sf.a(),
        euclidean: bound_euclidean(s),
        santalo: bound_santalo(s, sf),
        ghomi_spruck: bound_ghomi_spruck(s, sf),
        sharp: bound_sharp(s, v, sf)?,
        bgl: if sf.a() == -1.0 { Some(bound_bgl(s, v, sf)?) } else { None },
        profile: bound_profile(v, sf)?,
        gallego_solanes: bound_gallego_solanes(s, sf),
        feasible: feasible(s, v, sf)?,
    })
}

/// Outcome of comparing the sharp bound F1 against the BGL bound F2 at
/// a = -1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonResult {
    pub f1: f64,
    pub f2: f64,
    pub gap: f64,
    pub equality: bool,
}

/// F1 >= F2 for every feasible (S, V) pair, with equality exactly on the
/// sphere slice S = eta(V).
pub fn compare_sharp_vs_bgl(s: f64, v: f64) -> Result<ComparisonResult> {
    let sf = SpaceForm::hyperbolic();
    let e = profiles::eta(v, sf)?;
    if s < e - FEASIBILITY_TOL {
        return Err(NumericsError::Domain(format!(
            "infeasible pair: S = {s} < eta(V) = {e}; no closed surface realizes it"
        )));
    }
    let f1 = bound_sharp(s, v, sf)?;
    let f2 = bound_bgl(s, v, sf)?;
    Ok(ComparisonResult { f1, f2, gap: f1 - f2, equality: (s - e).abs() <= 1e-8 })
}

/// Edge exterior angle used for the singular total mean curvature of the
/// double disk; the convex-body convention is pi.
pub const DOUBLE_DISK_EDGE_ANGLE: f64 = PI;

/// The flat double disk of geodesic radius rho in H^3(-1): two copies of a
/// hyperbolic disk glued along their boundary circle. Zero volume, area
/// 4 pi (cosh rho - 1), and singular total mean curvature
/// angle * 2 pi sinh(rho) concentrated on the edge.
pub fn double_disk_with_angle(rho: f64, angle: f64) -> SurfaceData {
    let s = 4.0 * PI * (rho.cosh() - 1.0);
    let m = angle * 2.0 * PI * rho.sinh();
    SurfaceData { s, v: 0.0, m: Some(m), sf: SpaceForm::hyperbolic() }
}

pub fn double_disk(rho: f64) -> SurfaceData {
    double_disk_with_angle(rho, DOUBLE_DISK_EDGE_ANGLE)
}

/// The radius rho* at which the double disk starts violating the Santalo
/// bound; analytically cosh(rho*) = pi^2 / (16 - pi^2).
pub fn santalo_violation_threshold() -> Result<f64> {
    let gap = |rho: f64| {
        let d = double_disk(rho);
        d.m.unwrap() - bound_santalo(d.s, d.sf)
    };
    find_root_bracketed(gap, 0.1, 5.0, &Tolerance::new(1e-13, 1e-13, 200)?)
}

/// Sign of M_angle(rho) - santalo(S(rho)) predicted in closed form: with
/// c = cosh(rho) - 1 the difference of squares is
/// 4 pi^2 c [ (angle^2 - 16) c + 2 angle^2 - 16 ], so the disk violates the
/// bound exactly where (angle^2 - 16) c + 2 angle^2 - 16 < 0.
pub fn double_disk_violates_predicted(rho: f64, angle: f64) -> bool {
    let c = rho.cosh() - 1.0;
    (angle * angle - 16.0) * c + 2.0 * angle * angle - 16.0 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const V1: f64 = 5.110932705708289;
    const S1: f64 = 17.355387381771437;
    const M1: f64 = 45.576472051551502;

    fn h3() -> SpaceForm {
        SpaceForm::hyperbolic()
    }

    #[test]
    fn euclidean_bound() {
        assert_eq!(bound_euclidean(0.0), 0.0);
        assert!((bound_euclidean(4.0 * PI) - 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn santalo_is_sphere_tmc() {
        assert_eq!(bound_santalo(0.0, h3()), 0.0);
        assert!((bound_santalo(S1, h3()) - M1).abs() < 1e-9);
        let e = SpaceForm::euclidean();
        assert_eq!(bound_santalo(7.0, e), bound_euclidean(7.0));
    }

    #[test]
    fn ghomi_spruck_values() {
        assert_eq!(bound_ghomi_spruck(0.0, h3()), 0.0);
        assert_eq!(bound_ghomi_spruck(7.0, SpaceForm::euclidean()), bound_euclidean(7.0));
        let expect = (16.0 * PI * S1 + 2.0 * S1 * S1).sqrt();
        assert!((bound_ghomi_spruck(S1, h3()) - expect).abs() < 1e-10);
        assert!((expect - 38.403071001199276).abs() < 1e-9);
    }

    #[test]
    fn sharp_reductions() {
        // V = 0 reduces to Ghomi-Spruck
        assert!((bound_sharp(S1, 0.0, h3()).unwrap() - bound_ghomi_spruck(S1, h3())).abs() < 1e-12);
        // sphere data: eta(V) = S, so sharp = santalo = M
        assert!((bound_sharp(S1, V1, h3()).unwrap() - M1).abs() < 1e-7);
        // a = 0: independent of V
        let e = SpaceForm::euclidean();
        assert_eq!(bound_sharp(7.0, 3.0, e).unwrap(), bound_euclidean(7.0));
    }

    #[test]
    fn bgl_values() {
        assert_eq!(bound_bgl(0.0, 0.0, h3()).unwrap(), 0.0);
        // S = 4 pi, V = 0: 4 pi sqrt(2) + 4 pi arcsinh(1)
        let expect = 4.0 * PI * 2f64.sqrt() + 4.0 * PI * (1.0 + 2f64.sqrt()).ln();
        let got = bound_bgl(4.0 * PI, 0.0, h3()).unwrap();
        assert!((got - expect).abs() < 1e-10);
        assert!((got - 28.847198896828188).abs() < 1e-9);
        // sphere equality case
        assert!((bound_bgl(S1, V1, h3()).unwrap() - M1).abs() < 1e-6);
        // rejected off a = -1
        assert!(bound_bgl(1.0, 0.0, SpaceForm::new(-0.5).unwrap()).is_err());
    }

    #[test]
    fn profile_and_gallego_solanes() {
        assert_eq!(bound_profile(0.0, h3()).unwrap(), 0.0);
        assert!((bound_profile(V1, h3()).unwrap() - M1).abs() / M1 < 1e-9);
        assert!((bound_profile(4.0 * PI / 3.0, SpaceForm::euclidean()).unwrap() - 8.0 * PI).abs() < 1e-9);
        assert_eq!(bound_gallego_solanes(S1, SpaceForm::euclidean()), 0.0);
        assert!((bound_gallego_solanes(S1, h3()) - S1).abs() < 1e-14);
    }

    #[test]
    fn quermass_values() {
        assert_eq!(quermass_a1(0.0, 0.0), 0.0);
        assert!((quermass_a1(M1, V1) - 35.354606640134924).abs() < 1e-9);
        // (eq A_1 form) equals bgl minus 2V
        let b = bound_bgl(S1, V1, h3()).unwrap();
        assert!((quermass_a1(b, V1) - (b - 2.0 * V1)).abs() < 1e-14);
    }

    #[test]
    fn comparison_sphere_equality() {
        let c = compare_sharp_vs_bgl(S1, V1).unwrap();
        assert!(c.gap.abs() <= 1e-6);
        assert!(c.equality);
    }

    #[test]
    fn comparison_strict_gap_off_sphere() {
        let c = compare_sharp_vs_bgl(4.0 * PI, 0.0).unwrap();
        let f1_expect = (96.0 * PI * PI).sqrt();
        assert!((c.f1 - f1_expect).abs() < 1e-10);
        assert!((c.f1 - 30.781195923884738).abs() < 1e-9);
        assert!((c.f2 - 28.847198896828188).abs() < 1e-9);
        assert!(c.gap > 1.9 && c.gap < 2.0);
        assert!(!c.equality);
    }

    #[test]
    fn comparison_degenerate_and_infeasible() {
        let c = compare_sharp_vs_bgl(0.0, 0.0).unwrap();
        assert_eq!(c.f1, 0.0);
        assert_eq!(c.f2, 0.0);
        assert!(compare_sharp_vs_bgl(1.0, 50.0).is_err());
    }

    #[test]
    fn double_disk_values() {
        // rho -> 0+: degenerate
        let d = double_disk(1e-9);
        assert!(d.s < 1e-8 && d.m.unwrap() < 1e-7);
        // rho = 2: violates Santalo (oracle: S = 34.710775, M = 71.591355,
        // santalo = 81.019167)
        let d = double_disk(2.0);
        assert!((d.s - 34.710774763542874).abs() < 1e-10);
        assert!((d.m.unwrap() - 71.591354886847365).abs() < 1e-10);
        let b = bound_santalo(d.s, d.sf);
        assert!((b - 81.019166736658802).abs() < 1e-9);
        assert!(d.m.unwrap() < b, "Santalo violated at rho = 2");
        // rho = 0.5: no violation (M = 10.286009 > 9.534368)
        let d = double_disk(0.5);
        assert!((d.m.unwrap() - 10.286009040976186).abs() < 1e-10);
        let b = bound_santalo(d.s, d.sf);
        assert!((b - 9.534368061249721).abs() < 1e-9);
        assert!(d.m.unwrap() > b);
    }

    #[test]
    fn violation_threshold() {
        let rho = santalo_violation_threshold().unwrap();
        let target = PI * PI / (16.0 - PI * PI);
        assert!((rho.cosh() - target).abs() < 1e-9, "cosh rho* = {}", rho.cosh());
        assert!((rho - 1.0548906083974096).abs() < 1e-8);
        // just above violates, just below does not
        let above = double_disk(rho + 0.01);
        assert!(above.m.unwrap() < bound_santalo(above.s, above.sf));
        let below = double_disk(rho - 0.01);
        assert!(below.m.unwrap() > bound_santalo(below.s, below.sf));
    }

    #[test]
    fn violation_single_sign_change() {
        let rho_star = santalo_violation_threshold().unwrap();
        let mut flips = 0;
        let mut prev = f64::NAN;
        for k in 1..=1000 {
            let rho = 10.0 * k as f64 / 1000.0;
            let d = double_disk(rho);
            let sign = (d.m.unwrap() - bound_santalo(d.s, d.sf)).signum();
            if !prev.is_nan() && sign != prev {
                flips += 1;
                assert!((rho - rho_star).abs() < 0.011);
            }
            prev = sign;
            // the non-sharp Gallego-Solanes bound always survives
            assert!(d.m.unwrap() >= bound_gallego_solanes(d.s, d.sf));
        }
        assert_eq!(flips, 1);
    }

    #[test]
    fn edge_angle_robustness() {
        // sampled sign of M_angle - santalo matches the closed-form
        // prediction for each edge-angle convention
        for &angle in &[PI / 2.0, PI, 2.0 * PI] {
            for k in 1..=500 {
                let rho = 10.0 * k as f64 / 500.0;
                let d = double_disk_with_angle(rho, angle);
                let violated = d.m.unwrap() < bound_santalo(d.s, d.sf);
                assert_eq!(
                    violated,
                    double_disk_violates_predicted(rho, angle),
                    "angle={angle} rho={rho}"
                );
            }
        }
        // angle pi/2 violates everywhere, pi only above the threshold,
        // 2 pi never
        assert!(double_disk_violates_predicted(0.1, PI / 2.0));
        assert!(!double_disk_violates_predicted(0.1, PI));
        assert!(double_disk_violates_predicted(3.0, PI));
        assert!(!double_disk_violates_predicted(8.0, 2.0 * PI));
    }

    #[test]
    fn ordering_chain() {
        for &(s_extra, v) in &[(0.5, 1.0), (10.0, 5.0), (3.0, 20.0)] {
            let e = profiles::eta(v, h3()).unwrap();
            let s = e + s_extra;
            let b_e = bound_euclidean(s);
            let b_gs = bound_ghomi_spruck(s, h3());
            let b_sharp = bound_sharp(s, v, h3()).unwrap();
            let b_san = bound_santalo(s, h3());
            assert!(b_e < b_gs && b_gs < b_sharp);
            assert!(b_sharp <= b_san + 1e-12);
        }
    }

    #[test]
    fn report_json_keys() {
        let rep = bounds_report(S1, V1, h3()).unwrap();
        let json: serde_json::Value = serde_json::to_value(&rep).unwrap();
        for key in
            ["S", "V", "a", "euclidean", "santalo", "ghomi_spruck", "sharp", "bgl", "profile", "gallego_solanes", "feasible"]
        {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert!(json["feasible"].as_bool().unwrap());
        // bgl null away from a = -1
        let rep = bounds_report(1.0, 0.0, SpaceForm::euclidean()).unwrap();
        let json: serde_json::Value = serde_json::to_value(&rep).unwrap();
        assert!(json["bgl"].is_null());
    }
}
