//! Numerical toolkit for total-mean-curvature geometry in the constant
//! curvature model spaces H^3(a), a <= 0.
//!
//! The crate has five layers:
//!
//! * [`numerics`] — rootfinding, adaptive quadrature, grid integration and
//!   explicit ODE stepping shared by everything else.
//! * [`profiles`] — closed-form geometry of geodesic spheres in H^3(a) and
//!   the isoperimetric / total-mean-curvature profile functions eta and xi.
//! * [`qiter`] — the monotone fixed-point iteration Q_1, Q_2, ... that
//!   converges to xi, with convergence certificates.
//! * [`bounds`] — every total-mean-curvature lower bound handled here
//!   (Euclidean, Santalo, Ghomi-Spruck, the sharp bound, BGL, profile,
//!   Gallego-Solanes), plus the flat double-disk counterexample.
//! * [`flow`] — an axisymmetric harmonic mean curvature flow simulator that
//!   audits the monotone quantities driving the sharp bound.

pub mod bounds;
pub mod flow;
pub mod numerics;
pub mod profiles;
pub mod qiter;
