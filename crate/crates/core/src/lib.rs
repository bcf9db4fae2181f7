//! Geodesics of meromorphic connections on the Riemann sphere and of
//! holomorphic connections on complex tori.
//!
//! The library is organized around a small pipeline:
//!
//! * [`expr`] parses a textual rational function into a normalized
//!   [`rational::RationalForm`], the coefficient `R` of a 1-form `R dz`.
//! * [`rational`] provides complex polynomial arithmetic, simultaneous root
//!   finding and residue extraction by contour quadrature.
//! * [`sphere`] models a connection on the sphere through the two standard
//!   charts, including the induced form in the chart `w = 1/z` and the
//!   residue at infinity.
//! * [`integrate`] continues geodesics numerically with an embedded 5(4)
//!   Runge-Kutta pair, conserved-quantity monitoring, chart switching and
//!   terminal-event detection.
//! * [`classify`] analyzes traces: self-intersections, closure, omega-limit
//!   verdicts, external angles and residue-identity validators.
//! * [`torus`] evaluates the exact geodesics of constant connections on a
//!   complex torus and classifies their asymptotics completely.

pub mod classify;
pub mod expr;
pub mod integrate;
pub mod json;
pub mod rational;
pub mod rng;
pub mod sphere;
pub mod torus;

pub use num_complex::Complex64;
