//! Numerical laboratory for the geometry and dynamics of flat-waist surfaces
//! of revolution.
//!
//! The library builds model annuli `r(z) = a + b·|z|^(2+k)` whose waist
//! `z = 0` is a closed geodesic with degenerate (order-`k`) curvature
//! contact, and cross-validates several routes to the same objects:
//!
//! * [`surface`] — metric coefficients, Gaussian curvature, quadrature
//!   helpers for the model profiles;
//! * [`geodesics`] — unit-speed geodesic integration with the Clairaut
//!   invariant as exactness certificate, plus two-point shooting distances;
//! * [`busemann`] — Busemann functions and the diagonal Peierls barrier by
//!   quadrature and by horizon limits, with the leading power law;
//! * [`weakkam`] — a discrete Lax-Oleinik solver producing the critical
//!   value, a conjugate pair (u⁻, u⁺) and the grid barrier independently of
//!   the Busemann route;
//! * [`diffusion`] — the twisted Laplacian, its principal eigenpair and the
//!   stationary measure of the twisted Brownian motion;
//! * [`ldp`] — λ-sweeps, large-deviation rate estimates and the polynomial
//!   rate-law comparison;
//! * [`comparison`] — Gauss-Bonnet identities and the angle-comparison
//!   check across curvature-ordered profiles.

pub mod busemann;
pub mod comparison;
pub mod diffusion;
mod error;
pub mod geodesics;
pub mod grid;
pub mod ldp;
pub mod quad;
pub mod surface;
pub mod weakkam;

pub use error::{Error, Result};
