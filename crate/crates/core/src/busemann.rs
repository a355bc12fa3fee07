//! Busemann functions and the diagonal Peierls barrier on the model annuli.
//!
//! Two independent routes to the same function of height:
//!
//! * the closed-form quadrature `B(z) = 2 ∫₀^z sin ψ_a(t) √(1+r'(t)²) dt`
//!   where `ψ_a` is the waist-asymptote angle (`sin ψ_a = √(1-(a/r)²)`).
//!   The `√(1+r'²)` factor converts the height parametrization to meridian
//!   arc length, so the quadrature equals the horizon-limit sum exactly and
//!   not just to leading order;
//! * the horizon limit `b(x) = d(x, γ(T)) - T` with the waist geodesic
//!   `γ` parametrized from the foot of x's meridian, evaluated through the
//!   shooting distance solver.
//!
//! Near the waist `B(z) = C z^(2+k/2) + o(z^(3+k/2))` with
//! `C = 2 √(2b/a) / (2 + k/2)`; `fit_power_law` extracts the exponent.

use crate::error::{Error, Result};
use crate::geodesics::{distance_with, ShootingOpts};
use crate::quad::adaptive_simpson;
use crate::surface::{RevolutionProfile, SurfacePoint};
use serde::{Deserialize, Serialize};

/// Which route produced a barrier curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierMethod {
    Quadrature,
    Limit,
    WeakKam,
}

/// Sampled barrier-vs-height curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierCurve {
    pub samples: Vec<(f64, f64)>,
    pub method: BarrierMethod,
}

impl BarrierCurve {
    pub fn new(samples: Vec<(f64, f64)>, method: BarrierMethod) -> Self {
        Self { samples, method }
    }
}

/// Direction of the reference waist geodesic for the horizon limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Busemann sum `B(z) = u⁺(z) + u⁻(z)` by adaptive quadrature with absolute
/// tolerance 1e-10.
pub fn busemann_sum_quadrature(profile: &RevolutionProfile, z: f64) -> f64 {
    debug_assert!(z >= 0.0 && profile.contains_z(z));
    let f = |t: f64| {
        let r = profile.radius(t);
        let rp = profile.radius_prime(t);
        let s2 = (1.0 - (profile.a() / r).powi(2)).max(0.0);
        2.0 * s2.sqrt() * (1.0 + rp * rp).sqrt()
    };
    adaptive_simpson(&f, 0.0, z, 1e-10)
}

/// One-sided Busemann value `d(x, γ(horizon)) - horizon`, with `γ` the unit
/// speed waist geodesic through the foot of x's meridian. Requires
/// `horizon >= 20`; monotone nonincreasing in the horizon.
pub fn busemann_limit(
    profile: &RevolutionProfile,
    x: &SurfacePoint,
    horizon: f64,
    direction: Direction,
) -> Result<f64> {
    if horizon < 20.0 {
        return Err(Error::HorizonTooShort { horizon });
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let target = SurfacePoint::new(0.0, x.theta_lift + sign * horizon / profile.a());
    let d = distance_with(profile, x, &target, &ShootingOpts::default())?;
    Ok(d - horizon)
}

/// Forward + backward horizon sum; converges to
/// [`busemann_sum_quadrature`] as the horizon grows.
pub fn busemann_limit_sum(
    profile: &RevolutionProfile,
    x: &SurfacePoint,
    horizon: f64,
) -> Result<f64> {
    Ok(busemann_limit(profile, x, horizon, Direction::Forward)?
        + busemann_limit(profile, x, horizon, Direction::Backward)?)
}

/// Diagonal Peierls barrier `h(x,x) = P(x,x)` at height `z`; independent of
/// θ by rotational symmetry. Alias of the Busemann sum.
pub fn peierls_barrier_busemann(profile: &RevolutionProfile, z: f64) -> f64 {
    busemann_sum_quadrature(profile, z)
}

/// Leading small-z law of the barrier: returns `(C, p)` with
/// `B(z) ~ C z^p`, `C = 2√(2b/a)/(2+k/2)` and `p = 2 + k/2`.
pub fn leading_coefficient(profile: &RevolutionProfile) -> (f64, f64) {
    let power = 2.0 + profile.k() / 2.0;
    let c = 2.0 * (2.0 * profile.b() / profile.a()).sqrt() / power;
    (c, power)
}

/// Ordinary least-squares power-law fit on log-log axes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub power: f64,
    pub coeff: f64,
    pub r_squared: f64,
}

/// Fit `value = coeff · z^power` over samples with `z` strictly inside
/// `(z_lo, z_hi)`; needs at least 8 positive samples in the window and
/// rejects fits with `r² < 0.99`.
pub fn fit_power_law(samples: &[(f64, f64)], z_lo: f64, z_hi: f64) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(z, v)| *z > z_lo && *z < z_hi && *v > 0.0)
        .map(|&(z, v)| (z.ln(), v.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::FitWindow {
            needed: 8,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    if r_squared < 0.99 {
        return Err(Error::DegenerateFit { r_squared });
    }
    Ok(PowerLawFit {
        power: slope,
        coeff: intercept.exp(),
        r_squared,
    })
}

/// Sample the quadrature barrier on a geometric grid of heights.
pub fn quadrature_curve(
    profile: &RevolutionProfile,
    z_lo: f64,
    z_hi: f64,
    n: usize,
) -> BarrierCurve {
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let z = z_lo * (z_hi / z_lo).powf(t);
        samples.push((z, busemann_sum_quadrature(profile, z)));
    }
    BarrierCurve::new(samples, BarrierMethod::Quadrature)
}
