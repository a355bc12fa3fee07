//! Model surfaces of revolution with a flat waist.
//!
//! The profile is `r(z) = a + b·|z|^(2+k)` on the annulus
//! `S¹ × [-z_max, z_max]` with line element `ds² = E dz² + G dθ²`,
//! `E = 1 + r'(z)²`, `G = r(z)²`. For even `k` the surface is smooth, the
//! waist `z = 0` is a closed geodesic of length `2πa`, the Gaussian
//! curvature vanishes there to order `k` and is strictly negative away from
//! it. All derivative formulas are closed-form.

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use serde::{Deserialize, Serialize};

/// Surface of revolution `r(z) = a + b·|z|^(2+k)`, `|z| <= z_max`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RevolutionProfile {
    a: f64,
    b: f64,
    k: f64,
    z_max: f64,
}

/// Point on the annulus. `theta_lift` is the unrolled angular coordinate on
/// the universal cover; panels that need the compact surface reduce it with
/// [`SurfacePoint::theta_reduced`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub z: f64,
    pub theta_lift: f64,
}

impl SurfacePoint {
    pub fn new(z: f64, theta_lift: f64) -> Self {
        Self { z, theta_lift }
    }

    /// Angular coordinate reduced to `[0, 2π)`.
    pub fn theta_reduced(&self) -> f64 {
        let two_pi = std::f64::consts::TAU;
        self.theta_lift.rem_euclid(two_pi)
    }
}

/// `|z|^p`, using integer exponentiation when `p` is integral so that exact
/// dyadic inputs stay exact.
fn pow_abs(z: f64, p: f64) -> f64 {
    let az = z.abs();
    if p == 0.0 {
        1.0
    } else if p.fract() == 0.0 && p.abs() < 64.0 {
        az.powi(p as i32)
    } else {
        az.powf(p)
    }
}

impl RevolutionProfile {
    /// Standard profile: `k` must be an even nonnegative integer.
    pub fn new(a: f64, b: f64, k: u32, z_max: f64) -> Result<Self> {
        if k % 2 != 0 {
            return Err(Error::InvalidFlatness { k: k as f64 });
        }
        Self::with_flatness_override(a, b, k as f64, z_max)
    }

    /// Override constructor permitting any real flatness order `k >= 0`.
    /// The annulus may fail to be smooth for non-even `k`; callers surface
    /// the warning.
    pub fn with_flatness_override(a: f64, b: f64, k: f64, z_max: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("b", b), ("z_max", z_max)] {
            if !(value > 0.0) {
                return Err(Error::NonPositiveParameter { name, value });
            }
        }
        if !(k >= 0.0) {
            return Err(Error::InvalidFlatness { k });
        }
        Ok(Self { a, b, k, z_max })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// True when `k` is the even integer the smoothness argument requires.
    pub fn is_standard_flatness(&self) -> bool {
        self.k.fract() == 0.0 && (self.k as u64) % 2 == 0
    }

    /// Length of the waist geodesic `z = 0`.
    pub fn waist_length(&self) -> f64 {
        std::f64::consts::TAU * self.a
    }

    pub fn contains_z(&self, z: f64) -> bool {
        z.abs() <= self.z_max * (1.0 + 1e-12) + 1e-300
    }

    pub fn check_domain(&self, z: f64) -> Result<()> {
        if self.contains_z(z) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                z,
                z_max: self.z_max,
            })
        }
    }

    /// Distance to the rotation axis, `r(z) = a + b·|z|^(2+k)`.
    pub fn radius(&self, z: f64) -> f64 {
        debug_assert!(self.contains_z(z), "z = {z} outside domain");
        self.a + self.b * pow_abs(z, 2.0 + self.k)
    }

    /// `r'(z)`; odd in `z`.
    pub fn radius_prime(&self, z: f64) -> f64 {
        self.b * (2.0 + self.k) * z.signum() * pow_abs(z, 1.0 + self.k)
    }

    /// `r''(z)`; even in `z`, vanishes at the waist iff `k > 0`.
    pub fn radius_second(&self, z: f64) -> f64 {
        self.b * (2.0 + self.k) * (1.0 + self.k) * pow_abs(z, self.k)
    }

    /// First fundamental form coefficients `(E, G)` of `ds² = E dz² + G dθ²`.
    pub fn metric_coefficients(&self, z: f64) -> (f64, f64) {
        let rp = self.radius_prime(z);
        let r = self.radius(z);
        (1.0 + rp * rp, r * r)
    }

    /// Gaussian curvature `K(z) = -r'' / (r (1 + r'²)²)`.
    pub fn gaussian_curvature(&self, z: f64) -> f64 {
        let r = self.radius(z);
        let rp = self.radius_prime(z);
        let rpp = self.radius_second(z);
        let e = 1.0 + rp * rp;
        -rpp / (r * e * e)
    }

    /// Riemannian area element `√(EG) = r √(1 + r'²)` per dz·dθ.
    pub fn area_element(&self, z: f64) -> f64 {
        let (e, g) = self.metric_coefficients(z);
        (e * g).sqrt()
    }

    /// Meridian arc length from the waist to height `z`,
    /// `∫₀^z √(1 + r'(t)²) dt`; the minimizing connection from a point to
    /// the waist by symmetry and nonpositive curvature.
    pub fn meridian_arc(&self, z: f64) -> f64 {
        let s = z.signum();
        s * adaptive_simpson(
            &|t: f64| {
                let rp = self.radius_prime(t);
                (1.0 + rp * rp).sqrt()
            },
            0.0,
            z.abs(),
            1e-12,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p112() -> RevolutionProfile {
        RevolutionProfile::new(1.0, 1.0, 2, 1.0).unwrap()
    }

    #[test]
    fn radius_values() {
        let p = p112();
        assert_eq!(p.radius(0.0), 1.0);
        assert_eq!(p.radius(0.5), 1.0625);
        let p = RevolutionProfile::new(2.0, 0.5, 0, 2.0).unwrap();
        assert_eq!(p.radius(1.0), 2.5);
    }

    #[test]
    fn domain_rejected() {
        let p = p112();
        assert!(p.check_domain(1.5).is_err());
        assert!(p.check_domain(-0.999).is_ok());
    }

    #[test]
    fn odd_k_rejected_without_override() {
        assert!(RevolutionProfile::new(1.0, 1.0, 3, 1.0).is_err());
        let p = RevolutionProfile::with_flatness_override(1.0, 1.0, 3.0, 1.0).unwrap();
        assert!(!p.is_standard_flatness());
    }

    #[test]
    fn metric_coefficients_against_symbolic_derivative() {
        let p = p112();
        assert_eq!(p.metric_coefficients(0.0), (1.0, 1.0));
        // r' = 4 z^3 at z = 0.5 gives E = 1.25, G = 1.0625^2
        let (e, g) = p.metric_coefficients(0.5);
        assert!((e - 1.25).abs() < 1e-15);
        assert!((g - 1.12890625).abs() < 1e-15);
        let p0 = RevolutionProfile::new(1.0, 1.0, 0, 1.0).unwrap();
        assert_eq!(p0.metric_coefficients(0.0), (1.0, 1.0));
    }

    #[test]
    fn curvature_flat_waist_and_symbolic_value() {
        let p = p112();
        assert_eq!(p.gaussian_curvature(0.0), 0.0);
        // -12 z^2 / (r (1 + 16 z^6)^2) at z = 0.5
        let expect = -3.0 / (1.0625 * 1.5625_f64);
        assert!((p.gaussian_curvature(0.5) - expect).abs() < 1e-14);
        // hyperbolic-waist control case k = 0: K(0) = -2b/a
        let p0 = RevolutionProfile::new(1.0, 1.0, 0, 1.0).unwrap();
        assert!((p0.gaussian_curvature(0.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn curvature_negative_off_waist_zero_on_waist() {
        for k in [2u32, 4] {
            let p = RevolutionProfile::new(1.0, 1.0, k, 1.0).unwrap();
            assert_eq!(p.gaussian_curvature(0.0), 0.0);
            for i in 1..=40 {
                let z = i as f64 * 0.025;
                assert!(p.gaussian_curvature(z) < 0.0, "K({z}) not negative");
            }
        }
    }

    #[test]
    fn area_element_values() {
        let p = p112();
        assert_eq!(p.area_element(0.0), 1.0);
        assert!((p.area_element(0.5) - 1.0625 * 1.25f64.sqrt()).abs() < 1e-15);
        let p3 = RevolutionProfile::new(3.0, 1.0, 2, 1.0).unwrap();
        assert_eq!(p3.area_element(0.0), 3.0);
    }

    #[test]
    fn evenness_in_z() {
        let p = p112();
        for i in 1..=20 {
            let z = i as f64 * 0.045;
            assert_eq!(p.radius(z), p.radius(-z));
            assert_eq!(p.gaussian_curvature(z), p.gaussian_curvature(-z));
            assert_eq!(p.metric_coefficients(z), p.metric_coefficients(-z));
        }
    }

    #[test]
    fn curvature_ordering_in_b_near_waist() {
        // sandwich hypothesis: larger b is more negatively curved in the
        // tube |z| <= 0.5 for these pairs (fails far out where the E-factor
        // dominates; all comparison trials stay inside the tube)
        let bs = [0.5, 1.0, 2.0];
        for w in bs.windows(2) {
            let p1 = RevolutionProfile::new(1.0, w[0], 2, 1.0).unwrap();
            let p2 = RevolutionProfile::new(1.0, w[1], 2, 1.0).unwrap();
            for i in 0..=100 {
                let z = i as f64 * 0.004;
                let k1 = p1.gaussian_curvature(z);
                let k2 = p2.gaussian_curvature(z);
                assert!(k2 <= k1 + 1e-15, "ordering fails at z={z}: {k2} > {k1}");
                assert!(k1 <= 0.0);
            }
        }
    }

    #[test]
    fn curvature_log_log_slope_is_k() {
        for k in [2u32, 4] {
            let p = RevolutionProfile::new(1.0, 1.0, k, 1.0).unwrap();
            let mut pts = Vec::new();
            for i in 0..=40 {
                let z = 1e-3 * (1e-1f64 / 1e-3).powf(i as f64 / 40.0);
                pts.push((z.ln(), p.gaussian_curvature(z).abs().ln()));
            }
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            assert!(
                (slope - k as f64).abs() < 0.02,
                "k={k}: log-log slope {slope}"
            );
        }
    }

    #[test]
    fn meridian_arc_small_z() {
        let p = p112();
        // integrand = sqrt(1+16 t^6) ~ 1 + 8 t^6
        let z = 0.1f64;
        let expect = z + 8.0 * z.powi(7) / 7.0;
        assert!((p.meridian_arc(z) - expect).abs() < 1e-9);
        assert!((p.meridian_arc(-z) + p.meridian_arc(z)).abs() < 1e-15);
    }
}
