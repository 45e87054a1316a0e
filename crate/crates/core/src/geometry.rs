//! Lens profile, stereographic coordinate map and optical-path predictions.
//!
//! Natural units throughout: ħ = c = ε₀ = 1, slab thickness b = 1 and the
//! atomic transition frequency ω_a = 1. Lengths are therefore measured in
//! units of 1/ω_a, and the atomic wavelength is λ_a = 2π.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub const HBAR: f64 = 1.0;
pub const SPEED_OF_LIGHT: f64 = 1.0;
pub const EPSILON0: f64 = 1.0;
pub const SLAB_THICKNESS: f64 = 1.0;
/// Atomic transition frequency, the frequency unit.
pub const OMEGA_A: f64 = 1.0;
/// Atomic wavelength 2πc/ω_a.
pub const LAMBDA_A: f64 = TAU * SPEED_OF_LIGHT / OMEGA_A;

const OPTICAL_PATH_TOLERANCE: f64 = 1e-12;

/// Circular Maxwell fish-eye lens bounded by a mirror at radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensGeometry {
    radius: f64,
    n0: f64,
}

impl LensGeometry {
    pub fn new(radius: f64, n0: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain {
                what: "radius",
                value: radius,
                domain: "(0, ∞)".into(),
            });
        }
        if !(n0.is_finite() && n0 >= 1.0) {
            return Err(Error::Domain {
                what: "n0",
                value: n0,
                domain: "[1, ∞)".into(),
            });
        }
        Ok(Self { radius, n0 })
    }

    /// Lens with radius given in atomic wavelengths.
    pub fn from_wavelengths(radius_over_lambda: f64, n0: f64) -> Result<Self> {
        Self::new(radius_over_lambda * LAMBDA_A, n0)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if (0.0..=self.radius).contains(&r) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "r",
                value: r,
                domain: format!("[0, {}]", self.radius),
            })
        }
    }

    /// n(r) = 2n₀ / (1 + (r/R)²).
    pub fn refractive_index(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.index_unchecked(r))
    }

    pub(crate) fn index_unchecked(&self, r: f64) -> f64 {
        let rho = r / self.radius;
        2.0 * self.n0 / (1.0 + rho * rho)
    }

    /// Polar-angle cosine of the projection-sphere point that maps to radius `r`.
    ///
    /// The center maps to the north pole and the mirror to the equator.
    pub fn stereographic_cos_theta(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.cos_theta_unchecked(r))
    }

    pub(crate) fn cos_theta_unchecked(&self, r: f64) -> f64 {
        let rho2 = (r / self.radius).powi(2);
        (1.0 - rho2) / (1.0 + rho2)
    }

    /// Optical length of the diameter, ∫ n(r) dr over [−R, R], by adaptive quadrature.
    pub fn optical_path_diametral(&self) -> f64 {
        let index = |x: f64| self.index_unchecked(x.abs());
        quadrature::gauss_kronrod(index, -self.radius, self.radius, OPTICAL_PATH_TOLERANCE)
            .map(|i| i.value)
            // the integrand is analytic on the interval; the rule cannot fail to converge
            .expect("smooth integrand")
    }

    /// Closed-form optical length πn₀R shared by every single-reflection path
    /// between a pair of conjugate points.
    pub fn optical_path_closed_form(&self) -> f64 {
        PI * self.n0 * self.radius
    }

    /// Time for light to travel between conjugate points, πn₀R/c.
    pub fn arrival_time(&self) -> f64 {
        self.optical_path_closed_form() / SPEED_OF_LIGHT
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_lens() -> LensGeometry {
        LensGeometry::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn unit_conventions() {
        assert_eq!(LAMBDA_A * OMEGA_A, TAU);
        assert_eq!(HBAR * EPSILON0 * SLAB_THICKNESS, 1.0);
    }

    #[test]
    fn index_profile_values() {
        let lens = LensGeometry::new(3.0, 1.0).unwrap();
        assert_eq!(lens.refractive_index(0.0).unwrap(), 2.0);
        assert_eq!(lens.refractive_index(3.0).unwrap(), 1.0);
        assert!((lens.refractive_index(1.5).unwrap() - 1.6).abs() < 1e-15);
        assert!(lens.refractive_index(-0.1).is_err());
        assert!(lens.refractive_index(3.01).is_err());
    }

    #[test]
    fn stereographic_values() {
        let lens = unit_lens();
        assert_eq!(lens.stereographic_cos_theta(0.0).unwrap(), 1.0);
        assert_eq!(lens.stereographic_cos_theta(1.0).unwrap(), 0.0);
        let c = lens.stereographic_cos_theta(1.0 / 3f64.sqrt()).unwrap();
        assert!((c - 0.5).abs() < 1e-15);
        assert!(lens.stereographic_cos_theta(1.5).is_err());
    }

    #[test]
    fn optical_path_examples() {
        let fig = LensGeometry::from_wavelengths(3.0, 1.0).unwrap();
        assert!((fig.optical_path_diametral() / LAMBDA_A - 3.0 * PI).abs() < 1e-10);
        assert!((unit_lens().optical_path_diametral() - PI).abs() < 1e-12);
        let dense = LensGeometry::new(1.0, 2.0).unwrap();
        assert!((dense.optical_path_diametral() - TAU).abs() < 1e-12);
    }

    #[test]
    fn arrival_time_examples() {
        let fig = LensGeometry::from_wavelengths(3.0, 1.0).unwrap();
        assert!((fig.arrival_time() - 6.0 * PI * PI).abs() < 1e-12);
        let one = LensGeometry::from_wavelengths(1.0, 1.0).unwrap();
        assert!((one.arrival_time() - 2.0 * PI * PI).abs() < 1e-12);
        let two = LensGeometry::from_wavelengths(2.0, 1.0).unwrap();
        assert!((two.arrival_time() - 2.0 * one.arrival_time()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(LensGeometry::new(0.0, 1.0).is_err());
        assert!(LensGeometry::new(1.0, 0.5).is_err());
        assert!(LensGeometry::new(f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn index_strictly_decreasing(a in 0.0f64..1.0, b in 0.0f64..1.0, n0 in 1.0f64..3.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let lens = LensGeometry::new(2.0, n0).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(lens.refractive_index(2.0 * lo).unwrap() > lens.refractive_index(2.0 * hi).unwrap());
            prop_assert!(lens.stereographic_cos_theta(2.0 * lo).unwrap() > lens.stereographic_cos_theta(2.0 * hi).unwrap());
        }

        #[test]
        fn optical_path_matches_closed_form(n0 in 1.0f64..3.0, r_over_lambda in 0.5f64..10.0) {
            let lens = LensGeometry::from_wavelengths(r_over_lambda, n0).unwrap();
            let rel = (lens.optical_path_diametral() / lens.optical_path_closed_form() - 1.0).abs();
            prop_assert!(rel < 1e-10);
        }

        #[test]
        fn cos_theta_maps_into_unit_interval(rho in 0.0f64..=1.0) {
            let c = unit_lens().stereographic_cos_theta(rho).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }
}
