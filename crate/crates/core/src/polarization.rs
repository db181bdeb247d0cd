//! Jones and Stokes descriptions of a polarization state.
//!
//! Everything here is baseband: a [`JonesVector`] holds the complex envelopes
//! of the two orthogonal field components and the carrier term is never
//! modeled. A [`StokesVector`] is the real 4-vector `(S0, S1, S2, S3)`.

use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative tolerance for algebraic identities between representations.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Relative tolerance used to decide that a Stokes vector is fully polarized
/// before converting it back to a field.
pub const FULLY_POLARIZED_TOL: f64 = 1e-6;

/// Complex envelopes `(E_x, E_y)` of the two orthogonal field components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    pub const fn new(ex: Complex64, ey: Complex64) -> Self {
        Self { ex, ey }
    }

    pub fn from_real(ex: f64, ey: f64) -> Self {
        Self::new(Complex64::new(ex, 0.0), Complex64::new(ey, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.ex.is_finite() && self.ey.is_finite()
    }

    /// `|E_x|² + |E_y|²`.
    pub fn energy(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    /// Multiplies both components by a common complex factor.
    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(self.ex * factor, self.ey * factor)
    }

    /// Stokes parameters of this field. Unchecked; see [`jones_to_stokes`].
    #[inline]
    pub fn to_stokes(&self) -> StokesVector {
        let cross = self.ex * self.ey.conj();
        let px = self.ex.norm_sqr();
        let py = self.ey.norm_sqr();
        StokesVector::new(px + py, px - py, 2.0 * cross.re, -2.0 * cross.im)
    }
}

impl std::ops::Add for JonesVector {
    type Output = JonesVector;

    fn add(self, rhs: JonesVector) -> JonesVector {
        JonesVector::new(self.ex + rhs.ex, self.ey + rhs.ey)
    }
}

/// Real Stokes 4-vector `(S0, S1, S2, S3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub const fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self { s0, s1, s2, s3 }
    }

    /// Unit-energy state on the Poincaré sphere pointing along `reduced`.
    pub fn from_reduced(reduced: &Vector3<f64>) -> Self {
        Self::new(1.0, reduced.x, reduced.y, reduced.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.s0, self.s1, self.s2, self.s3)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.s0, self.s1, self.s2, self.s3]
    }

    /// The reduced vector `(S1, S2, S3)` that spans the Poincaré sphere.
    pub fn reduced(&self) -> Vector3<f64> {
        Vector3::new(self.s1, self.s2, self.s3)
    }

    pub fn polarized_intensity(&self) -> f64 {
        self.reduced().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// `S0 ≥ 0` and `S0² ≥ S1²+S2²+S3²` up to a relative tolerance.
    pub fn is_physical(&self, rel_tol: f64) -> bool {
        self.s0 >= 0.0 && self.polarized_intensity() <= self.s0 * (1.0 + rel_tol) + f64::MIN_POSITIVE
    }

    /// Equality in the polarization inequality up to a relative tolerance.
    pub fn is_fully_polarized(&self, rel_tol: f64) -> bool {
        self.s0 > 0.0 && (self.polarized_intensity() - self.s0).abs() <= rel_tol * self.s0
    }
}

/// Point on the Poincaré sphere of radius `energy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoords {
    pub energy: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

impl SphericalCoords {
    /// Checked constructor. The elevation is accepted on the closed interval
    /// `[0, π]` so that the south pole is representable.
    pub fn new(energy: f64, elevation: f64, azimuth: f64) -> Result<Self> {
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(invalid(format!("energy must be finite and non-negative, got {energy}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&elevation) {
            return Err(invalid(format!("elevation {elevation} outside [0, π]")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&azimuth) {
            return Err(invalid(format!("azimuth {azimuth} outside [0, 2π)")));
        }
        Ok(Self { energy, elevation, azimuth })
    }
}

/// Stokes parameters of a field; the result is always fully polarized.
pub fn jones_to_stokes(e: &JonesVector) -> Result<StokesVector> {
    if !e.is_finite() {
        return Err(invalid("Jones vector has non-finite components"));
    }
    Ok(e.to_stokes())
}

/// Field with the given Stokes parameters, using the half-angle phase
/// convention `(√((S0+S1)/2)·e^{-jθ/2}, √((S0-S1)/2)·e^{+jθ/2})` with
/// `θ = atan2(S3, S2)`. The global phase is not observable and is fixed by
/// this choice.
pub fn stokes_to_jones(s: &StokesVector) -> Result<JonesVector> {
    stokes_to_jones_with_tol(s, FULLY_POLARIZED_TOL)
}

pub fn stokes_to_jones_with_tol(s: &StokesVector, rel_tol: f64) -> Result<JonesVector> {
    if !s.is_finite() {
        return Err(invalid("Stokes vector has non-finite components"));
    }
    if s.s0 <= 0.0 {
        return Err(invalid(format!("S0 must be positive, got {}", s.s0)));
    }
    if !s.is_fully_polarized(rel_tol) {
        return Err(Error::Domain(format!(
            "Stokes vector is not fully polarized (degree {:.12})",
            s.polarized_intensity() / s.s0
        )));
    }
    Ok(stokes_to_jones_unchecked(s))
}

#[inline]
pub(crate) fn stokes_to_jones_unchecked(s: &StokesVector) -> JonesVector {
    let s1 = s.s1.clamp(-s.s0, s.s0);
    let theta = if s.s2 == 0.0 && s.s3 == 0.0 { 0.0 } else { s.s3.atan2(s.s2) };
    let half = Complex64::from_polar(1.0, 0.5 * theta);
    let ax = (0.5 * (s.s0 + s1)).sqrt();
    let ay = (0.5 * (s.s0 - s1)).sqrt();
    JonesVector::new(half.conj() * ax, half * ay)
}

/// `(√ℰ·cos(ϑ/2)·e^{-jφ/2}, √ℰ·sin(ϑ/2)·e^{+jφ/2})`.
pub fn spherical_to_jones(c: &SphericalCoords) -> JonesVector {
    let amp = c.energy.sqrt();
    let (sin_half, cos_half) = (0.5 * c.elevation).sin_cos();
    let phase = Complex64::from_polar(1.0, 0.5 * c.azimuth);
    JonesVector::new(phase.conj() * (amp * cos_half), phase * (amp * sin_half))
}

/// `√(S1²+S2²+S3²)/S0`, clamped to 1 when it exceeds 1 by no more than
/// [`IDENTITY_TOL`].
pub fn degree_of_polarization(s: &StokesVector) -> Result<f64> {
    if !s.is_finite() {
        return Err(invalid("Stokes vector has non-finite components"));
    }
    if s.s0 <= 0.0 {
        return Err(invalid(format!("S0 must be positive, got {}", s.s0)));
    }
    let dop = s.polarized_intensity() / s.s0;
    if dop > 1.0 + IDENTITY_TOL {
        return Err(Error::Domain(format!("over-polarized Stokes vector (degree {dop})")));
    }
    Ok(dop.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_stokes(s: StokesVector, expected: [f64; 4]) {
        for (a, b) in s.to_array().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn jones_to_stokes_examples() {
        assert_stokes(jones_to_stokes(&JonesVector::from_real(1.0, 0.0)).unwrap(), [1.0, 1.0, 0.0, 0.0]);
        let slant = JonesVector::from_real(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        assert_stokes(jones_to_stokes(&slant).unwrap(), [1.0, 0.0, 1.0, 0.0]);
        // ex·conj(ey) = (1/√2)(-j/√2) = -j/2, so S2 = 0 and S3 = -2·(-1/2) = 1.
        let circ = JonesVector::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2));
        assert_stokes(jones_to_stokes(&circ).unwrap(), [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn jones_to_stokes_rejects_nan() {
        let e = JonesVector::new(c(f64::NAN, 0.0), c(0.0, 0.0));
        assert!(matches!(jones_to_stokes(&e), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stokes_to_jones_examples() {
        let h = stokes_to_jones(&StokesVector::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h.ex.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.ex.im, 0.0);
        assert_abs_diff_eq!(h.ey.norm(), 0.0);

        let r = stokes_to_jones(&StokesVector::new(1.0, 0.0, 0.0, 1.0)).unwrap();
        let ex = Complex64::from_polar(FRAC_1_SQRT_2, -FRAC_PI_4);
        let ey = Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4);
        assert_abs_diff_eq!((r.ex - ex).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((r.ey - ey).norm(), 0.0, epsilon = 1e-15);
        assert_stokes(r.to_stokes(), [1.0, 0.0, 0.0, 1.0]);

        let d = stokes_to_jones(&StokesVector::new(2.0, 0.0, 2.0, 0.0)).unwrap();
        assert_abs_diff_eq!((d.ex - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d.ey - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stokes_to_jones_errors() {
        let unpolarized = StokesVector::new(1.0, 0.0, 0.0, 0.0);
        assert!(matches!(stokes_to_jones(&unpolarized), Err(Error::Domain(_))));
        let partial = StokesVector::new(1.0, 0.5, 0.0, 0.0);
        assert!(matches!(stokes_to_jones(&partial), Err(Error::Domain(_))));
        let dark = StokesVector::new(0.0, 0.0, 0.0, 0.0);
        assert!(matches!(stokes_to_jones(&dark), Err(Error::InvalidArgument(_))));
        let negative = StokesVector::new(-1.0, 1.0, 0.0, 0.0);
        assert!(matches!(stokes_to_jones(&negative), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_phase_when_no_slant_or_circular_part() {
        // -0.0 in S2 would make atan2 return π; the convention pins θ to 0.
        let v = stokes_to_jones(&StokesVector::new(1.0, -1.0, -0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.ey.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.ey.im, 0.0);
    }

    #[test]
    fn spherical_examples() {
        let north = spherical_to_jones(&SphericalCoords::new(1.0, 0.0, 0.0).unwrap());
        assert_abs_diff_eq!((north.ex - c(1.0, 0.0)).norm(), 0.0);
        assert_abs_diff_eq!(north.ey.norm(), 0.0);

        let eq = spherical_to_jones(&SphericalCoords::new(1.0, FRAC_PI_2, 0.0).unwrap());
        assert_abs_diff_eq!((eq.ex - c(FRAC_1_SQRT_2, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((eq.ey - c(FRAC_1_SQRT_2, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_stokes(eq.to_stokes(), [1.0, 0.0, 1.0, 0.0]);

        let back = spherical_to_jones(&SphericalCoords::new(1.0, FRAC_PI_2, PI).unwrap());
        assert_abs_diff_eq!((back.ex - c(0.0, -FRAC_1_SQRT_2)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((back.ey - c(0.0, FRAC_1_SQRT_2)).norm(), 0.0, epsilon = 1e-15);
        assert_stokes(back.to_stokes(), [1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn spherical_range_checks() {
        assert!(SphericalCoords::new(-1.0, 0.0, 0.0).is_err());
        assert!(SphericalCoords::new(1.0, 4.0, 0.0).is_err());
        assert!(SphericalCoords::new(1.0, 1.0, std::f64::consts::TAU).is_err());
        assert!(SphericalCoords::new(1.0, PI, 0.0).is_ok());
    }

    #[test]
    fn degree_of_polarization_examples() {
        assert_abs_diff_eq!(degree_of_polarization(&StokesVector::new(1.0, 1.0, 0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(degree_of_polarization(&StokesVector::new(1.0, 0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            degree_of_polarization(&StokesVector::new(2.0, 1.0, 1.0, 1.0)).unwrap(),
            3f64.sqrt() / 2.0,
            epsilon = 1e-15
        );
        assert!(degree_of_polarization(&StokesVector::new(0.0, 0.0, 0.0, 0.0)).is_err());
        let nearly = StokesVector::new(1.0, 1.0 + 1e-12, 0.0, 0.0);
        assert_eq!(degree_of_polarization(&nearly).unwrap(), 1.0);
        assert!(degree_of_polarization(&StokesVector::new(1.0, 2.0, 0.0, 0.0)).is_err());
    }

    fn arb_complex() -> impl Strategy<Value = Complex64> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(re, im)| Complex64::new(re, im))
    }

    fn rel_err(a: StokesVector, b: StokesVector) -> f64 {
        (a.to_vector() - b.to_vector()).norm() / b.to_vector().norm().max(1e-300)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn stokes_jones_round_trip(
            energy in 1e-3..1e3f64,
            z in -1.0..1.0f64,
            phi in 0.0..std::f64::consts::TAU,
        ) {
            let r = (1.0 - z * z).sqrt();
            let s = StokesVector::new(energy, energy * z, energy * r * phi.cos(), energy * r * phi.sin());
            let e = stokes_to_jones(&s).unwrap();
            prop_assert!(rel_err(e.to_stokes(), s) < 1e-9);
        }

        #[test]
        fn global_phase_is_unobservable(ex in arb_complex(), ey in arb_complex(), psi in -10.0..10.0f64) {
            let e = JonesVector::new(ex, ey);
            let a = e.to_stokes();
            let b = e.scale(Complex64::from_polar(1.0, psi)).to_stokes();
            let scale = e.energy().max(1.0);
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn jones_output_is_fully_polarized(ex in arb_complex(), ey in arb_complex()) {
            let e = JonesVector::new(ex, ey);
            prop_assume!(e.energy() > 1e-6);
            let s = e.to_stokes();
            prop_assert!((s.polarized_intensity() - s.s0).abs() <= 1e-9 * s.s0);
        }

        #[test]
        fn spherical_matches_stokes_angles(
            elevation in 0.0..PI,
            azimuth in 0.0..std::f64::consts::TAU,
        ) {
            let e = spherical_to_jones(&SphericalCoords::new(1.0, elevation, azimuth).unwrap());
            let s = e.to_stokes();
            // S3 comes out as +sinϑ·sinφ under the S3 = -2·Im(ex·conj(ey)) convention.
            let expected = StokesVector::new(
                1.0,
                elevation.cos(),
                elevation.sin() * azimuth.cos(),
                elevation.sin() * azimuth.sin(),
            );
            prop_assert!(rel_err(s, expected) < 1e-12);
            prop_assert!((degree_of_polarization(&s).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
