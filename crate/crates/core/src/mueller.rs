//! Jones and Mueller matrices, the coherency matrix and realizability checks.

use std::ops::Mul;
use std::sync::LazyLock;

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::polarization::{JonesVector, StokesVector};

/// Default absolute tolerance of the physicality checks.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Largest imaginary residue tolerated when a complex product must be real.
pub const REAL_RESIDUE_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;

/// 2×2 complex map acting on Jones vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix(pub Matrix2<Complex64>);

impl JonesMatrix {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn new(j00: Complex64, j01: Complex64, j10: Complex64, j11: Complex64) -> Self {
        Self(Matrix2::new(j00, j01, j10, j11))
    }

    pub fn from_real(j00: f64, j01: f64, j10: f64, j11: f64) -> Self {
        Self(Matrix2::new(j00, j01, j10, j11).map(|x| Complex64::new(x, 0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }

    pub fn determinant(&self) -> Complex64 {
        self.0[(0, 0)] * self.0[(1, 1)] - self.0[(0, 1)] * self.0[(1, 0)]
    }

    pub fn try_inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Self)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        let t = self.0.norm_squared();
        let d = self.determinant().norm_sqr();
        (0.5 * (t + (t * t - 4.0 * d).max(0.0).sqrt())).sqrt()
    }

    /// Complex Gaussian entries scaled to unit spectral norm, so the Mueller
    /// matrix is passive (transmittance at most 1, attained for some input).
    pub fn random_passive<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let j =
                Self(Matrix2::from_fn(|_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))));
            let norm = j.spectral_norm();
            if norm > 1e-9 {
                return Self(j.0.map(|z| z / norm));
            }
        }
    }

    #[inline]
    pub fn apply(&self, e: &JonesVector) -> JonesVector {
        let m = &self.0;
        JonesVector::new(m[(0, 0)] * e.ex + m[(0, 1)] * e.ey, m[(1, 0)] * e.ex + m[(1, 1)] * e.ey)
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        JonesMatrix(self.0 * rhs.0)
    }
}

/// 4×4 real map acting on Stokes vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuellerMatrix(pub Matrix4<f64>);

impl MuellerMatrix {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_diagonal(d: [f64; 4]) -> Self {
        Self(Matrix4::from_diagonal(&Vector4::from(d)))
    }

    /// `blockdiag(1, r)`.
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(r);
        Self(m)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn try_inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Self)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &MuellerMatrix) -> f64 {
        (self.0 - other.0).amax()
    }

    #[inline]
    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        StokesVector::from_vector(&(self.0 * s.to_vector()))
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;

    fn mul(self, rhs: MuellerMatrix) -> MuellerMatrix {
        MuellerMatrix(self.0 * rhs.0)
    }
}

/// Hermitian 4×4 matrix equivalent to a Mueller matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencyMatrix(pub Matrix4<Complex64>);

impl CoherencyMatrix {
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).iter().all(|z| z.norm() <= tol)
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Eigenvalues sorted in descending order. The Hermitian part is used.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let h = (self.0 + self.0.adjoint()).map(|z| z * 0.5);
        let mut ev: [f64; 4] = SymmetricEigen::new(h).eigenvalues.into();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Outcome of the realizability checks for one Mueller matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub eigenvalues: [f64; 4],
    /// `M00 + ‖(M01, M02, M03)‖`.
    pub g_f: f64,
    /// `M00 + ‖(M10, M20, M30)‖`.
    pub g_r: f64,
    pub eigenvalue_ok: bool,
    pub transmittance_ok: bool,
    pub invertible: bool,
    pub pure: bool,
    pub golden: bool,
}

impl PhysicalityReport {
    /// Eigenvalue, transmittance and invertibility conditions all hold.
    pub fn is_usable_cipher(&self) -> bool {
        self.eigenvalue_ok && self.transmittance_ok && self.invertible
    }
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

static A: LazyLock<Matrix4<Complex64>> = LazyLock::new(|| {
    let (o, z, j) = (cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 1.0));
    Matrix4::new(o, z, z, o, o, z, z, -o, z, o, o, z, z, j, -j, z)
});

static A_INV: LazyLock<Matrix4<Complex64>> = LazyLock::new(|| A.adjoint().map(|z| z * 0.5));

/// Pauli matrix σ_n, with σ0 = I, σ1 = diag(1,-1), σ2 = [[0,1],[1,0]] and
/// σ3 = [[0,-j],[j,0]].
pub fn pauli(n: usize) -> Result<JonesMatrix> {
    let (o, z, j) = (cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 1.0));
    let m = match n {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(o, z, z, -o),
        2 => Matrix2::new(z, o, o, z),
        3 => Matrix2::new(z, -j, j, z),
        _ => return Err(invalid(format!("Pauli index {n} out of range"))),
    };
    Ok(JonesMatrix(m))
}

static GAMMA: LazyLock<[[Matrix4<Complex64>; 4]; 4]> = LazyLock::new(|| {
    std::array::from_fn(|n| {
        std::array::from_fn(|m| {
            let sn = pauli(n).expect("index in range").0;
            let sm = pauli(m).expect("index in range").0.map(|z| z.conj());
            *A * kron(&sn, &sm) * *A_INV
        })
    })
});

/// `Γ_nm = A (σ_n ⊗ σ_m*) A⁻¹`.
pub fn gamma(n: usize, m: usize) -> Result<Matrix4<Complex64>> {
    if n > 3 || m > 3 {
        return Err(invalid(format!("Γ index ({n}, {m}) out of range")));
    }
    Ok(GAMMA[n][m])
}

/// `A (J ⊗ J*) A⁻¹`. Fails if the product is not real to [`REAL_RESIDUE_TOL`].
pub fn jones_to_mueller(j: &JonesMatrix) -> Result<MuellerMatrix> {
    if !j.is_finite() {
        return Err(invalid("Jones matrix has non-finite entries"));
    }
    let full = *A * kron(&j.0, &j.0.map(|z| z.conj())) * *A_INV;
    let scale = full.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let residue = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > REAL_RESIDUE_TOL * scale {
        return Err(Error::InternalConsistency(format!("Mueller matrix has imaginary residue {residue:e}")));
    }
    Ok(MuellerMatrix(full.map(|z| z.re)))
}

/// `C = ¼ Σ M_nm Γ_nm`.
pub fn coherency_from_mueller(m: &MuellerMatrix) -> CoherencyMatrix {
    let mut c = Matrix4::<Complex64>::zeros();
    for n in 0..4 {
        for k in 0..4 {
            let w = m.0[(n, k)];
            if w != 0.0 {
                c += GAMMA[n][k].map(|z| z * w);
            }
        }
    }
    CoherencyMatrix(c.map(|z| z * 0.25))
}

/// `M_nm = tr(Γ_nm C)`. Rejects a non-Hermitian `C`.
pub fn mueller_from_coherency(c: &CoherencyMatrix) -> Result<MuellerMatrix> {
    let scale = c.0.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !c.0.iter().all(|z| z.is_finite()) || !c.is_hermitian(HERMITIAN_TOL * scale) {
        return Err(invalid("coherency matrix is not Hermitian"));
    }
    let entry = |n: usize, k: usize| (GAMMA[n][k] * c.0).trace();
    let mut residue = 0.0f64;
    let m = Matrix4::from_fn(|n, k| {
        let z = entry(n, k);
        residue = residue.max(z.im.abs());
        z.re
    });
    if residue > REAL_RESIDUE_TOL * scale {
        return Err(Error::InternalConsistency(format!(
            "Mueller matrix from coherency has imaginary residue {residue:e}"
        )));
    }
    Ok(MuellerMatrix(m))
}

pub fn check_physical(m: &MuellerMatrix) -> PhysicalityReport {
    check_physical_with_tol(m, PHYSICAL_TOL)
}

pub fn check_physical_with_tol(m: &MuellerMatrix, tol: f64) -> PhysicalityReport {
    let eigenvalues = coherency_from_mueller(m).eigenvalues();
    let a = &m.0;
    let m00 = a[(0, 0)];
    let g_f = m00 + (a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(0, 3)].powi(2)).sqrt();
    let g_r = m00 + (a[(1, 0)].powi(2) + a[(2, 0)].powi(2) + a[(3, 0)].powi(2)).sqrt();
    let eigenvalue_ok = eigenvalues.iter().all(|x| x.is_finite()) && eigenvalues[3] >= -tol;
    let transmittance_ok = g_f <= 1.0 + tol && g_r <= 1.0 + tol;
    let invertible = m.determinant().abs() > tol;
    let quarter_frob = 0.25 * m.frobenius_norm_sq();
    let pure = eigenvalue_ok
        && (quarter_frob - m00 * m00).abs() <= tol * (m00 * m00).max(1.0)
        && eigenvalues.iter().filter(|&&x| x > tol).count() == 1;
    let golden = pure && (eigenvalues[0] - 1.0).abs() <= tol;
    PhysicalityReport { eigenvalues, g_f, g_r, eigenvalue_ok, transmittance_ok, invertible, pure, golden }
}

/// `|det(M) − e²|` for the eight single-row and single-column expressions
/// `e = X0² − X1² − X2² − X3²`: rows 0..3 first, then columns 0..3.
/// All vanish for a Jones-generated matrix.
pub fn determinant_line_residuals(m: &MuellerMatrix) -> [f64; 8] {
    let det = m.determinant();
    let a = &m.0;
    let expr = |v: [f64; 4]| v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3];
    std::array::from_fn(|i| {
        let line = if i < 4 {
            [a[(i, 0)], a[(i, 1)], a[(i, 2)], a[(i, 3)]]
        } else {
            let c = i - 4;
            [a[(0, c)], a[(1, c)], a[(2, c)], a[(3, c)]]
        };
        (det - expr(line).powi(2)).abs()
    })
}
