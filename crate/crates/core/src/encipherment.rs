//! Secret patterns, their Mueller matrices, and the block cipher pipeline.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::{bits_to_label, label_to_bits, SphereConstellation};
use crate::error::{invalid, Error, Result};
use crate::mueller::{
    check_physical, jones_to_mueller, mueller_from_coherency, pauli, CoherencyMatrix, JonesMatrix, MuellerMatrix,
};
use crate::polarization::{stokes_to_jones_unchecked, JonesVector, StokesVector, FULLY_POLARIZED_TOL};

const INVERSE_TOL: f64 = 1e-9;

/// Scheme family of a pattern, or `None` for the unencrypted link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Golden,
    Rotation,
    Opposite,
    None,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Golden => "golden",
            Scheme::Rotation => "rotation",
            Scheme::Opposite => "opposite",
            Scheme::None => "none",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "golden" => Ok(Scheme::Golden),
            "rotation" => Ok(Scheme::Rotation),
            "opposite" => Ok(Scheme::Opposite),
            "none" => Ok(Scheme::None),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Secret pattern shared by transmitter and legitimate receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecretPattern {
    /// `k[0]` is a global phase; `k[1..]` is the direction of the
    /// coherency vector and must not vanish.
    Golden { k: [f64; 4] },
    /// Rotation of the sphere by `theta` about the axis with polar angle
    /// `alpha` and azimuth `beta`.
    Rotation { alpha: f64, beta: f64, theta: f64 },
    /// Index into the three physical sign patterns of a diagonal golden matrix.
    Opposite { variant: u8 },
}

/// How the rotation angle of a random rotation pattern is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSampling {
    Fixed(f64),
    /// Uniform on `[0, 2π)`.
    Uniform,
    /// Uniform on `[π/2, 3π/2]`, where the eavesdropper BER is flat.
    SecureBand,
}

impl SecretPattern {
    pub fn scheme(&self) -> Scheme {
        match self {
            SecretPattern::Golden { .. } => Scheme::Golden,
            SecretPattern::Rotation { .. } => Scheme::Rotation,
            SecretPattern::Opposite { .. } => Scheme::Opposite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SecretPattern::Golden { k } => {
                if !k.iter().all(|x| x.is_finite()) {
                    return Err(invalid("golden pattern has non-finite entries"));
                }
                if k[1] == 0.0 && k[2] == 0.0 && k[3] == 0.0 {
                    return Err(invalid("golden pattern direction (k1, k2, k3) is zero"));
                }
            }
            SecretPattern::Rotation { alpha, beta, theta } => {
                if !(0.0..=PI).contains(&alpha) {
                    return Err(invalid(format!("rotation alpha {alpha} outside [0, π]")));
                }
                if !(0.0..TAU).contains(&beta) {
                    return Err(invalid(format!("rotation beta {beta} outside [0, 2π)")));
                }
                if !(0.0..=TAU).contains(&theta) {
                    return Err(invalid(format!("rotation theta {theta} outside [0, 2π]")));
                }
            }
            SecretPattern::Opposite { variant } => {
                if variant > 2 {
                    return Err(invalid(format!("opposite variant {variant} not in 0..=2")));
                }
            }
        }
        Ok(())
    }

    pub fn mueller(&self) -> Result<MuellerMatrix> {
        self.validate()?;
        match *self {
            SecretPattern::Golden { k } => golden_mueller(k),
            SecretPattern::Rotation { alpha, beta, theta } => rotation_mueller(alpha, beta, theta),
            SecretPattern::Opposite { variant } => opposite_mueller(variant),
        }
    }

    /// Fresh random pattern. Golden entries are standard normal with a
    /// uniform phase; rotation axes have uniform polar angle and azimuth.
    pub fn random<R: Rng + ?Sized>(scheme: Scheme, theta: ThetaSampling, rng: &mut R) -> Result<Self> {
        match scheme {
            Scheme::Golden => loop {
                let k0 = rng.random_range(0.0..TAU);
                let d: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                if d.iter().map(|x| x * x).sum::<f64>() > 1e-24 {
                    return Ok(SecretPattern::Golden { k: [k0, d[0], d[1], d[2]] });
                }
            },
            Scheme::Rotation => {
                let alpha = rng.random_range(0.0..PI);
                let beta = rng.random_range(0.0..TAU);
                let theta = match theta {
                    ThetaSampling::Fixed(t) => t,
                    ThetaSampling::Uniform => rng.random_range(0.0..TAU),
                    ThetaSampling::SecureBand => rng.random_range(0.5 * PI..=1.5 * PI),
                };
                let p = SecretPattern::Rotation { alpha, beta, theta };
                p.validate()?;
                Ok(p)
            }
            Scheme::Opposite => Ok(SecretPattern::Opposite { variant: rng.random_range(0..3u8) }),
            Scheme::None => Err(invalid("the unencrypted scheme has no pattern")),
        }
    }

    /// Single-line record `scheme;p1;p2;...`.
    pub fn to_record(&self) -> String {
        match *self {
            SecretPattern::Golden { k } => {
                format!("golden;{:.16e};{:.16e};{:.16e};{:.16e}", k[0], k[1], k[2], k[3])
            }
            SecretPattern::Rotation { alpha, beta, theta } => {
                format!("rotation;{alpha:.16e};{beta:.16e};{theta:.16e}")
            }
            SecretPattern::Opposite { variant } => format!("opposite;{variant}"),
        }
    }

    pub fn from_record(record: &str) -> Result<Self> {
        let mut fields = record.trim().split(';');
        let scheme: Scheme = fields.next().unwrap_or_default().parse()?;
        let params: Vec<&str> = fields.collect();
        let reals = |n: usize| -> Result<Vec<f64>> {
            if params.len() != n {
                return Err(invalid(format!("{scheme} record needs {n} parameters, got {}", params.len())));
            }
            params
                .iter()
                .map(|p| p.trim().parse::<f64>().map_err(|e| invalid(format!("bad parameter '{p}': {e}"))))
                .collect()
        };
        let pattern = match scheme {
            Scheme::Golden => {
                let v = reals(4)?;
                SecretPattern::Golden { k: [v[0], v[1], v[2], v[3]] }
            }
            Scheme::Rotation => {
                let v = reals(3)?;
                SecretPattern::Rotation { alpha: v[0], beta: v[1], theta: v[2] }
            }
            Scheme::Opposite => {
                let v = reals(1)?;
                if v[0].fract() != 0.0 || !(0.0..=2.0).contains(&v[0]) {
                    return Err(invalid(format!("opposite variant {} not in 0..=2", v[0])));
                }
                SecretPattern::Opposite { variant: v[0] as u8 }
            }
            Scheme::None => return Err(invalid("the unencrypted scheme has no pattern record")),
        };
        pattern.validate()?;
        Ok(pattern)
    }
}

impl fmt::Display for SecretPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// Golden matrix from the coherency vector `c = (0, k1, k2, k3)·e^{jk0}`,
/// normalized: `C = c cᴴ`, `M_nm = tr(Γ_nm C)`.
pub fn golden_mueller(k: [f64; 4]) -> Result<MuellerMatrix> {
    SecretPattern::Golden { k }.validate()?;
    let d = Vector3::new(k[1], k[2], k[3]);
    let dir = d / d.norm();
    let phase = Complex64::from_polar(1.0, k[0]);
    let c = Vector4::new(Complex64::new(0.0, 0.0), phase * dir.x, phase * dir.y, phase * dir.z);
    mueller_from_coherency(&CoherencyMatrix(c * c.adjoint()))
}

/// Same matrix through the Jones route: `J = (k1σ1 + k2σ2 + k3σ3)/‖k‖`.
pub fn golden_mueller_via_jones(k: [f64; 4]) -> Result<MuellerMatrix> {
    SecretPattern::Golden { k }.validate()?;
    let norm = (k[1] * k[1] + k[2] * k[2] + k[3] * k[3]).sqrt();
    let mut j = nalgebra::Matrix2::zeros();
    for n in 1..4 {
        j += pauli(n)?.0.map(|z| z * (k[n] / norm));
    }
    jones_to_mueller(&JonesMatrix(j))
}

/// Rodrigues rotation `I + sinθ·N + (1 − cosθ)·N²` about the unit axis `n`.
pub fn rodrigues(n: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    let cross = Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
    Matrix3::identity() + cross * theta.sin() + cross * cross * (1.0 - theta.cos())
}

/// Unit axis with polar angle `alpha` and azimuth `beta`.
pub fn rotation_axis(alpha: f64, beta: f64) -> Vector3<f64> {
    Vector3::new(alpha.sin() * beta.cos(), alpha.sin() * beta.sin(), alpha.cos())
}

/// `blockdiag(1, R)` with `R` the Rodrigues rotation. Any finite `theta`
/// is accepted so that `-theta` gives the inverse.
pub fn rotation_mueller(alpha: f64, beta: f64, theta: f64) -> Result<MuellerMatrix> {
    if !(alpha.is_finite() && beta.is_finite() && theta.is_finite()) {
        return Err(invalid("rotation angles must be finite"));
    }
    Ok(MuellerMatrix::from_rotation(&rodrigues(&rotation_axis(alpha, beta), theta)))
}

/// Diagonal golden matrices: `diag(1,1,-1,-1)`, `diag(1,-1,1,-1)`,
/// `diag(1,-1,-1,1)` for variants 0, 1, 2.
pub fn opposite_mueller(variant: u8) -> Result<MuellerMatrix> {
    let d = match variant {
        0 => [1.0, 1.0, -1.0, -1.0],
        1 => [1.0, -1.0, 1.0, -1.0],
        2 => [1.0, -1.0, -1.0, 1.0],
        _ => return Err(invalid(format!("opposite variant {variant} not in 0..=2"))),
    };
    Ok(MuellerMatrix::from_diagonal(d))
}

/// Pattern, its matrix and inverse, and the constellation in use. Holds no
/// state between blocks.
#[derive(Debug, Clone)]
pub struct CipherContext {
    pattern: Option<SecretPattern>,
    mueller: MuellerMatrix,
    mueller_inverse: MuellerMatrix,
    constellation: Arc<SphereConstellation>,
}

impl CipherContext {
    /// Builds the context. The matrix must pass the eigenvalue,
    /// transmittance and invertibility checks.
    pub fn new(pattern: SecretPattern, constellation: Arc<SphereConstellation>) -> Result<Self> {
        let mueller = pattern.mueller()?;
        let report = check_physical(&mueller);
        if !report.is_usable_cipher() {
            return Err(Error::CipherIntegrity(format!("pattern {pattern} is not physically usable: {report:?}")));
        }
        let mueller_inverse =
            mueller.try_inverse().ok_or_else(|| Error::CipherIntegrity(format!("pattern {pattern} is singular")))?;
        let residual = (mueller.0 * mueller_inverse.0 - Matrix4::identity()).amax();
        if residual > INVERSE_TOL {
            return Err(Error::InternalConsistency(format!("inverse residual {residual:e} for {pattern}")));
        }
        Ok(Self { pattern: Some(pattern), mueller, mueller_inverse, constellation })
    }

    /// Plain spherical modulation.
    pub fn unencrypted(constellation: Arc<SphereConstellation>) -> Self {
        Self {
            pattern: None,
            mueller: MuellerMatrix::identity(),
            mueller_inverse: MuellerMatrix::identity(),
            constellation,
        }
    }

    pub fn pattern(&self) -> Option<&SecretPattern> {
        self.pattern.as_ref()
    }

    pub fn scheme(&self) -> Scheme {
        self.pattern.map_or(Scheme::None, |p| p.scheme())
    }

    pub fn mueller(&self) -> &MuellerMatrix {
        &self.mueller
    }

    pub fn mueller_inverse(&self) -> &MuellerMatrix {
        &self.mueller_inverse
    }

    pub fn constellation(&self) -> &SphereConstellation {
        &self.constellation
    }

    pub fn shared_constellation(&self) -> Arc<SphereConstellation> {
        self.constellation.clone()
    }

    /// Maps each group of `log2 M` bits, applies the pattern and converts
    /// back to a field.
    pub fn encrypt(&self, bits: &[u8]) -> Result<Vec<JonesVector>> {
        let k = self.constellation.bits_per_symbol();
        if bits.len() % k != 0 {
            return Err(invalid(format!("block of {} bits is not a multiple of {k}", bits.len())));
        }
        bits.chunks(k)
            .map(|chunk| {
                let s = self.constellation.symbol(bits_to_label(chunk)?)?;
                let ciphered = self.mueller.apply(&s);
                if !ciphered.is_fully_polarized(FULLY_POLARIZED_TOL) {
                    return Err(Error::CipherIntegrity(format!("ciphered symbol {ciphered:?} is depolarized")));
                }
                Ok(stokes_to_jones_unchecked(&ciphered))
            })
            .collect()
    }

    /// Legitimate receiver: zero-forcing, Stokes detection, inverse pattern,
    /// nearest-point decision.
    pub fn decrypt(&self, received: &[JonesVector], channel: &JonesMatrix) -> Result<Vec<u8>> {
        self.decrypt_with(received, channel, &self.mueller_inverse)
    }

    /// Receiver that applies no inverse at all.
    pub fn eavesdrop(&self, received: &[JonesVector], channel: &JonesMatrix) -> Result<Vec<u8>> {
        self.decrypt_with(received, channel, &MuellerMatrix::identity())
    }

    /// Decryption with an arbitrary inverse, e.g. one from a wrong pattern.
    pub fn decrypt_with(
        &self,
        received: &[JonesVector],
        channel: &JonesMatrix,
        inverse: &MuellerMatrix,
    ) -> Result<Vec<u8>> {
        let k = self.constellation.bits_per_symbol();
        let mut bits = Vec::with_capacity(received.len() * k);
        for s in self.recover_stokes(received, channel, inverse)? {
            let label = self.constellation.demap_label(&s)?;
            bits.extend(label_to_bits(label, k));
        }
        Ok(bits)
    }

    /// Stokes vectors after equalization and the given inverse, before the
    /// decision.
    pub fn recover_stokes(
        &self,
        received: &[JonesVector],
        channel: &JonesMatrix,
        inverse: &MuellerMatrix,
    ) -> Result<Vec<StokesVector>> {
        let eq = equalizer(channel)?;
        Ok(received.iter().map(|y| inverse.apply(&eq.apply(y).to_stokes())).collect())
    }
}

/// Zero-forcing equalizer. Fails for a singular channel.
pub fn equalizer(channel: &JonesMatrix) -> Result<JonesMatrix> {
    if !channel.is_finite() {
        return Err(invalid("channel matrix has non-finite entries"));
    }
    let scale = channel.0.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if channel.determinant().norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(invalid("channel matrix is singular"));
    }
    channel.try_inverse().ok_or_else(|| invalid("channel matrix is singular"))
}
