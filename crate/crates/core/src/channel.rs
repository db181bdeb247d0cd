//! AWGN link, Stokes-detector statistics, polarization impairments and
//! single-block transmission.
//!
//! SNR convention: `γ = P_x/σ_w²`, where `P_x` is the signal power per
//! polarization branch and `σ_w²` the noise variance per complex branch.
//! Transmitted symbols have `S0 = 1`, so `P_x = 1/2`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::encipherment::CipherContext;
use crate::error::{invalid, Error, Result};
use crate::mueller::{jones_to_mueller, JonesMatrix, MuellerMatrix};
use crate::polarization::JonesVector;
use crate::rng::{stream, Purpose};

/// Per-branch signal power of a unit-energy symbol.
pub const SIGNAL_POWER: f64 = 0.5;

const MAGNITUDE_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-9;
const MOMENT_SHARD: usize = 1 << 14;

/// Imperfect polarization at the radio chain, as the Jones matrix
/// `[[1, a], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Impairment {
    /// Leakage `a = b = ξ`, `c = 1`.
    CrossPol(Complex64),
    /// Branch gain `a = b = 0`, `c = ξ`.
    Unbalanced(Complex64),
    Generic {
        a: Complex64,
        b: Complex64,
        c: Complex64,
    },
}

impl Impairment {
    pub fn coefficients(&self) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            Impairment::CrossPol(xi) => (xi, xi, Complex64::new(1.0, 0.0)),
            Impairment::Unbalanced(xi) => (zero, zero, xi),
            Impairment::Generic { a, b, c } => (a, b, c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.coefficients();
        check_magnitudes(a, b, c)
    }

    pub fn jones(&self) -> JonesMatrix {
        let (a, b, c) = self.coefficients();
        JonesMatrix::new(Complex64::new(1.0, 0.0), a, b, c)
    }

    pub fn mueller(&self) -> Result<MuellerMatrix> {
        let (a, b, c) = self.coefficients();
        impairment_mueller(a, b, c)
    }
}

fn check_magnitudes(a: Complex64, b: Complex64, c: Complex64) -> Result<()> {
    for (name, z) in [("a", a), ("b", b), ("c", c)] {
        if !z.is_finite() || z.norm_sqr() > 1.0 + MAGNITUDE_TOL {
            return Err(invalid(format!("impairment coefficient {name} = {z} has |{name}|² > 1")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// `γ` in dB; `+∞` means noiseless.
    pub snr_db: f64,
    pub channel: JonesMatrix,
    pub impairment: Option<Impairment>,
}

impl ChannelConfig {
    pub fn new(snr_db: f64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(invalid(format!("SNR {snr_db} dB is not usable")));
        }
        Ok(Self { snr_db, channel: JonesMatrix::identity(), impairment: None })
    }

    pub fn noiseless() -> Self {
        Self { snr_db: f64::INFINITY, channel: JonesMatrix::identity(), impairment: None }
    }

    pub fn with_channel(mut self, channel: JonesMatrix) -> Result<Self> {
        crate::encipherment::equalizer(&channel)?;
        self.channel = channel;
        Ok(self)
    }

    pub fn with_impairment(mut self, impairment: Impairment) -> Result<Self> {
        impairment.validate()?;
        self.impairment = Some(impairment);
        Ok(self)
    }

    /// Linear `γ`.
    pub fn gamma(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// `σ_w² = P_x/γ` with `P_x = 1/2`.
    pub fn sigma_w2(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            SIGNAL_POWER / self.gamma()
        }
    }
}

/// Adds circularly-symmetric complex Gaussian noise of variance `sigma_w2`
/// to each branch.
pub fn awgn<R: Rng + ?Sized>(e: &JonesVector, sigma_w2: f64, rng: &mut R) -> Result<JonesVector> {
    if !(sigma_w2 >= 0.0 && sigma_w2.is_finite()) {
        return Err(invalid(format!("noise variance {sigma_w2} must be finite and non-negative")));
    }
    Ok(awgn_unchecked(e, (0.5 * sigma_w2).sqrt(), rng))
}

#[inline]
fn awgn_unchecked<R: Rng + ?Sized>(e: &JonesVector, std_per_dim: f64, rng: &mut R) -> JonesVector {
    let mut draw = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std_per_dim
    };
    let (wx, wy) = (draw(), draw());
    JonesVector::new(e.ex + wx, e.ey + wy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesMoments {
    pub mean: [f64; 4],
    pub variance: [f64; 4],
}

/// Mean and variance of the detected Stokes vector for a signal with power
/// `p_x` in each branch plus noise of variance `sigma_w2` per branch.
pub fn predicted_stokes_moments(p_x: f64, sigma_w2: f64) -> Result<StokesMoments> {
    if !(p_x >= 0.0 && sigma_w2 >= 0.0 && p_x.is_finite() && sigma_w2.is_finite()) {
        return Err(invalid("powers must be finite and non-negative"));
    }
    let v0 = 4.0 * p_x * sigma_w2 + 2.0 * sigma_w2 * sigma_w2;
    let v2 = 2.0 * (p_x + sigma_w2).powi(2);
    Ok(StokesMoments { mean: [2.0 * (p_x + sigma_w2), 0.0, 0.0, 0.0], variance: [v0, v0, v2, v2] })
}

/// Per-parameter SNR after Stokes detection for input SNR `γ` (linear):
/// `(γ/(1 + 1.5/γ), 0, γ/(2 + 1/γ), γ/(2 + 1/γ))`.
pub fn stokes_snr(gamma: f64) -> Result<[f64; 4]> {
    if !(gamma >= 0.0) || gamma.is_infinite() {
        return Err(invalid(format!("input SNR {gamma} must be finite and non-negative")));
    }
    if gamma == 0.0 {
        return Ok([0.0; 4]);
    }
    let s0 = gamma / (1.0 + 1.5 / gamma);
    let s2 = gamma / (2.0 + 1.0 / gamma);
    Ok([s0, 0.0, s2, s2])
}

/// Test signal with both branches of power `p_x` and independent uniform
/// phases.
fn random_phase_signal<R: Rng + ?Sized>(p_x: f64, rng: &mut R) -> JonesVector {
    let amp = p_x.sqrt();
    let phi1 = rng.random_range(0.0..std::f64::consts::TAU);
    let phi2 = rng.random_range(0.0..std::f64::consts::TAU);
    JonesVector::new(Complex64::from_polar(amp, phi1), Complex64::from_polar(amp, phi2))
}

fn sharded<T: Send>(n: usize, f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    (0..n.div_ceil(MOMENT_SHARD))
        .into_par_iter()
        .map(|shard| f(shard, MOMENT_SHARD.min(n - shard * MOMENT_SHARD)))
        .collect()
}

/// Sample mean and variance of the Stokes vector over `n` noisy symbols of
/// the random-phase test signal.
pub fn simulate_stokes_moments(p_x: f64, sigma_w2: f64, n: usize, seed: u64) -> Result<StokesMoments> {
    predicted_stokes_moments(p_x, sigma_w2)?;
    if n < 2 {
        return Err(invalid("at least two samples are required"));
    }
    let std = (0.5 * sigma_w2).sqrt();
    let parts = sharded(n, |shard, count| {
        let mut rng = stream(seed, shard as u64, Purpose::Noise);
        let (mut sum, mut sum_sq) = ([0.0; 4], [0.0; 4]);
        for _ in 0..count {
            let x = random_phase_signal(p_x, &mut rng);
            let s = awgn_unchecked(&x, std, &mut rng).to_stokes().to_array();
            for i in 0..4 {
                sum[i] += s[i];
                sum_sq[i] += s[i] * s[i];
            }
        }
        (sum, sum_sq)
    });
    let nf = n as f64;
    let mut mean = [0.0; 4];
    let mut variance = [0.0; 4];
    for i in 0..4 {
        let s: f64 = parts.iter().map(|p| p.0[i]).sum();
        let q: f64 = parts.iter().map(|p| p.1[i]).sum();
        mean[i] = s / nf;
        variance[i] = ((q / nf - mean[i] * mean[i]) * nf / (nf - 1.0)).max(0.0);
    }
    Ok(StokesMoments { mean, variance })
}

/// Monte-Carlo per-parameter SNR: power of the noiseless Stokes parameter
/// divided by the power of the difference the noise makes to it.
pub fn simulate_stokes_snr(gamma: f64, n: usize, seed: u64) -> Result<[f64; 4]> {
    stokes_snr(gamma)?;
    if n == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let p_x = SIGNAL_POWER;
    let std = (0.5 * p_x / gamma).sqrt();
    let parts = sharded(n, |shard, count| {
        let mut rng = stream(seed, shard as u64, Purpose::Noise);
        let (mut sig, mut noise) = ([0.0; 4], [0.0; 4]);
        for _ in 0..count {
            let x = random_phase_signal(p_x, &mut rng);
            let clean = x.to_stokes().to_array();
            let noisy = awgn_unchecked(&x, std, &mut rng).to_stokes().to_array();
            for i in 0..4 {
                sig[i] += clean[i] * clean[i];
                noise[i] += (noisy[i] - clean[i]).powi(2);
            }
        }
        (sig, noise)
    });
    Ok(std::array::from_fn(|i| {
        let s: f64 = parts.iter().map(|p| p.0[i]).sum();
        let w: f64 = parts.iter().map(|p| p.1[i]).sum();
        // The signal part of S1 vanishes identically for equal branch powers.
        if s <= 1e-12 * w {
            0.0
        } else {
            s / w
        }
    }))
}

/// Closed-form Mueller matrix of `[[1, a], [b, c]]`, cross-checked against
/// the Kronecker construction.
pub fn impairment_mueller(a: Complex64, b: Complex64, c: Complex64) -> Result<MuellerMatrix> {
    check_magnitudes(a, b, c)?;
    let (na, nb, nc) = (a.norm_sqr(), b.norm_sqr(), c.norm_sqr());
    let bc = b * c.conj();
    let ac = a * c.conj();
    let ab = a * b.conj();
    #[rustfmt::skip]
    let m = MuellerMatrix(Matrix4::new(
        0.5 * (1.0 + na + nb + nc), 0.5 * (1.0 + nb - na - nc), (a + bc).re, -(a - bc).im,
        0.5 * (1.0 + na - nb - nc), 0.5 * (1.0 + nc - na - nb), (a - bc).re, -(a + bc).im,
        (b + ac).re, (b - ac).re, (c + ab).re, -(c + ab).im,
        (b - ac).im, (b + ac).im, (c - ab).im, (c - ab).re,
    ));
    let reference = jones_to_mueller(&JonesMatrix::new(Complex64::new(1.0, 0.0), a, b, c))?;
    let diff = m.max_abs_diff(&reference);
    if diff > CONSISTENCY_TOL {
        return Err(Error::InternalConsistency(format!("impairment matrix differs from Jones route by {diff:e}")));
    }
    Ok(m)
}

/// `M_G = M_Q · M_K`.
pub fn global_mueller(mq: &MuellerMatrix, mk: &MuellerMatrix) -> MuellerMatrix {
    *mq * *mk
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiEstimate {
    /// `1 − (M_G10/M11 + M_G20/M12 + M_G30/M13)/3`.
    pub radicand: f64,
    /// Square root of the radicand, when it is non-negative.
    pub xi: Option<f64>,
    /// Set when the radicand leaves `[0, 1]`.
    pub out_of_range: bool,
}

/// `√(1 − (M_G10/M11 + M_G20/M12 + M_G30/M13)/3)`, with `M_G` the global
/// matrix and `M1j` entries of the pattern matrix.
pub fn estimate_xi(mg: &MuellerMatrix, mk: &MuellerMatrix) -> Result<XiEstimate> {
    let denom = [mk.get(1, 1), mk.get(1, 2), mk.get(1, 3)];
    if denom.iter().any(|d| d.abs() <= 1e-12 || !d.is_finite()) {
        return Err(invalid(format!("pattern entries M11, M12, M13 must be non-zero, got {denom:?}")));
    }
    let ratio = (mg.get(1, 0) / denom[0] + mg.get(2, 0) / denom[1] + mg.get(3, 0) / denom[2]) / 3.0;
    let radicand = 1.0 - ratio;
    Ok(XiEstimate {
        radicand,
        xi: (radicand >= 0.0).then(|| radicand.sqrt()),
        out_of_range: !(0.0..=1.0).contains(&radicand),
    })
}

/// Encrypts one block and passes it through impairment, channel and noise.
pub fn transmit<R: Rng + ?Sized>(
    ctx: &CipherContext,
    cfg: &ChannelConfig,
    bits: &[u8],
    noise_rng: &mut R,
) -> Result<Vec<JonesVector>> {
    let sigma_w2 = cfg.sigma_w2();
    let std = (0.5 * sigma_w2).sqrt();
    let q = cfg.impairment.map(|i| i.jones());
    Ok(ctx
        .encrypt(bits)?
        .iter()
        .map(|e| {
            let impaired = q.map_or(*e, |q| q.apply(e));
            let y = cfg.channel.apply(&impaired);
            if sigma_w2 > 0.0 {
                awgn_unchecked(&y, std, noise_rng)
            } else {
                y
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bits_legit: Vec<u8>,
    pub bits_eve: Vec<u8>,
}

/// One block: transmit, then decode with the pattern inverse (legitimate)
/// and with no inverse (eavesdropper).
pub fn run_trial<R: Rng + ?Sized>(
    ctx: &CipherContext,
    cfg: &ChannelConfig,
    bits: &[u8],
    noise_rng: &mut R,
) -> Result<TrialOutcome> {
    let rx = transmit(ctx, cfg, bits, noise_rng)?;
    Ok(TrialOutcome { bits_legit: ctx.decrypt(&rx, &cfg.channel)?, bits_eve: ctx.eavesdrop(&rx, &cfg.channel)? })
}
