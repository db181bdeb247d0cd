//! Strength metrics: the amount of transformation 𝒬 over the whole sphere
//! and the average transformation 𝒫 over a constellation.
//!
//! Both measure `‖(M − I)·S‖²` for unit-energy inputs `S = (1, S̄)`. 𝒬
//! integrates it over the sphere surface with total mass 4π; 𝒫 averages it
//! over constellation symbols.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::constellation::SphereConstellation;
use crate::error::{invalid, Result};
use crate::mueller::MuellerMatrix;
use crate::rng::{stream, Purpose};

/// Samples per Monte-Carlo shard. Fixed so results do not depend on the
/// number of workers.
pub const MC_SHARD: usize = 4096;

const PROB_TOL: f64 = 1e-12;

/// `(M − I)ᵀ (M − I)`.
pub fn displacement_matrix(m: &MuellerMatrix) -> Matrix4<f64> {
    let e = m.0 - Matrix4::identity();
    e.transpose() * e
}

/// `4π (D00 + (D11 + D22 + D33)/3)`.
pub fn amount_of_transformation(m: &MuellerMatrix) -> f64 {
    let d = displacement_matrix(m);
    4.0 * PI * (d[(0, 0)] + (d[(1, 1)] + d[(2, 2)] + d[(3, 3)]) / 3.0)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// 𝒬 by uniform sampling of the sphere (normalized Gaussian directions).
/// Deterministic for a given seed regardless of thread count.
pub fn amount_of_transformation_mc(m: &MuellerMatrix, n: usize, seed: u64) -> Result<McEstimate> {
    if n < 1000 {
        return Err(invalid(format!("at least 1000 samples required, got {n}")));
    }
    let e = m.0 - Matrix4::identity();
    let shards = n.div_ceil(MC_SHARD);
    let partial: Vec<(f64, f64)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream(seed, shard as u64, Purpose::Sphere);
            let count = MC_SHARD.min(n - shard * MC_SHARD);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let u = uniform_direction(&mut rng);
                let v = (e * Vector4::new(1.0, u.x, u.y, u.z)).norm_squared();
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Ok(McEstimate { estimate: 4.0 * PI * mean, std_error: 4.0 * PI * (var / nf).sqrt() })
}

/// Uniform point on the unit sphere.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> =
            Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `((4π/3)‖M − I‖², 8π‖M − I‖²)`.
pub fn q_bounds(m: &MuellerMatrix) -> (f64, f64) {
    let f = (m.0 - Matrix4::identity()).norm_squared();
    (4.0 * PI / 3.0 * f, 8.0 * PI * f)
}

/// `Σ Sₙᵀ D Sₙ P(Sₙ)` over the constellation symbols `Sₙ = (1, S̄ₙ)`,
/// equiprobable when `probs` is `None`.
pub fn average_transformation(m: &MuellerMatrix, c: &SphereConstellation, probs: Option<&[f64]>) -> Result<f64> {
    let size = c.size();
    let uniform = vec![1.0 / size as f64; size];
    let probs = match probs {
        None => uniform.as_slice(),
        Some(p) => {
            if p.len() != size {
                return Err(invalid(format!("{} probabilities for {size} symbols", p.len())));
            }
            if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(invalid("probabilities must be finite and non-negative"));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(invalid(format!("probabilities sum to {total}, not 1")));
            }
            p
        }
    };
    let d = displacement_matrix(m);
    Ok(c.points()
        .iter()
        .zip(probs)
        .map(|(p, w)| {
            let s = Vector4::new(1.0, p.x, p.y, p.z);
            w * (s.transpose() * d * s)[(0, 0)]
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformationReport {
    pub q_closed: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    pub q_mc: Option<McEstimate>,
    pub p_avg: f64,
}

/// All metrics for one matrix. `mc` gives `(samples, seed)` for the
/// Monte-Carlo cross-check.
pub fn transformation_report(
    m: &MuellerMatrix,
    c: &SphereConstellation,
    mc: Option<(usize, u64)>,
) -> Result<TransformationReport> {
    let (q_lower, q_upper) = q_bounds(m);
    let q_mc = mc.map(|(n, seed)| amount_of_transformation_mc(m, n, seed)).transpose()?;
    Ok(TransformationReport {
        q_closed: amount_of_transformation(m),
        q_lower,
        q_upper,
        q_mc,
        p_avg: average_transformation(m, c, None)?,
    })
}
