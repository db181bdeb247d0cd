//! Fixtures shared by the benchmarks under `benches/`.

use polcrypt::{shared_constellation, CipherContext, Result, SecretPattern};

/// Deterministic pseudo-random bits, padded to a whole number of symbols.
pub fn block(bits: usize, bits_per_symbol: usize, seed: u64) -> Vec<u8> {
    let mut x = seed | 1;
    let mut out: Vec<u8> = (0..bits)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 63) as u8
        })
        .collect();
    out.resize(bits.div_ceil(bits_per_symbol) * bits_per_symbol, 0);
    out
}

/// A fixed pattern of each scheme over the `m`-point constellation.
pub fn contexts(m: usize) -> Result<Vec<(&'static str, CipherContext)>> {
    let c = shared_constellation(m)?;
    Ok(vec![
        ("golden", CipherContext::new(SecretPattern::Golden { k: [0.3, 0.5, -0.7, 0.2] }, c.clone())?),
        ("rotation", CipherContext::new(SecretPattern::Rotation { alpha: 1.1, beta: 2.3, theta: 3.0 }, c.clone())?),
        ("opposite", CipherContext::new(SecretPattern::Opposite { variant: 1 }, c)?),
    ])
}
