//! Invariant suite run by the `validate` experiment. Each check draws its
//! own random cases and reports the worst residual it saw.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{impairment_mueller, predicted_stokes_moments, stokes_snr};
use crate::constellation::{label_to_bits, shared_constellation};
use crate::encipherment::{
    golden_mueller, golden_mueller_via_jones, opposite_mueller, rotation_mueller, CipherContext, Scheme, SecretPattern,
    ThetaSampling,
};
use crate::error::Result;
use crate::metrics::{amount_of_transformation, q_bounds};
use crate::mueller::{
    check_physical, coherency_from_mueller, determinant_line_residuals, jones_to_mueller, mueller_from_coherency,
    JonesMatrix, MuellerMatrix,
};
use crate::polarization::{jones_to_stokes, stokes_to_jones, JonesVector};
use crate::rng::{stream, Purpose, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: u64,
    pub failures: u64,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: u64,
    failures: u64,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, cases: 0, failures: 0, worst: 0.0 }
    }

    /// Records a residual; NaN counts as a failure.
    fn residual(&mut self, r: f64) {
        self.cases += 1;
        if !(r <= self.tolerance) {
            self.failures += 1;
        }
        self.worst = if r.is_nan() || self.worst.is_nan() { f64::NAN } else { self.worst.max(r) };
    }

    fn truth(&mut self, ok: bool) {
        self.residual(if ok { 0.0 } else { f64::INFINITY });
    }

    fn fallible(&mut self, r: Result<f64>) {
        self.residual(r.unwrap_or(f64::INFINITY));
    }

    fn done(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

fn gauss_c(rng: &mut StreamRng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_jones(rng: &mut StreamRng) -> JonesMatrix {
    JonesMatrix::new(gauss_c(rng), gauss_c(rng), gauss_c(rng), gauss_c(rng))
}

fn random_field(rng: &mut StreamRng) -> JonesVector {
    JonesVector::new(gauss_c(rng), gauss_c(rng))
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Runs every check with `cases` random cases each.
pub fn run_suite(cases: usize, seed: u64) -> Vec<CheckOutcome> {
    let n = cases.max(1) as u64;
    let rng_for = |i: u64| stream(seed, i, Purpose::Matrix);
    let mut out = Vec::new();

    let mut t = Tally::new("stokes_jones_round_trip", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        let s = random_field(&mut rng).to_stokes();
        t.fallible(
            stokes_to_jones(&s)
                .and_then(|e| jones_to_stokes(&e))
                .map(|back| rel((back.to_vector() - s.to_vector()).amax(), s.s0)),
        );
    }
    out.push(t.done());

    let mut t = Tally::new("commuting_diagram", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        let (j, e) = (random_jones(&mut rng), random_field(&mut rng));
        t.fallible(jones_to_mueller(&j).map(|m| {
            let direct = j.apply(&e).to_stokes();
            rel((m.apply(&e.to_stokes()).to_vector() - direct.to_vector()).norm(), direct.to_vector().norm())
        }));
    }
    out.push(t.done());

    let mut t = Tally::new("mueller_homomorphism", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        let (a, b) = (random_jones(&mut rng), random_jones(&mut rng));
        t.fallible((|| {
            let ab = jones_to_mueller(&(a * b))?;
            let prod = jones_to_mueller(&a)? * jones_to_mueller(&b)?;
            Ok(rel(ab.max_abs_diff(&prod), ab.0.amax()))
        })());
    }
    out.push(t.done());

    let mut t = Tally::new("coherency_round_trip", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        t.fallible((|| {
            let m = jones_to_mueller(&random_jones(&mut rng))?;
            let back = mueller_from_coherency(&coherency_from_mueller(&m))?;
            Ok(rel(back.max_abs_diff(&m), m.0.amax()))
        })());
    }
    out.push(t.done());

    let mut powers = Tally::new("trace_of_powers_non_negative", 1e-12);
    let mut lines = Tally::new("determinant_line_identities", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        let Ok(m) = jones_to_mueller(&JonesMatrix::random_passive(&mut rng)) else {
            powers.truth(false);
            lines.truth(false);
            continue;
        };
        let mut p = MuellerMatrix::identity();
        let mut worst = 0.0f64;
        for _ in 0..3 {
            p = p * m;
            worst = worst.max(-p.trace());
        }
        powers.residual(worst);
        let scale = m.get(0, 0).powi(4);
        lines.residual(determinant_line_residuals(&m).iter().fold(0.0f64, |a, &r| a.max(rel(r, scale))));
    }
    out.push(powers.done());
    out.push(lines.done());

    let mut t = Tally::new("golden_suite", 1e-9);
    let mut trace = Tally::new("golden_trace", 1e-12);
    for i in 0..n {
        let mut rng = stream(seed, i, Purpose::Pattern);
        let residual = (|| {
            let SecretPattern::Golden { k } = SecretPattern::random(Scheme::Golden, ThetaSampling::Uniform, &mut rng)?
            else {
                unreachable!("golden scheme yields golden patterns")
            };
            let m = golden_mueller(k)?;
            trace.residual(m.trace().abs());
            let r = check_physical(&m);
            let ev = r.eigenvalues;
            let worst = [
                (m.frobenius_norm_sq() - 4.0).abs(),
                (r.g_f - 1.0).abs(),
                (r.g_r - 1.0).abs(),
                (ev[0] - 1.0).abs(),
                ev[1].abs(),
                ev[2].abs(),
                ev[3].abs(),
                m.max_abs_diff(&golden_mueller_via_jones(k)?),
            ];
            Ok(worst.into_iter().fold(0.0f64, f64::max))
        })();
        t.fallible(residual);
    }
    out.push(t.done());
    out.push(trace.done());

    let mut t = Tally::new("golden_amount_of_transformation", 1e-9);
    for i in 0..n {
        let mut rng = stream(seed, i, Purpose::Pattern);
        t.fallible(
            SecretPattern::random(Scheme::Golden, ThetaSampling::Uniform, &mut rng)
                .and_then(|p| p.mueller())
                .map(|m| (amount_of_transformation(&m) - 32.0 * PI / 3.0).abs()),
        );
    }
    out.push(t.done());

    let mut t = Tally::new("transformation_bounds", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        t.fallible(jones_to_mueller(&JonesMatrix::random_passive(&mut rng)).map(|m| {
            let q = amount_of_transformation(&m);
            let (lo, hi) = q_bounds(&m);
            (lo - q).max(q - hi).max(q - 64.0 * PI).max(0.0)
        }));
    }
    out.push(t.done());

    let mut t = Tally::new("rotation_trace", 1e-12);
    for i in 0..100 {
        let theta = TAU * i as f64 / 99.0;
        let mut rng = stream(seed, i, Purpose::Pattern);
        let (alpha, beta) = (rng.random_range(0.0..PI), rng.random_range(0.0..TAU));
        t.fallible(rotation_mueller(alpha, beta, theta).map(|m| (m.trace() - 2.0 * (1.0 + theta.cos())).abs()));
    }
    out.push(t.done());

    let mut t = Tally::new("opposite_patterns", 0.0);
    for v in 0..3 {
        t.truth(CipherContext::new(SecretPattern::Opposite { variant: v }, shared_constellation(8).unwrap()).is_ok());
    }
    t.truth(opposite_mueller(3).is_err());
    t.truth(!check_physical(&MuellerMatrix::from_diagonal([1.0, -1.0, -1.0, -1.0])).eigenvalue_ok);
    out.push(t.done());

    let mut t = Tally::new("noiseless_round_trip", 0.0);
    let blocks = n.div_ceil(10);
    for m in [4usize, 8, 16, 32] {
        let c = shared_constellation(m).unwrap();
        let k = c.bits_per_symbol();
        for scheme in [Scheme::Golden, Scheme::Rotation, Scheme::Opposite] {
            for b in 0..blocks {
                let mut rng = stream(seed, b, Purpose::Payload);
                let bits: Vec<u8> = (0..64usize.div_ceil(k) * k).map(|_| rng.random_range(0..2u8)).collect();
                let ok = SecretPattern::random(scheme, ThetaSampling::Uniform, &mut rng)
                    .and_then(|p| CipherContext::new(p, c.clone()))
                    .and_then(|ctx| ctx.decrypt(&ctx.encrypt(&bits)?, &JonesMatrix::identity()))
                    .is_ok_and(|got| got == bits);
                t.truth(ok);
            }
        }
        t.truth((0..c.size()).all(|l| c.demap(&c.symbol(l).unwrap()).unwrap() == label_to_bits(l, k)));
    }
    out.push(t.done());

    let mut t = Tally::new("impairment_consistency", 1e-9);
    for i in 0..n {
        let mut rng = rng_for(i);
        let mut draw = || {
            let z = gauss_c(&mut rng);
            z / (1.0 + z.norm())
        };
        let (a, b, c) = (draw(), draw(), draw());
        t.fallible((|| {
            let closed = impairment_mueller(a, b, c)?;
            let route = jones_to_mueller(&JonesMatrix::new(Complex64::new(1.0, 0.0), a, b, c))?;
            Ok(closed.max_abs_diff(&route))
        })());
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    t.fallible(impairment_mueller(zero, zero, one).map(|m| m.max_abs_diff(&MuellerMatrix::identity())));
    out.push(t.done());

    let mut t = Tally::new("stokes_snr_crossover", 1e-15);
    t.fallible(stokes_snr(0.5).map(|s| (s[0] - 0.125).abs().max((s[2] - 0.125).abs()).max(s[1].abs())));
    for g in [0.1, 1.0, 10.0, 1e6] {
        t.fallible(stokes_snr(g).map(|s| s[1].abs()));
    }
    out.push(t.done());

    let mut t = Tally::new("stokes_variance_gap", 1e-12);
    for i in 0..n {
        let mut rng = rng_for(i);
        let (p, s) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        t.fallible(predicted_stokes_moments(p, s).map(|m| {
            let v = m.variance;
            (v[2] - v[0] - 2.0 * p * p).abs() + (v[0] - v[1]).abs() + (v[2] - v[3]).abs()
        }));
    }
    out.push(t.done());

    let mut t = Tally::new("golden_isotropy_average", 1e-9);
    let tetra = shared_constellation(4).unwrap();
    for i in 0..n.min(100) {
        let mut rng = stream(seed, i, Purpose::Pattern);
        t.fallible(
            SecretPattern::random(Scheme::Golden, ThetaSampling::Uniform, &mut rng).and_then(|p| p.mueller()).map(
                |m| {
                    let e = m.0 - Matrix4::identity();
                    let d = e.transpose() * e;
                    let p: f64 = tetra
                        .points()
                        .iter()
                        .map(|x| {
                            let s = Vector4::new(1.0, x.x, x.y, x.z);
                            (s.transpose() * d * s)[(0, 0)] / 4.0
                        })
                        .sum();
                    (amount_of_transformation(&m) - 4.0 * PI * p).abs()
                },
            ),
        );
    }
    out.push(t.done());

    out
}
