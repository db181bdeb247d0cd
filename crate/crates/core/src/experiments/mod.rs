//! Monte-Carlo experiment families and their CSV records.
//!
//! Every random draw is addressed by `(seed, trial, purpose)`, and trial
//! index `t` uses the same payload, pattern and noise at every sweep point.
//! Work is split into fixed chunks of trials whose partial results are
//! combined in chunk order, so the output does not depend on the number of
//! workers.

mod config;
mod record;

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

pub use config::{
    ExperimentConfig, ExperimentKind, ImpairmentKind, SnrRange, ThetaRange, XiGrid, DEFAULT_BLOCK_BITS, DEFAULT_SEED,
    MIN_BITS_PER_POINT,
};
pub use record::{emit_csv, parse_csv, read_csv, to_csv_string, write_csv, ResultRecord, Role, BASE_COLUMNS};

use crate::channel::{
    estimate_xi, global_mueller, predicted_stokes_moments, simulate_stokes_moments, simulate_stokes_snr, stokes_snr,
    transmit, ChannelConfig, Impairment, SIGNAL_POWER,
};
use crate::constellation::{bits_to_label, label_to_bits, shared_constellation, SphereConstellation};
use crate::encipherment::{golden_mueller, CipherContext, Scheme, SecretPattern, ThetaSampling};
use crate::error::{Error, Result};
use crate::metrics::{amount_of_transformation, average_transformation, q_bounds};
use crate::mueller::{jones_to_mueller, JonesMatrix, MuellerMatrix};
use crate::polarization::StokesVector;
use crate::rng::{stream, Purpose};
use crate::validate::run_suite;

/// Trials per work unit.
pub const TRIAL_CHUNK: usize = 32;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Runs `cfg` on a pool of `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| config_err(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cfg.kind {
        ExperimentKind::BerSweep => ber_sweep(cfg),
        ExperimentKind::RotationSweep => rotation_sweep(cfg),
        ExperimentKind::QVsTrace => q_vs_trace(cfg),
        ExperimentKind::StokesStats => stokes_stats(cfg),
        ExperimentKind::SnrTransform => snr_transform(cfg),
        ExperimentKind::ImperfectionSweep => imperfection_sweep(cfg),
        ExperimentKind::Validate => validate(cfg),
    })
}

fn chunked<T: Send>(n: usize, f: impl Fn(Range<usize>) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n.div_ceil(TRIAL_CHUNK)).into_par_iter().map(|c| f(c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(n))).collect()
}

/// Seed for sweep point `i` of experiments that draw fresh samples per point.
fn point_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Counts {
    legit: u64,
    eve: u64,
    eve_wrong: u64,
    baseline: u64,
    bits: u64,
    sq_err: f64,
    symbols: u64,
}

impl Counts {
    fn merge(mut self, o: Counts) -> Counts {
        self.legit += o.legit;
        self.eve += o.eve;
        self.eve_wrong += o.eve_wrong;
        self.baseline += o.baseline;
        self.bits += o.bits;
        self.sq_err += o.sq_err;
        self.symbols += o.symbols;
        self
    }
}

/// Everything one BER sweep point needs.
struct BerPoint<'a> {
    cfg: &'a ExperimentConfig,
    constellation: Arc<SphereConstellation>,
    theta: ThetaSampling,
    channel: ChannelConfig,
    /// Also decode with the inverse of an unrelated pattern.
    wrong: bool,
    /// Also decode over the unencrypted link.
    baseline: bool,
    /// Accumulate the squared direction error of the legitimate receiver.
    distortion: bool,
}

fn count_errors(sent: &[u8], got: &[u8], payload: usize) -> u64 {
    sent[..payload].iter().zip(&got[..payload]).filter(|(a, b)| a != b).count() as u64
}

/// Label for a recovered Stokes vector. Falls back to the direction alone
/// when `S0` is not positive (a field that vanished without noise).
fn decide(c: &SphereConstellation, s: &StokesVector) -> usize {
    c.demap_label(s).unwrap_or_else(|_| c.labels()[c.nearest_point_unchecked(&s.reduced())])
}

impl BerPoint<'_> {
    fn payload(&self, t: usize) -> Vec<u8> {
        let k = self.constellation.bits_per_symbol();
        let padded = self.cfg.block_bits.div_ceil(k) * k;
        let mut rng = stream(self.cfg.seed, t as u64, Purpose::Payload);
        let mut bits: Vec<u8> = (0..self.cfg.block_bits).map(|_| rng.random_range(0..2u8)).collect();
        bits.resize(padded, 0);
        bits
    }

    fn context(&self, t: usize) -> Result<CipherContext> {
        if self.cfg.scheme == Scheme::None {
            return Ok(CipherContext::unencrypted(self.constellation.clone()));
        }
        let mut rng = stream(self.cfg.seed, t as u64, Purpose::Pattern);
        CipherContext::new(SecretPattern::random(self.cfg.scheme, self.theta, &mut rng)?, self.constellation.clone())
    }

    fn wrong_inverse(&self, t: usize) -> Result<MuellerMatrix> {
        let mut rng = stream(self.cfg.seed, t as u64, Purpose::WrongPattern);
        let m = SecretPattern::random(self.cfg.scheme, self.theta, &mut rng)?.mueller()?;
        m.try_inverse().ok_or_else(|| Error::CipherIntegrity("wrong pattern is singular".into()))
    }

    fn trial(&self, t: usize) -> Result<Counts> {
        let bits = self.payload(t);
        let payload = self.cfg.block_bits;
        let ctx = self.context(t)?;
        let h = &self.channel.channel;
        let mut noise = stream(self.cfg.seed, t as u64, Purpose::Noise);
        let mut baseline_noise = noise.clone();
        let rx = transmit(&ctx, &self.channel, &bits, &mut noise)?;

        let c = &*self.constellation;
        let k = c.bits_per_symbol();
        let recovered = ctx.recover_stokes(&rx, h, ctx.mueller_inverse())?;
        let mut legit_bits = Vec::with_capacity(bits.len());
        let mut sq_err = 0.0;
        for (s, sent) in recovered.iter().zip(bits.chunks(k)) {
            legit_bits.extend(label_to_bits(decide(c, s), k));
            if self.distortion {
                let truth = c.symbol(bits_to_label(sent)?)?.reduced();
                let r = s.reduced();
                let norm = r.norm();
                // A vanished field carries no direction: count it as orthogonal.
                sq_err += if norm > 0.0 { (r / norm - truth).norm_squared() } else { 2.0 };
            }
        }

        let mut out = Counts {
            legit: count_errors(&bits, &legit_bits, payload),
            bits: payload as u64,
            sq_err,
            symbols: rx.len() as u64,
            ..Counts::default()
        };
        out.eve = if ctx.scheme() == Scheme::None {
            out.legit
        } else {
            count_errors(&bits, &ctx.eavesdrop(&rx, h)?, payload)
        };
        if self.wrong && ctx.scheme() != Scheme::None {
            out.eve_wrong = count_errors(&bits, &ctx.decrypt_with(&rx, h, &self.wrong_inverse(t)?)?, payload);
        }
        if self.baseline {
            out.baseline = if ctx.scheme() == Scheme::None {
                out.legit
            } else {
                let plain = CipherContext::unencrypted(self.constellation.clone());
                let rx = transmit(&plain, &self.channel, &bits, &mut baseline_noise)?;
                count_errors(&bits, &plain.decrypt(&rx, h)?, payload)
            };
        }
        Ok(out)
    }

    fn run(&self) -> Result<Counts> {
        let parts = chunked(self.cfg.trials(), |range| {
            range.map(|t| self.trial(t)).try_fold(Counts::default(), |acc, c| Ok(acc.merge(c?)))
        })?;
        Ok(parts.into_iter().fold(Counts::default(), Counts::merge))
    }
}

fn ber_record(
    cfg: &ExperimentConfig,
    snr_db: f64,
    parameter: Option<f64>,
    role: Role,
    errors: u64,
    bits: u64,
) -> ResultRecord {
    let mut r = ResultRecord::new(cfg.kind, cfg.scheme, cfg.m, role).with_counts(errors, bits);
    r.snr_db = Some(snr_db);
    r.parameter = parameter;
    let se = r.ber_std_error();
    r.with_aux("std_error", se)
}

fn ber_records(
    cfg: &ExperimentConfig,
    snr_db: f64,
    parameter: Option<f64>,
    c: &Counts,
    wrong: bool,
) -> Vec<ResultRecord> {
    let mut out = vec![
        ber_record(cfg, snr_db, parameter, Role::Legit, c.legit, c.bits),
        ber_record(cfg, snr_db, parameter, Role::Eve, c.eve, c.bits),
    ];
    if wrong && cfg.scheme != Scheme::None {
        out.push(ber_record(cfg, snr_db, parameter, Role::EveWrong, c.eve_wrong, c.bits));
    }
    out.push(ber_record(cfg, snr_db, parameter, Role::Baseline, c.baseline, c.bits));
    out
}

fn ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let (theta, parameter) = match cfg.theta {
        None if cfg.scheme == Scheme::Rotation => {
            (ThetaSampling::Fixed(std::f64::consts::PI), Some(std::f64::consts::PI))
        }
        None => (ThetaSampling::Uniform, None),
        Some(range) => {
            let pts = range.points()?;
            if pts.len() != 1 {
                return Err(config_err("ber_sweep takes a single theta; use rotation_sweep for a range"));
            }
            (ThetaSampling::Fixed(pts[0]), Some(pts[0]))
        }
    };
    let constellation = shared_constellation(cfg.m)?;
    let mut out = Vec::new();
    for snr in cfg.snr_db.points()? {
        let point = BerPoint {
            cfg,
            constellation: constellation.clone(),
            theta,
            channel: ChannelConfig::new(snr)?,
            wrong: true,
            baseline: true,
            distortion: false,
        };
        out.extend(ber_records(cfg, snr, parameter, &point.run()?, true));
    }
    Ok(out)
}

fn rotation_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let thetas = cfg.theta.ok_or_else(|| config_err("rotation_sweep requires a theta range"))?.points()?;
    let constellation = shared_constellation(cfg.m)?;
    let mut out = Vec::new();
    for snr in cfg.snr_db.points()? {
        for (i, &theta) in thetas.iter().enumerate() {
            let point = BerPoint {
                cfg,
                constellation: constellation.clone(),
                theta: ThetaSampling::Fixed(theta),
                channel: ChannelConfig::new(snr)?,
                wrong: false,
                // The unencrypted link does not depend on θ.
                baseline: i == 0,
                distortion: false,
            };
            let counts = point.run()?;
            let mut recs = ber_records(cfg, snr, Some(theta), &counts, false);
            if i != 0 {
                recs.retain(|r| r.role != Role::Baseline);
            }
            out.extend(recs);
        }
    }
    Ok(out)
}

/// One random matrix: a passive Jones-generated matrix for the unencrypted
/// scheme, a random pattern otherwise.
fn random_matrix(cfg: &ExperimentConfig, i: usize) -> Result<MuellerMatrix> {
    match cfg.scheme {
        Scheme::None => {
            jones_to_mueller(&JonesMatrix::random_passive(&mut stream(cfg.seed, i as u64, Purpose::Matrix)))
        }
        s => SecretPattern::random(s, ThetaSampling::Uniform, &mut stream(cfg.seed, i as u64, Purpose::Pattern))?
            .mueller(),
    }
}

fn q_vs_trace(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let constellation = shared_constellation(cfg.m)?;
    let parts = chunked(cfg.trials(), |range| {
        range
            .map(|i| {
                let m = random_matrix(cfg, i)?;
                let (lo, hi) = q_bounds(&m);
                let mut r = ResultRecord::new(cfg.kind, cfg.scheme, cfg.m, Role::Model);
                r.parameter = Some(m.trace());
                Ok(r.with_aux("q", amount_of_transformation(&m))
                    .with_aux("q_lower", lo)
                    .with_aux("q_upper", hi)
                    .with_aux("p_avg", average_transformation(&m, &constellation, None)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}

fn moment_record(
    cfg: &ExperimentConfig,
    snr_db: f64,
    gamma: f64,
    role: Role,
    mean: [f64; 4],
    var: [f64; 4],
) -> ResultRecord {
    let mut r = ResultRecord::new(cfg.kind, cfg.scheme, cfg.m, role);
    r.snr_db = Some(snr_db);
    r.parameter = Some(gamma);
    for (i, v) in mean.iter().enumerate() {
        r = r.with_aux(["mean0", "mean1", "mean2", "mean3"][i], *v);
    }
    for (i, v) in var.iter().enumerate() {
        r = r.with_aux(["var0", "var1", "var2", "var3"][i], *v);
    }
    r.with_aux("var2_minus_var0", var[2] - var[0])
}

fn finite_gamma(snr_db: f64) -> Result<f64> {
    let g = 10f64.powf(snr_db / 10.0);
    if !(g > 0.0 && g.is_finite()) {
        return Err(config_err(format!("SNR {snr_db} dB is outside the usable range for Stokes statistics")));
    }
    Ok(g)
}

/// Stokes moments at `P_x = 1/2`, `σ_w² = P_x/γ`.
fn stokes_stats(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for (i, snr) in cfg.snr_db.points()?.into_iter().enumerate() {
        let gamma = finite_gamma(snr)?;
        let sigma_w2 = SIGNAL_POWER / gamma;
        let model = predicted_stokes_moments(SIGNAL_POWER, sigma_w2)?;
        let sim = simulate_stokes_moments(SIGNAL_POWER, sigma_w2, cfg.trials().max(2), point_seed(cfg.seed, i))?;
        out.push(moment_record(cfg, snr, gamma, Role::Model, model.mean, model.variance));
        out.push(moment_record(cfg, snr, gamma, Role::Empirical, sim.mean, sim.variance));
    }
    Ok(out)
}

fn snr_transform(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for (i, snr) in cfg.snr_db.points()?.into_iter().enumerate() {
        let gamma = finite_gamma(snr)?;
        for (role, v) in [
            (Role::Model, stokes_snr(gamma)?),
            (Role::Empirical, simulate_stokes_snr(gamma, cfg.trials(), point_seed(cfg.seed, i))?),
        ] {
            let mut r = ResultRecord::new(cfg.kind, cfg.scheme, cfg.m, role);
            r.snr_db = Some(snr);
            r.parameter = Some(gamma);
            for (j, x) in v.iter().enumerate() {
                r = r.with_aux(["snr0", "snr1", "snr2", "snr3"][j], *x);
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Reference pattern for the ξ estimator diagnostics; its entries
/// `M11, M12, M13` are all non-zero.
const XI_REFERENCE: [f64; 4] = [0.0, 1.0, 1.0, 1.0];

fn impairment_for(kind: ImpairmentKind, xi: Complex64) -> Impairment {
    match kind {
        ImpairmentKind::CrossPol => Impairment::CrossPol(xi),
        ImpairmentKind::Unbalanced => Impairment::Unbalanced(xi),
    }
}

/// SNR in dB of the recovered symbol direction: `1/MSE` with MSE the
/// mean squared distance between the normalized recovered reduced Stokes
/// vector and the transmitted point.
fn direction_snr_db(c: &Counts) -> f64 {
    let mse = c.sq_err / c.symbols.max(1) as f64;
    -10.0 * mse.log10()
}

fn imperfection_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let grid = cfg.xi.ok_or_else(|| config_err("imperfection_sweep requires a ξ grid"))?;
    let xis = grid.points()?;
    let constellation = shared_constellation(cfg.m)?;
    let reference = golden_mueller(XI_REFERENCE)?;
    let theta = cfg.theta.map_or(ThetaSampling::Uniform, |t| ThetaSampling::Fixed(t.start));
    let mut out = Vec::new();
    for snr in cfg.snr_db.points()? {
        let mut ideal_db = None;
        for &xi in &xis {
            let impairment = impairment_for(grid.kind, xi);
            let point = BerPoint {
                cfg,
                constellation: constellation.clone(),
                theta,
                channel: ChannelConfig::new(snr)?.with_impairment(impairment)?,
                wrong: false,
                baseline: false,
                distortion: true,
            };
            let counts = point.run()?;
            let post_db = direction_snr_db(&counts);
            let ideal = *ideal_db.get_or_insert(post_db);
            let degradation = if ideal == post_db { 0.0 } else { ideal - post_db };
            let mut r = ber_record(cfg, snr, Some(xi.norm()), Role::Legit, counts.legit, counts.bits)
                .with_aux("xi_re", xi.re)
                .with_aux("xi_im", xi.im)
                .with_aux("post_snr_db", post_db)
                .with_aux("degradation_db", degradation);
            r.experiment = cfg.kind;
            out.push(r);

            let est = estimate_xi(&global_mueller(&impairment.mueller()?, &reference), &reference)?;
            let mut check = ResultRecord::new(cfg.kind, cfg.scheme, cfg.m, Role::Check);
            check.snr_db = Some(snr);
            check.parameter = Some(xi.norm());
            out.push(
                check
                    .with_aux("xi_re", xi.re)
                    .with_aux("xi_im", xi.im)
                    .with_aux("radicand", est.radicand)
                    .with_aux("xi_estimate", est.radicand.max(0.0).sqrt())
                    .with_aux("out_of_range", if est.out_of_range { 1.0 } else { 0.0 }),
            );
        }
    }
    Ok(out)
}

fn validate(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    Ok(run_suite(cfg.trials(), cfg.seed)
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut r = ResultRecord::new(cfg.kind, Scheme::None, cfg.m, Role::Check).with_counts(c.failures, c.cases);
            r.parameter = Some(i as f64);
            r.with_aux(c.name, c.worst).with_aux("tolerance", c.tolerance)
        })
        .collect())
}

/// True when every `validate` record reports zero failures.
pub fn all_checks_passed(records: &[ResultRecord]) -> bool {
    records.iter().filter(|r| r.role == Role::Check && r.experiment == ExperimentKind::Validate).all(|r| r.errors == 0)
}
