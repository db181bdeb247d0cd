//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use polcrypt::channel::{impairment_mueller, simulate_stokes_moments, simulate_stokes_snr, stokes_snr, SIGNAL_POWER};
use polcrypt::experiments::{
    run_experiment, to_csv_string, ExperimentConfig, ExperimentKind, ImpairmentKind, ResultRecord, Role, SnrRange,
    ThetaRange, XiGrid,
};
use polcrypt::metrics::{amount_of_transformation, amount_of_transformation_mc, q_bounds};
use polcrypt::rng::{stream, Purpose};
use polcrypt::{
    check_physical, coherency_from_mueller, determinant_line_residuals, golden_mueller, jones_to_mueller,
    opposite_mueller, rotation_mueller, shared_constellation, CipherContext, JonesMatrix, MuellerMatrix, Scheme,
    SecretPattern, ThetaSampling,
};
use rand::Rng;
use rand_distr::StandardNormal;

type Rng8 = polcrypt::rng::StreamRng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gauss(rng: &mut Rng8) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss_c(rng: &mut Rng8) -> Complex64 {
    c(gauss(rng), gauss(rng))
}

fn random_jones(rng: &mut Rng8) -> JonesMatrix {
    JonesMatrix::new(gauss_c(rng), gauss_c(rng), gauss_c(rng), gauss_c(rng))
}

/// Stokes vector written out from the field components.
fn stokes_oracle(ex: Complex64, ey: Complex64) -> Vector4<f64> {
    let cross = ex * ey.conj();
    Vector4::new(ex.norm_sqr() + ey.norm_sqr(), ex.norm_sqr() - ey.norm_sqr(), 2.0 * cross.re, -2.0 * cross.im)
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
        }
        o.detail = format!("{}; {:.2}s (limit {:.0}s)", o.detail, took.as_secs_f64(), limit.as_secs_f64());
    } else {
        o.detail = format!("{}; {:.2}s", o.detail, took.as_secs_f64());
    }
    o
}

fn commuting_diagram() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let mut rng = stream(101, i, Purpose::Matrix);
        let j = random_jones(&mut rng);
        let (ex, ey) = (gauss_c(&mut rng), gauss_c(&mut rng));
        let m = jones_to_mueller(&j).unwrap();
        let s_in = stokes_oracle(ex, ey);
        let out = j.0 * Matrix2::new(ex, c(0.0, 0.0), ey, c(0.0, 0.0));
        let direct = stokes_oracle(out[(0, 0)], out[(1, 0)]);
        let r = (m.0 * s_in - direct).norm() / direct.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(r);
    }
    outcome(worst <= 1e-9, format!("worst relative residual {worst:.2e} (tol 1e-9)"))
}

fn golden_suite() -> Outcome {
    let (mut tr, mut frob, mut gain, mut eig, mut jones) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let sigma = |n: usize| -> Matrix2<Complex64> {
        let (o, z, j) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match n {
            1 => Matrix2::new(o, z, z, -o),
            2 => Matrix2::new(z, o, o, z),
            _ => Matrix2::new(z, -j, j, z),
        }
    };
    for i in 0..10_000 {
        let mut rng = stream(102, i, Purpose::Pattern);
        let k = [rng.random_range(0.0..TAU), gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)];
        let m = golden_mueller(k).unwrap();
        let r = check_physical(&m);
        tr = tr.max(m.trace().abs());
        frob = frob.max((m.frobenius_norm_sq() - 4.0).abs());
        gain = gain.max((r.g_f - 1.0).abs()).max((r.g_r - 1.0).abs());
        let ev = coherency_from_mueller(&m).eigenvalues();
        eig = eig.max((ev[0] - 1.0).abs()).max(ev[1].abs()).max(ev[2].abs()).max(ev[3].abs());
        let norm = (k[1] * k[1] + k[2] * k[2] + k[3] * k[3]).sqrt();
        let j = (sigma(1) * c(k[1], 0.0) + sigma(2) * c(k[2], 0.0) + sigma(3) * c(k[3], 0.0)) / c(norm, 0.0);
        jones = jones.max(m.max_abs_diff(&jones_to_mueller(&JonesMatrix(j)).unwrap()));
    }
    let pass = tr <= 1e-12 && frob <= 1e-9 && gain <= 1e-9 && eig <= 1e-9 && jones <= 1e-9;
    outcome(
        pass,
        format!("|tr| {tr:.1e}, ‖M‖²−4 {frob:.1e}, gains {gain:.1e}, eigenvalues {eig:.1e}, Jones route {jones:.1e}"),
    )
}

/// 𝒬 by sampling `z = cos ϑ` and azimuth uniformly, independent of the
/// library sampler.
fn q_oracle(m: &MuellerMatrix, n: usize, seed: u64) -> f64 {
    let e = m.0 - Matrix4::identity();
    let mut rng = stream(seed, 0, Purpose::Sphere);
    let mut sum = 0.0;
    for _ in 0..n {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..TAU);
        let rho = (1.0 - z * z).sqrt();
        sum += (e * Vector4::new(1.0, rho * phi.cos(), rho * phi.sin(), z)).norm_squared();
    }
    4.0 * PI * sum / n as f64
}

fn amount_of_transformation_checks() -> Outcome {
    let target = 32.0 * PI / 3.0;
    let mut closed = 0.0f64;
    for i in 0..1000 {
        let mut rng = stream(103, i, Purpose::Pattern);
        let p = SecretPattern::random(Scheme::Golden, ThetaSampling::Uniform, &mut rng).unwrap();
        closed = closed.max((amount_of_transformation(&p.mueller().unwrap()) - target).abs());
    }
    let g = golden_mueller([0.4, 0.3, -1.2, 0.7]).unwrap();
    let lib_mc = amount_of_transformation_mc(&g, 100_000, 7).unwrap().estimate;
    let oracle_mc = q_oracle(&g, 100_000, 8);
    let mc_err = ((lib_mc - target) / target).abs().max(((oracle_mc - target) / target).abs());
    let (mut bracket, mut cap) = (true, true);
    for i in 0..10_000 {
        let mut rng = stream(103, i, Purpose::Matrix);
        let m = jones_to_mueller(&JonesMatrix::random_passive(&mut rng)).unwrap();
        let q = amount_of_transformation(&m);
        let (lo, hi) = q_bounds(&m);
        bracket &= lo <= q + 1e-9 && q <= hi + 1e-9;
        cap &= q <= 64.0 * PI + 1e-9;
        if i < 50 {
            let mc = q_oracle(&m, 20_000, 1000 + i);
            bracket &= (mc - q).abs() <= 0.05 * q.max(1.0);
        }
    }
    outcome(
        closed <= 1e-9 && mc_err <= 0.01 && bracket && cap,
        format!("|𝒬−32π/3| {closed:.1e}, MC rel err {mc_err:.2e} (tol 1e-2), bounds hold {bracket}, 𝒬 ≤ 64π {cap}"),
    )
}

fn rotation_checks() -> Outcome {
    let grid: Vec<f64> = (0..100).map(|i| TAU * i as f64 / 100.0).collect();
    let mut tr = 0.0f64;
    let mut argmax_ok = true;
    for axis in 0..5u64 {
        let mut rng = stream(104, axis, Purpose::Pattern);
        let (alpha, beta) = (rng.random_range(0.0..PI), rng.random_range(0.0..TAU));
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &t in &grid {
            let m = rotation_mueller(alpha, beta, t).unwrap();
            tr = tr.max((m.trace() - 2.0 * (1.0 + t.cos())).abs());
            let q = amount_of_transformation(&m);
            if q > best.0 + 1e-12 {
                best = (q, t);
            }
        }
        argmax_ok &= best.1 == PI;
    }
    outcome(tr <= 1e-12 && argmax_ok, format!("trace residual {tr:.1e} (tol 1e-12), 𝒬 peaks at θ=π: {argmax_ok}"))
}

fn opposite_checks() -> Outcome {
    let mut usable = Vec::new();
    for bits in 0..8u8 {
        let signs = [
            1.0,
            if bits & 4 != 0 { -1.0 } else { 1.0 },
            if bits & 2 != 0 { -1.0 } else { 1.0 },
            if bits & 1 != 0 { -1.0 } else { 1.0 },
        ];
        let m = MuellerMatrix::from_diagonal(signs);
        if m != MuellerMatrix::identity() && check_physical(&m).golden {
            usable.push(m);
        }
    }
    let built: Vec<MuellerMatrix> = (0..3).map(|v| opposite_mueller(v).unwrap()).collect();
    let same = usable.len() == 3 && built.iter().all(|b| usable.contains(b));
    let contexts = (0..3)
        .all(|v| CipherContext::new(SecretPattern::Opposite { variant: v }, shared_constellation(8).unwrap()).is_ok());
    let inversion_rejected = !check_physical(&MuellerMatrix::from_diagonal([1.0, -1.0, -1.0, -1.0])).eigenvalue_ok;
    outcome(
        same && contexts && inversion_rejected && opposite_mueller(3).is_err(),
        format!("golden non-identity sign patterns {}, match constructors {same}, diag(1,−1,−1,−1) rejected {inversion_rejected}", usable.len()),
    )
}

fn round_trip() -> Outcome {
    let mut failures = 0;
    let mut cases = 0;
    for m in [4usize, 8, 16, 32] {
        let cst = shared_constellation(m).unwrap();
        let k = cst.bits_per_symbol();
        for scheme in [Scheme::Golden, Scheme::Rotation, Scheme::Opposite] {
            for b in 0..1000u64 {
                let mut rng = stream(106, b, Purpose::Payload);
                let bits: Vec<u8> = (0..64usize.div_ceil(k) * k).map(|_| rng.random_range(0..2u8)).collect();
                let ctx = CipherContext::new(
                    SecretPattern::random(scheme, ThetaSampling::Uniform, &mut rng).unwrap(),
                    cst.clone(),
                )
                .unwrap();
                let rx = ctx.encrypt(&bits).unwrap();
                cases += 1;
                if ctx.decrypt(&rx, &JonesMatrix::identity()).unwrap() != bits {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures} of {cases} blocks differ"))
}

fn role<'a>(recs: &'a [ResultRecord], r: Role) -> Vec<&'a ResultRecord> {
    recs.iter().filter(|x| x.role == r).collect()
}

fn within_3_sigma(a: &ResultRecord, b: &ResultRecord) -> bool {
    let s = (a.ber_std_error().powi(2) + b.ber_std_error().powi(2)).sqrt();
    (a.ber - b.ber).abs() <= 3.0 * s
}

fn eavesdropper_flatness(workers: usize) -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::BerSweep);
    cfg.scheme = Scheme::Golden;
    cfg.m = 8;
    cfg.snr_db = SnrRange { start: 0.0, stop: 20.0, step: 5.0 };
    let symbols_per_block = cfg.block_bits.div_ceil(3) as usize;
    cfg.trials = Some(100_000usize.div_ceil(symbols_per_block));
    cfg.seed = 107;
    let recs = run_experiment(&cfg, workers).unwrap();
    let (legit, eve, base) = (role(&recs, Role::Legit), role(&recs, Role::Eve), role(&recs, Role::Baseline));
    let eve_ber: Vec<f64> = eve.iter().map(|r| r.ber).collect();
    let mean = eve_ber.iter().sum::<f64>() / eve_ber.len() as f64;
    let flat = eve_ber.iter().all(|b| (b - mean).abs() <= 0.02);
    let high = eve_ber.iter().all(|&b| b >= 0.25);
    let decreasing = legit.windows(2).all(|w| w[1].ber < w[0].ber);
    let matches = legit.iter().zip(&base).all(|(l, b)| within_3_sigma(l, b));
    outcome(
        flat && high && decreasing && matches,
        format!(
            "eve BER {:?}, legit BER {:?}, baseline BER {:?}; flat {flat}, ≥0.25 {high}, decreasing {decreasing}, legit≈baseline {matches}",
            eve_ber.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>(),
            legit.iter().map(|r| format!("{:.2e}", r.ber)).collect::<Vec<_>>(),
            base.iter().map(|r| format!("{:.2e}", r.ber)).collect::<Vec<_>>(),
        ),
    )
}

fn rotation_plateau(workers: usize) -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::RotationSweep);
    cfg.m = 8;
    cfg.snr_db = SnrRange::single(15.0);
    cfg.theta = Some(ThetaRange { start: 0.0, stop: TAU, steps: 33 });
    cfg.seed = 108;
    let recs = run_experiment(&cfg, workers).unwrap();
    let eve = role(&recs, Role::Eve);
    let at = |t: f64| eve.iter().find(|r| (r.parameter.unwrap() - t).abs() < 1e-12).copied().unwrap();
    let reference = at(PI).ber;
    let band: Vec<&ResultRecord> =
        eve.iter().copied().filter(|r| (0.5 * PI - 1e-12..=1.5 * PI + 1e-12).contains(&r.parameter.unwrap())).collect();
    let spread = band.iter().map(|r| (r.ber / reference - 1.0).abs()).fold(0.0f64, f64::max);
    let baseline = role(&recs, Role::Baseline)[0];
    let leak = within_3_sigma(at(0.0), baseline);
    outcome(
        spread <= 0.10 && leak,
        format!(
            "BER(eve;π) {reference:.4}, max relative deviation on [π/2,3π/2] {spread:.3} (tol 0.10) over {} angles, BER(eve;0) {:.2e} vs baseline {:.2e}",
            band.len(),
            at(0.0).ber,
            baseline.ber
        ),
    )
}

/// Each clause must hold in every one of several independent runs of 10⁶
/// symbols, so a pass cannot hinge on a favourable seed.
fn stokes_moments() -> Outcome {
    const REPLICATIONS: u64 = 5;
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, db) in [-10.0f64, 0.0, 10.0].into_iter().enumerate() {
        let gamma = 10f64.powf(db / 10.0);
        let (p, s2) = (SIGNAL_POWER, SIGNAL_POWER / gamma);
        // Expected values written out directly.
        let mean0 = 2.0 * (p + s2);
        let var = [
            4.0 * p * s2 + 2.0 * s2 * s2,
            4.0 * p * s2 + 2.0 * s2 * s2,
            2.0 * (p + s2).powi(2),
            2.0 * (p + s2).powi(2),
        ];
        let (mut mean_err, mut zero_err, mut var_err, mut gap_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut gaps = Vec::new();
        for r in 0..REPLICATIONS {
            let sim = simulate_stokes_moments(p, s2, 1_000_000, 1090 + 10 * i as u64 + r).unwrap();
            mean_err = mean_err.max(((sim.mean[0] - mean0) / mean0).abs());
            zero_err = zero_err.max((1..4).map(|k| sim.mean[k].abs() / mean0).fold(0.0f64, f64::max));
            var_err = var_err.max((0..4).map(|k| ((sim.variance[k] - var[k]) / var[k]).abs()).fold(0.0f64, f64::max));
            let gap = sim.variance[2] - sim.variance[0];
            gaps.push(gap);
            gap_err = gap_err.max(((gap - 2.0 * p * p) / (2.0 * p * p)).abs());
        }
        let n = gaps.len() as f64;
        let mean_gap = gaps.iter().sum::<f64>() / n;
        let spread = (gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / (2.0 * p * p);
        let ok = mean_err <= 0.02 && zero_err <= 0.02 && var_err <= 0.02 && gap_err <= 0.02;
        pass &= ok;
        notes.push(format!(
            "{db:+} dB: mean {mean_err:.1e}, zero means {zero_err:.1e}, variances {var_err:.1e}, var(S2)−var(S0) {gap_err:.2e} (run-to-run sd {spread:.1e}){}",
            if ok { "" } else { " ✗" }
        ));
    }
    outcome(pass, format!("worst relative errors over 5 runs (tol 0.02) {}", notes.join("; ")))
}

fn snr_transformation() -> Outcome {
    let half = stokes_snr(0.5).unwrap();
    let crossover = half[0] == half[2] && (half[0] - 0.125).abs() <= 1e-15;
    let mut worst = 0.0f64;
    for (i, g) in [0.1f64, 0.5, 10.0].into_iter().enumerate() {
        let sim = simulate_stokes_snr(g, 1_000_000, 110 + i as u64).unwrap();
        let expected = [g * g / (g + 1.5), 0.0, g * g / (2.0 * g + 1.0), g * g / (2.0 * g + 1.0)];
        for k in [0, 2, 3] {
            worst = worst.max((sim[k] / expected[k] - 1.0).abs());
        }
        worst = worst.max(sim[1].abs());
    }
    outcome(
        crossover && worst <= 0.05,
        format!("SNR0(½) = {}, SNR2(½) = {}; MC worst relative error {worst:.2e} (tol 0.05)", half[0], half[2]),
    )
}

fn lemma_identities() -> Outcome {
    let (mut tr, mut res) = (0.0f64, 0.0f64);
    for i in 0..10_000 {
        let mut rng = stream(111, i, Purpose::Matrix);
        let m = jones_to_mueller(&random_jones(&mut rng)).unwrap();
        let scale = m.get(0, 0);
        let mut p = MuellerMatrix::identity();
        for k in 1..=3 {
            p = p * m;
            tr = tr.max(-p.trace() / scale.powi(k));
        }
        let lines = determinant_line_residuals(&m);
        res = res.max(lines.iter().fold(0.0f64, |a, &r| a.max(r / scale.powi(4))));
    }
    outcome(tr <= 1e-12 && res <= 1e-9, format!("min normalized tr(Mᵏ) {:.1e}, worst line residual {res:.1e}", -tr))
}

fn impairment_checks(workers: usize) -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let mut rng = stream(112, i, Purpose::Matrix);
        let mut draw = || {
            let z = gauss_c(&mut rng);
            z / (1.0 + z.norm())
        };
        let (a, b, cc) = (draw(), draw(), draw());
        let x = impairment_mueller(a, b, cc).unwrap();
        let y = jones_to_mueller(&JonesMatrix::new(c(1.0, 0.0), a, b, cc)).unwrap();
        worst = worst.max(x.max_abs_diff(&y));
    }
    let id = MuellerMatrix::identity();
    let ideal = polcrypt::Impairment::CrossPol(c(0.0, 0.0)).mueller().unwrap() == id
        && polcrypt::Impairment::Unbalanced(c(1.0, 0.0)).mueller().unwrap() == id;
    let mut notes = Vec::new();
    let mut monotone = true;
    for m in [8usize, 16] {
        for kind in [ImpairmentKind::CrossPol, ImpairmentKind::Unbalanced] {
            let mut cfg = ExperimentConfig::new(ExperimentKind::ImperfectionSweep);
            cfg.m = m;
            cfg.snr_db = SnrRange::single(15.0);
            cfg.xi = Some(XiGrid::new(kind));
            cfg.seed = 112;
            let recs = run_experiment(&cfg, workers).unwrap();
            let snr: Vec<f64> = role(&recs, Role::Legit).iter().map(|r| r.aux_value("post_snr_db").unwrap()).collect();
            let ok = snr.len() == 10 && snr.windows(2).all(|w| w[1] <= w[0]);
            monotone &= ok;
            notes.push(format!(
                "M={m} {}: {:.2}→{:.2} dB{}",
                kind.as_str(),
                snr[0],
                snr[snr.len() - 1],
                if ok { "" } else { " not monotone" }
            ));
        }
    }
    outcome(
        worst <= 1e-9 && ideal && monotone,
        format!(
            "closed form vs Jones {worst:.1e}, ideal cases identity {ideal}, post-impairment SNR {}",
            notes.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let mut kinds = Vec::new();
    let mut all = true;
    for kind in ExperimentKind::ALL {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.seed = 113;
        cfg.trials = Some(match kind {
            ExperimentKind::StokesStats | ExperimentKind::SnrTransform => 50_000,
            ExperimentKind::QVsTrace => 2_000,
            ExperimentKind::Validate => 100,
            _ => 200,
        });
        if kind == ExperimentKind::ImperfectionSweep {
            cfg.xi = Some(XiGrid { steps: 4, ..XiGrid::new(ImpairmentKind::CrossPol) });
        }
        let runs: Vec<String> = [1, 2, 5].iter().map(|&w| to_csv_string(&run_experiment(&cfg, w).unwrap())).collect();
        let same = runs.windows(2).all(|w| w[0].as_bytes() == w[1].as_bytes());
        all &= same;
        if !same {
            kinds.push(kind.as_str());
        }
    }
    outcome(
        all,
        if all {
            "CSV identical for 1, 2 and 5 workers in every experiment".to_string()
        } else {
            format!("differs: {kinds:?}")
        },
    )
}

fn main() {
    let workers = std::env::var("POLCRYPT_WORKERS").ok().and_then(|v| v.parse().ok()).unwrap_or(4);
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("commuting diagram", Box::new(|| timed(Some(Duration::from_secs(1)), commuting_diagram))),
        ("golden suite", Box::new(|| timed(None, golden_suite))),
        (
            "amount of transformation",
            Box::new(|| timed(Some(Duration::from_secs(30)), amount_of_transformation_checks)),
        ),
        ("rotation", Box::new(|| timed(None, rotation_checks))),
        ("opposite", Box::new(|| timed(None, opposite_checks))),
        ("noiseless round trip", Box::new(|| timed(Some(Duration::from_secs(10)), round_trip))),
        (
            "eavesdropper flatness",
            Box::new(move || timed(Some(Duration::from_secs(120)), || eavesdropper_flatness(workers))),
        ),
        ("rotation plateau", Box::new(move || timed(None, || rotation_plateau(workers)))),
        ("stokes moments", Box::new(|| timed(None, stokes_moments))),
        ("snr transformation", Box::new(|| timed(None, snr_transformation))),
        ("trace and determinant identities", Box::new(|| timed(None, lemma_identities))),
        ("impairment consistency", Box::new(move || timed(None, || impairment_checks(workers)))),
        ("determinism", Box::new(|| timed(None, determinism))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<34} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
