use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;

use crate::constellation::shared_constellation;
use crate::encipherment::Scheme;
use crate::error::{Error, Result};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    BerSweep,
    RotationSweep,
    QVsTrace,
    StokesStats,
    SnrTransform,
    ImperfectionSweep,
    Validate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::BerSweep,
        ExperimentKind::RotationSweep,
        ExperimentKind::QVsTrace,
        ExperimentKind::StokesStats,
        ExperimentKind::SnrTransform,
        ExperimentKind::ImperfectionSweep,
        ExperimentKind::Validate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::RotationSweep => "rotation_sweep",
            ExperimentKind::QVsTrace => "q_vs_trace",
            ExperimentKind::StokesStats => "stokes_stats",
            ExperimentKind::SnrTransform => "snr_transform",
            ExperimentKind::ImperfectionSweep => "imperfection_sweep",
            ExperimentKind::Validate => "validate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let norm = if norm == "q_metrics" { "q_vs_trace".to_string() } else { norm };
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| config_err(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpairmentKind {
    CrossPol,
    Unbalanced,
}

impl ImpairmentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImpairmentKind::CrossPol => "cross_pol",
            ImpairmentKind::Unbalanced => "unbalanced",
        }
    }

    /// ξ at which the radio chain is perfect.
    pub fn ideal(&self) -> Complex64 {
        match self {
            ImpairmentKind::CrossPol => Complex64::new(0.0, 0.0),
            ImpairmentKind::Unbalanced => Complex64::new(1.0, 0.0),
        }
    }

    /// Default far end of a sweep.
    pub fn worst(&self) -> Complex64 {
        match self {
            ImpairmentKind::CrossPol => Complex64::new(1.0, 0.0),
            ImpairmentKind::Unbalanced => Complex64::new(0.0, 0.0),
        }
    }
}

impl FromStr for ImpairmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cross_pol" | "crosspol" | "cross" => Ok(ImpairmentKind::CrossPol),
            "unbalanced" => Ok(ImpairmentKind::Unbalanced),
            _ => Err(config_err(format!("unknown impairment '{s}'"))),
        }
    }
}

/// Inclusive dB grid `start, start + step, ..., ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrRange {
    pub fn single(db: f64) -> Self {
        Self { start: db, stop: db, step: 1.0 }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if self.start.is_nan() || self.stop.is_nan() || self.start == f64::NEG_INFINITY {
            return Err(config_err("SNR range has unusable endpoints"));
        }
        if self.start == self.stop {
            return Ok(vec![self.start]);
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(config_err("an infinite SNR is only allowed as a single point"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) || self.stop < self.start {
            return Err(config_err(format!("SNR range {}..{} step {} is empty", self.start, self.stop, self.step)));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err(config_err("SNR range has too many points"));
        }
        Ok((0..n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// `steps` equally spaced angles from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl ThetaRange {
    pub fn points(&self) -> Result<Vec<f64>> {
        let ok = |t: f64| (0.0..=TAU).contains(&t);
        if !ok(self.start) || !ok(self.stop) || self.steps == 0 {
            return Err(config_err(format!(
                "theta range {}..{} ({} steps) must lie in [0, 2π] with at least one step",
                self.start, self.stop, self.steps
            )));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let span = self.stop - self.start;
        Ok((0..self.steps).map(|i| (self.start + span * i as f64 / (self.steps - 1) as f64).clamp(0.0, TAU)).collect())
    }
}

/// Linear grid from the ideal ξ of `kind` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiGrid {
    pub kind: ImpairmentKind,
    pub end: Complex64,
    pub steps: usize,
}

impl XiGrid {
    pub fn new(kind: ImpairmentKind) -> Self {
        Self { kind, end: kind.worst(), steps: 10 }
    }

    pub fn points(&self) -> Result<Vec<Complex64>> {
        if self.steps < 2 {
            return Err(config_err("a ξ grid needs at least two points"));
        }
        if !self.end.is_finite() || self.end.norm_sqr() > 1.0 + 1e-12 {
            return Err(config_err(format!("ξ endpoint {} must satisfy |ξ| ≤ 1", self.end)));
        }
        let start = self.kind.ideal();
        Ok((0..self.steps).map(|i| start + (self.end - start) * (i as f64 / (self.steps - 1) as f64)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub scheme: Scheme,
    pub m: usize,
    pub snr_db: SnrRange,
    /// Blocks per point for BER experiments, matrices for `q_vs_trace`,
    /// samples for the Stokes statistics, cases per check for `validate`.
    /// `None` selects the per-kind default.
    pub trials: Option<usize>,
    pub block_bits: usize,
    pub theta: Option<ThetaRange>,
    pub xi: Option<XiGrid>,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
}

/// Smallest number of BER bits per point at default settings.
pub const MIN_BITS_PER_POINT: usize = 100_000;
pub const DEFAULT_BLOCK_BITS: usize = 64;
pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

impl ExperimentConfig {
    /// Defaults for one experiment family.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            scheme: Scheme::Golden,
            m: 8,
            snr_db: SnrRange { start: 0.0, stop: 20.0, step: 5.0 },
            trials: None,
            block_bits: DEFAULT_BLOCK_BITS,
            theta: None,
            xi: None,
            seed: DEFAULT_SEED,
            out_path: None,
        };
        match kind {
            ExperimentKind::RotationSweep => {
                cfg.scheme = Scheme::Rotation;
                cfg.snr_db = SnrRange::single(15.0);
                cfg.theta = Some(ThetaRange { start: 0.0, stop: TAU, steps: 17 });
            }
            ExperimentKind::StokesStats => cfg.snr_db = SnrRange { start: -10.0, stop: 10.0, step: 10.0 },
            ExperimentKind::SnrTransform => cfg.snr_db = SnrRange { start: -10.0, stop: 20.0, step: 2.0 },
            ExperimentKind::ImperfectionSweep => {
                cfg.snr_db = SnrRange::single(15.0);
                cfg.xi = Some(XiGrid::new(ImpairmentKind::CrossPol));
            }
            _ => {}
        }
        cfg
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.kind {
            ExperimentKind::BerSweep | ExperimentKind::RotationSweep | ExperimentKind::ImperfectionSweep => {
                MIN_BITS_PER_POINT.div_ceil(self.block_bits.max(1))
            }
            ExperimentKind::QVsTrace => 10_000,
            ExperimentKind::StokesStats => 1_000_000,
            ExperimentKind::SnrTransform => 200_000,
            ExperimentKind::Validate => 1_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == Some(0) {
            return Err(config_err("trials must be at least 1"));
        }
        if self.block_bits == 0 {
            return Err(config_err("block_bits must be at least 1"));
        }
        shared_constellation(self.m).map_err(|e| config_err(e.to_string()))?;
        self.snr_db.points()?;
        let theta_allowed = self.scheme == Scheme::Rotation
            && matches!(self.kind, ExperimentKind::BerSweep | ExperimentKind::RotationSweep);
        if let Some(t) = &self.theta {
            if !theta_allowed {
                return Err(config_err(format!(
                    "a theta range needs scheme=rotation and a BER experiment (got {} / {})",
                    self.kind, self.scheme
                )));
            }
            t.points()?;
        }
        if self.kind == ExperimentKind::RotationSweep {
            if self.scheme != Scheme::Rotation {
                return Err(config_err("rotation_sweep requires scheme=rotation"));
            }
            if self.theta.is_none() {
                return Err(config_err("rotation_sweep requires a theta range"));
            }
        }
        match (&self.xi, self.kind) {
            (Some(x), ExperimentKind::ImperfectionSweep) => {
                x.points()?;
            }
            (None, ExperimentKind::ImperfectionSweep) => {
                return Err(config_err("imperfection_sweep requires a ξ grid"))
            }
            (Some(_), k) => return Err(config_err(format!("a ξ grid only applies to imperfection_sweep, not {k}"))),
            (None, _) => {}
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        let real = |v: &str| parse_real(&key, v);
        let count = |v: &str| v.parse::<usize>().map_err(|_| config_err(format!("{key}: '{v}' is not a count")));
        match key.as_str() {
            "kind" | "experiment" => {
                let kind: ExperimentKind = value.parse()?;
                if kind != self.kind {
                    *self = Self { seed: self.seed, out_path: self.out_path.clone(), ..Self::new(kind) };
                }
            }
            "scheme" => self.scheme = value.parse().map_err(|e: Error| config_err(e.to_string()))?,
            "m" => self.m = count(value)?,
            "snr_start" => {
                self.snr_db.start = real(value)?;
                if self.snr_db.stop < self.snr_db.start {
                    self.snr_db.stop = self.snr_db.start;
                }
            }
            "snr_stop" => self.snr_db.stop = real(value)?,
            "snr_step" => self.snr_db.step = real(value)?,
            "snr" | "snr_db" => self.snr_db = SnrRange::single(real(value)?),
            "trials" => self.trials = Some(count(value)?),
            "block_bits" => self.block_bits = count(value)?,
            "theta" => {
                let steps = self.theta.map_or(17, |t| t.steps);
                self.theta = Some(match value.split_once(':') {
                    Some((a, b)) => ThetaRange { start: real(a)?, stop: real(b)?, steps },
                    None => {
                        let t = real(value)?;
                        ThetaRange { start: t, stop: t, steps: 1 }
                    }
                });
            }
            "theta_steps" => {
                let steps = count(value)?;
                let t = self.theta.get_or_insert(ThetaRange { start: 0.0, stop: TAU, steps });
                t.steps = steps;
            }
            "impairment" => {
                let kind: ImpairmentKind = value.parse()?;
                let steps = self.xi.map_or(10, |x| x.steps);
                self.xi = Some(XiGrid { steps, ..XiGrid::new(kind) });
            }
            "xi_re" => self.xi_grid().end.re = real(value)?,
            "xi_im" => self.xi_grid().end.im = real(value)?,
            "xi_steps" => self.xi_grid().steps = count(value)?,
            "seed" => {
                self.seed = parse_seed(value).ok_or_else(|| config_err(format!("seed: '{value}' is not an integer")))?
            }
            "out" | "out_path" => self.out_path = Some(PathBuf::from(value)),
            _ => return Err(config_err(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    fn xi_grid(&mut self) -> &mut XiGrid {
        self.xi.get_or_insert_with(|| XiGrid::new(ImpairmentKind::CrossPol))
    }

    /// Applies every `key = value` line of a config file. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value, got '{line}'", no + 1)))?;
            self.set(k, v).map_err(|e| config_err(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// Parses a config file starting from the defaults of the `kind` it
    /// names (or of `fallback`).
    pub fn from_text(text: &str, fallback: ExperimentKind) -> Result<Self> {
        let kind = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| matches!(k.trim(), "kind" | "experiment"))
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(fallback);
        let mut cfg = Self::new(kind);
        cfg.apply_text(text)?;
        Ok(cfg)
    }
}

/// Accepts plain reals, `inf`, and multiples of `pi` such as `pi/2` or
/// `1.5pi`.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    let s = v.trim().to_ascii_lowercase();
    let err = || config_err(format!("{key}: '{v}' is not a number"));
    if let Some(pos) = s.find("pi") {
        let (coef, rest) = (&s[..pos], &s[pos + 2..]);
        let coef = match coef.trim_end_matches('*') {
            "" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| err())?,
        };
        let div = match rest {
            "" => 1.0,
            r => r.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).ok_or_else(err)?,
        };
        return Ok(coef * PI / div);
    }
    s.parse::<f64>().map_err(|_| err())
}

fn parse_seed(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => v.replace('_', "").parse().ok(),
    }
}
