use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::encipherment::Scheme;
use crate::error::{Error, Result};

use super::config::ExperimentKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Receiver holding the pattern inverse.
    Legit,
    /// Receiver applying no inverse.
    Eve,
    /// Receiver applying the inverse of an independent random pattern.
    EveWrong,
    /// Unencrypted link with the same payload and noise.
    Baseline,
    /// Analytic prediction.
    Model,
    /// Monte-Carlo measurement.
    Empirical,
    /// Outcome of an invariant check.
    Check,
}

impl Role {
    pub const ALL: [Role; 7] =
        [Role::Legit, Role::Eve, Role::EveWrong, Role::Baseline, Role::Model, Role::Empirical, Role::Check];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Legit => "legit",
            Role::Eve => "eve",
            Role::EveWrong => "eve_wrong",
            Role::Baseline => "baseline",
            Role::Model => "model",
            Role::Empirical => "empirical",
            Role::Check => "check",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown role '{s}'")))
    }
}

/// One output row. For rows that count no bits, `errors = bits = 0` and
/// `ber = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: ExperimentKind,
    pub scheme: Scheme,
    pub m: usize,
    pub snr_db: Option<f64>,
    /// θ, ξ magnitude, trace or check index, depending on the experiment.
    pub parameter: Option<f64>,
    pub role: Role,
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub aux: Vec<(String, f64)>,
}

impl ResultRecord {
    pub fn new(experiment: ExperimentKind, scheme: Scheme, m: usize, role: Role) -> Self {
        Self { experiment, scheme, m, snr_db: None, parameter: None, role, errors: 0, bits: 0, ber: 0.0, aux: vec![] }
    }

    pub fn with_counts(mut self, errors: u64, bits: u64) -> Self {
        debug_assert!(errors <= bits);
        self.errors = errors;
        self.bits = bits;
        self.ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        self
    }

    pub fn with_aux(mut self, name: &str, value: f64) -> Self {
        self.aux.push((name.to_string(), value));
        self
    }

    pub fn aux_value(&self, name: &str) -> Option<f64> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Binomial standard error of `ber`.
    pub fn ber_std_error(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }
}

pub const BASE_COLUMNS: [&str; 9] =
    ["experiment", "scheme", "m", "snr_db", "parameter", "role", "errors", "bits", "ber"];

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map_or_else(String::new, real)
}

/// Serializes records as CSV: fixed columns, then as many
/// `auxN_name,auxN` pairs as the widest record needs (at least one).
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> csv::Result<()> {
    let width = records.iter().map(|r| r.aux.len()).max().unwrap_or(0).max(1);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 1..=width {
        header.push(format!("aux{i}_name"));
        header.push(format!("aux{i}"));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.experiment.as_str().to_string(),
            r.scheme.as_str().to_string(),
            r.m.to_string(),
            opt_real(r.snr_db),
            opt_real(r.parameter),
            r.role.as_str().to_string(),
            r.errors.to_string(),
            r.bits.to_string(),
            real(r.ber),
        ];
        for i in 0..width {
            match r.aux.get(i) {
                Some((name, v)) => {
                    row.push(name.clone());
                    row.push(real(*v));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[ResultRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Writes the CSV file at `path`.
pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    write_csv(records, &mut out).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io(source),
        other => Error::Parse { path: path.to_path_buf(), message: format!("{other:?}") },
    })?;
    out.flush().map_err(io)
}

/// Parses CSV produced by [`write_csv`]. `path` only labels errors.
pub fn parse_csv<R: Read>(input: R, path: &Path) -> Result<Vec<ResultRecord>> {
    let perr = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if header.len() < BASE_COLUMNS.len() || header.iter().zip(BASE_COLUMNS).any(|(a, b)| a != b) {
        return Err(perr(1, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| perr(line, e.to_string()))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|_| {
                perr(line, format!("column {} is not a number: '{}'", header.get(k).unwrap_or("?"), field(k)))
            })
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            if field(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let int = |k: usize| -> Result<u64> {
            field(k).parse::<u64>().map_err(|_| {
                perr(line, format!("column {} is not an integer: '{}'", header.get(k).unwrap_or("?"), field(k)))
            })
        };
        let mut aux = Vec::new();
        let mut k = BASE_COLUMNS.len();
        while k + 1 < row.len() {
            if !field(k).is_empty() {
                aux.push((field(k).to_string(), num(k + 1)?));
            }
            k += 2;
        }
        let ber = num(8)?;
        let (errors, bits) = (int(6)?, int(7)?);
        if !(0.0..=1.0).contains(&ber) || errors > bits {
            return Err(perr(line, format!("inconsistent counts {errors}/{bits} with ber {ber}")));
        }
        out.push(ResultRecord {
            experiment: field(0).parse().map_err(|e: Error| perr(line, e.to_string()))?,
            scheme: field(1).parse().map_err(|e: Error| perr(line, e.to_string()))?,
            m: int(2)? as usize,
            snr_db: opt(3)?,
            parameter: opt(4)?,
            role: field(5).parse().map_err(|e: Error| perr(line, e.to_string()))?,
            errors,
            bits,
            ber,
            aux,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_csv(file, path)
}
