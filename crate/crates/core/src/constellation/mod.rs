//! Constellations on the Poincaré sphere and bit mapping.
//!
//! A constellation is a set of unit reduced Stokes vectors plus a bijection
//! between `log2 M`-bit labels and points. Labels are written MSB first.

pub mod design;

use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};
use crate::polarization::StokesVector;

/// Supported constellation sizes.
pub const SIZES: [usize; 5] = [2, 4, 8, 16, 32];

const UNIT_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;
const RECORDED_ANGLE_TOL: f64 = 1e-9;

const SPHERE16: &str = include_str!("../../data/sphere16.txt");
const SPHERE32: &str = include_str!("../../data/sphere32.txt");
const LABELS8: &str = include_str!("../../data/labels8.txt");
const LABELS16: &str = include_str!("../../data/labels16.txt");
const LABELS32: &str = include_str!("../../data/labels32.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct SphereConstellation {
    points: Vec<Vector3<f64>>,
    /// Label → point index.
    bit_map: Vec<usize>,
    /// Point index → label.
    labels: Vec<usize>,
    bits_per_symbol: usize,
    min_angle: f64,
}

impl SphereConstellation {
    /// Validates and assembles a constellation. `labels[i]` is the label of
    /// point `i`.
    pub fn from_parts(points: Vec<Vector3<f64>>, labels: Vec<usize>) -> Result<Self> {
        let m = points.len();
        if !SIZES.contains(&m) {
            return Err(invalid(format!("unsupported constellation size {m}")));
        }
        if labels.len() != m {
            return Err(invalid(format!("{} labels for {m} points", labels.len())));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|x| x.is_finite()) || (p.norm() - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("point {i} is not a unit vector")));
            }
        }
        let mut bit_map = vec![usize::MAX; m];
        for (point, &label) in labels.iter().enumerate() {
            if label >= m || bit_map[label] != usize::MAX {
                return Err(invalid(format!("labels are not a permutation of 0..{m}")));
            }
            bit_map[label] = point;
        }
        let min_angle = design::min_angle(&points);
        if min_angle <= 0.0 {
            return Err(invalid("constellation has coincident points"));
        }
        Ok(Self { points, bit_map, labels, bits_per_symbol: m.trailing_zeros() as usize, min_angle })
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    /// Label → point index.
    pub fn bit_map(&self) -> &[usize] {
        &self.bit_map
    }

    /// Point index → label.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Smallest angle between two points, in radians.
    pub fn min_angle(&self) -> f64 {
        self.min_angle
    }

    pub fn min_distance(&self) -> f64 {
        2.0 * (0.5 * self.min_angle).sin()
    }

    /// Unit-energy Stokes vector of the point carrying `label`.
    pub fn symbol(&self, label: usize) -> Result<StokesVector> {
        let &point = self
            .bit_map
            .get(label)
            .ok_or_else(|| invalid(format!("label {label} out of range for M={}", self.size())))?;
        Ok(StokesVector::from_reduced(&self.points[point]))
    }

    /// Maps exactly `bits_per_symbol` bits (MSB first, each 0 or 1).
    pub fn map_bits(&self, bits: &[u8]) -> Result<StokesVector> {
        if bits.len() != self.bits_per_symbol {
            return Err(invalid(format!("expected {} bits per symbol, got {}", self.bits_per_symbol, bits.len())));
        }
        self.symbol(bits_to_label(bits)?)
    }

    /// Index of the point nearest to the direction of `s`. Ties within
    /// 1e-12 go to the lowest index.
    pub fn nearest_point(&self, s: &StokesVector) -> Result<usize> {
        if !(s.s0 > 0.0) || !s.is_finite() {
            return Err(invalid(format!("cannot demap a Stokes vector with S0 = {}", s.s0)));
        }
        Ok(self.nearest_point_unchecked(&(s.reduced() / s.s0)))
    }

    #[inline]
    pub(crate) fn nearest_point_unchecked(&self, u: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - u).norm_squared();
            if d < best_d - TIE_TOL {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn demap_label(&self, s: &StokesVector) -> Result<usize> {
        Ok(self.labels[self.nearest_point(s)?])
    }

    /// Bits of the label nearest to `s`, MSB first.
    pub fn demap(&self, s: &StokesVector) -> Result<Vec<u8>> {
        let label = self.demap_label(s)?;
        Ok(label_to_bits(label, self.bits_per_symbol))
    }

    /// `(1/M) Σ p pᵀ` over the reduced points.
    pub fn reduced_autocorrelation(&self) -> nalgebra::Matrix3<f64> {
        let sum: nalgebra::Matrix3<f64> = self.points.iter().map(|p| p * p.transpose()).sum();
        sum / self.size() as f64
    }
}

/// MSB-first bits to an integer label.
pub fn bits_to_label(bits: &[u8]) -> Result<usize> {
    bits.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as usize),
        _ => Err(invalid(format!("bit value {b} is not 0 or 1"))),
    })
}

pub fn label_to_bits(label: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((label >> i) & 1) as u8).collect()
}

/// Canonical constellation of size `m`: poles, tetrahedron, square
/// antiprism, or the baked optimized codes for 16 and 32 points.
pub fn build_constellation(m: usize) -> Result<SphereConstellation> {
    Ok(shared_constellation(m)?.as_ref().clone())
}

/// Cached canonical constellation.
pub fn shared_constellation(m: usize) -> Result<Arc<SphereConstellation>> {
    static CACHE: [OnceLock<Arc<SphereConstellation>>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = SIZES
        .iter()
        .position(|&s| s == m)
        .ok_or_else(|| invalid(format!("unsupported constellation size {m}; expected one of {SIZES:?}")))?;
    if let Some(c) = CACHE[slot].get() {
        return Ok(c.clone());
    }
    let built = Arc::new(canonical(m)?);
    Ok(CACHE[slot].get_or_init(|| built).clone())
}

fn canonical(m: usize) -> Result<SphereConstellation> {
    let builtin = |name: &str| Path::new("<builtin>").join(name);
    match m {
        2 => SphereConstellation::from_parts(vec![Vector3::z(), -Vector3::z()], vec![0, 1]),
        4 => SphereConstellation::from_parts(design::tetrahedron(), (0..4).collect()),
        8 => {
            let labels = parse_labels(LABELS8, &builtin("labels8.txt"))?;
            SphereConstellation::from_parts(design::square_antiprism(), labels)
        }
        16 | 32 => {
            let (points, labels) = if m == 16 { (SPHERE16, LABELS16) } else { (SPHERE32, LABELS32) };
            let pts_path = builtin(&format!("sphere{m}.txt"));
            let (points, recorded) = parse_points(points, &pts_path)?;
            let c =
                SphereConstellation::from_parts(points, parse_labels(labels, &builtin(&format!("labels{m}.txt")))?)?;
            if let Some(angle) = recorded {
                if (c.min_angle().to_degrees() - angle).abs() > RECORDED_ANGLE_TOL {
                    return Err(Error::InternalConsistency(format!(
                        "M={m}: minimum angle {} deg differs from recorded {angle} deg",
                        c.min_angle().to_degrees()
                    )));
                }
            }
            Ok(c)
        }
        _ => Err(invalid(format!("unsupported constellation size {m}"))),
    }
}

/// Parses a point file: `#` comments, then one `x y z` triple per line. A
/// comment of the form `# min_angle_deg = <value>` records the expected
/// minimum angle.
pub fn parse_points(text: &str, path: &Path) -> Result<(Vec<Vector3<f64>>, Option<f64>)> {
    let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), message };
    let mut points = Vec::new();
    let mut recorded = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("min_angle_deg =") {
                recorded = Some(v.trim().parse().map_err(|e| parse_err(format!("line {}: {e}", n + 1)))?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("line {}: {e}", n + 1)))?;
        if fields.len() != 3 {
            return Err(parse_err(format!("line {}: expected 3 fields, got {}", n + 1, fields.len())));
        }
        points.push(Vector3::new(fields[0], fields[1], fields[2]));
    }
    Ok((points, recorded))
}

/// Parses a label file: `#` comments, then one integer per line giving the
/// label of the point with the same index.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            l.parse().map_err(|e| Error::Parse { path: path.to_path_buf(), message: format!("line {}: {e}", n + 1) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn unsupported_sizes() {
        for m in [0, 1, 3, 6, 64] {
            assert!(matches!(build_constellation(m), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn poles_for_two_points() {
        let c = build_constellation(2).unwrap();
        assert_eq!(c.map_bits(&[0]).unwrap(), StokesVector::new(1.0, 0.0, 0.0, 1.0));
        assert_eq!(c.map_bits(&[1]).unwrap(), StokesVector::new(1.0, 0.0, 0.0, -1.0));
        assert!(c.map_bits(&[0, 1]).is_err());
        assert!(c.map_bits(&[2]).is_err());
    }

    #[test]
    fn tetrahedron_and_antiprism_angles() {
        let tetra = build_constellation(4).unwrap();
        assert_abs_diff_eq!(tetra.min_angle(), (-1.0f64 / 3.0).acos(), epsilon = 1e-12);
        assert_abs_diff_eq!(tetra.min_angle().to_degrees(), 109.4712206, epsilon = 1e-6);
        let anti = build_constellation(8).unwrap();
        assert_abs_diff_eq!(anti.min_angle().to_degrees(), 74.8585, epsilon = 1e-4);
    }

    #[test]
    fn every_size_is_valid() {
        for m in SIZES {
            let c = build_constellation(m).unwrap();
            assert_eq!(c.size(), m);
            assert_eq!(1 << c.bits_per_symbol(), m);
            for p in c.points() {
                assert!((p.norm() - 1.0).abs() <= 1e-12);
            }
            let mut seen = vec![false; m];
            for &p in c.bit_map() {
                assert!(!seen[p]);
                seen[p] = true;
            }
            assert_abs_diff_eq!(design::min_angle(c.points()), c.min_angle(), epsilon = 1e-9);
        }
    }

    #[test]
    fn optimized_codes_do_not_regress() {
        // Best known Tammes angles are 52.2444° and 37.4752°.
        assert!(build_constellation(16).unwrap().min_angle().to_degrees() > 52.0);
        assert!(build_constellation(32).unwrap().min_angle().to_degrees() > 37.0);
    }

    #[test]
    fn map_demap_round_trip() {
        for m in SIZES {
            let c = build_constellation(m).unwrap();
            for label in 0..m {
                let bits = label_to_bits(label, c.bits_per_symbol());
                let s = c.map_bits(&bits).unwrap();
                assert_eq!(c.demap(&s).unwrap(), bits);
            }
        }
    }

    #[test]
    fn small_perturbation_keeps_label() {
        let c = build_constellation(8).unwrap();
        let delta = Vector3::new(1.0, -1.0, 0.5).normalize() * 0.49 * c.min_distance();
        for label in 0..8 {
            let p = c.points()[c.bit_map()[label]];
            assert_eq!(c.demap_label(&StokesVector::from_reduced(&(p + delta))).unwrap(), label);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = build_constellation(2).unwrap();
        assert_eq!(c.nearest_point(&StokesVector::new(1.0, 1.0, 0.0, 0.0)).unwrap(), 0);
        let c = build_constellation(8).unwrap();
        // Points 1 (upper ring) and 5 (lower ring) are neighbours.
        let mid = StokesVector::from_reduced(&(c.points()[5] + c.points()[1]));
        assert_eq!(c.nearest_point(&mid).unwrap(), 1);
    }

    #[test]
    fn demap_rejects_non_positive_energy() {
        let c = build_constellation(4).unwrap();
        assert!(c.demap(&StokesVector::new(0.0, 1.0, 0.0, 0.0)).is_err());
        assert!(c.demap(&StokesVector::new(-1.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn tetrahedron_is_isotropic() {
        let r = build_constellation(4).unwrap().reduced_autocorrelation();
        assert!((r - nalgebra::Matrix3::identity() / 3.0).amax() < 1e-12);
    }

    #[test]
    fn antiprism_autocorrelation_is_diagonal() {
        // Balanced but not isotropic: the two rings sit at z = ±h with cos(min angle) = h².
        let c = build_constellation(8).unwrap();
        let h2 = c.min_angle().cos();
        let r = c.reduced_autocorrelation();
        let expected = nalgebra::Matrix3::from_diagonal(&Vector3::new((1.0 - h2) / 2.0, (1.0 - h2) / 2.0, h2));
        assert!((r - expected).amax() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_path() {
        let err = parse_points("1 2\n", Path::new("pts.txt")).unwrap_err();
        assert!(err.to_string().contains("pts.txt"));
        assert!(parse_labels("0\nx\n", Path::new("l.txt")).is_err());
    }

    proptest! {
        #[test]
        fn demap_is_scale_invariant(
            m_idx in 0usize..5,
            v in proptest::array::uniform3(-1.0..1.0f64),
            alpha in 1e-6..1e6f64,
        ) {
            let c = build_constellation(SIZES[m_idx]).unwrap();
            let s = StokesVector::new(1.0, v[0], v[1], v[2]);
            let scaled = StokesVector::from_vector(&(s.to_vector() * alpha));
            prop_assert_eq!(c.demap(&s).unwrap(), c.demap(&scaled).unwrap());
        }
    }
}
