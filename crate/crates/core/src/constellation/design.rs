//! Construction of point sets and bit labelings.
//!
//! The 16- and 32-point codes and all labelings for M ≥ 8 are produced here
//! once and baked into `data/` (see the `bake_constellations` example). The
//! library never runs the optimizers at load time.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{stream, Purpose};

/// Smallest angle between any two points, in radians.
pub fn min_angle(points: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let cos = points[i].dot(&points[j]) / (points[i].norm() * points[j].norm());
            best = best.min(cos.clamp(-1.0, 1.0).acos());
        }
    }
    best
}

pub fn tetrahedron() -> Vec<Vector3<f64>> {
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|p| Vector3::from(*p).normalize())
        .collect()
}

/// Two squares at `z = ±h`, the lower one turned by 45°. With `h² =
/// √2/(4+√2)` every vertex has four nearest neighbours at the same angle.
pub fn square_antiprism() -> Vec<Vector3<f64>> {
    let h2 = 2f64.sqrt() / (4.0 + 2f64.sqrt());
    let (h, r) = (h2.sqrt(), (1.0 - h2).sqrt());
    let ring = |z: f64, offset: f64| {
        (0..4).map(move |k| {
            let phi = offset + k as f64 * std::f64::consts::FRAC_PI_2;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
    };
    ring(h, 0.0).chain(ring(-h, std::f64::consts::FRAC_PI_4)).collect()
}

/// Seeded repulsion search for `n` points with a large minimum angle.
///
/// Each restart starts from Gaussian directions, relaxes a Riesz energy with
/// a growing exponent and then pushes the closest pairs apart directly. The
/// best restart wins.
pub fn optimize_code(n: usize, seed: u64, restarts: usize) -> Vec<Vector3<f64>> {
    let mut best: Option<(f64, Vec<Vector3<f64>>)> = None;
    for r in 0..restarts {
        let mut rng = stream(seed, r as u64, Purpose::Design);
        let mut pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
                    .normalize()
            })
            .collect();
        for exponent in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
            relax_energy(&mut pts, exponent, 400);
        }
        push_closest_pairs(&mut pts, 20_000);
        let angle = min_angle(&pts);
        if best.as_ref().map_or(true, |(a, _)| angle > *a) {
            best = Some((angle, pts));
        }
    }
    best.map(|(_, p)| p).unwrap_or_default()
}

fn relax_energy(pts: &mut [Vector3<f64>], exponent: f64, steps: usize) {
    let n = pts.len();
    for step in 0..steps {
        let dmin = min_chord(pts);
        let mut forces = vec![Vector3::zeros(); n];
        for i in 0..n {
            for j in i + 1..n {
                let diff = pts[i] - pts[j];
                let d = diff.norm() / dmin;
                let f = diff * d.powf(-(exponent + 2.0));
                forces[i] += f;
                forces[j] -= f;
            }
        }
        let fmax = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
        if fmax == 0.0 {
            return;
        }
        let eta = 0.1 * dmin * (1.0 - step as f64 / steps as f64).max(0.05);
        for (p, f) in pts.iter_mut().zip(&forces) {
            let tangent = f - *p * p.dot(f);
            *p = (*p + tangent * (eta / fmax)).normalize();
        }
    }
}

fn min_chord(pts: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min((pts[i] - pts[j]).norm());
        }
    }
    best
}

fn push_closest_pairs(pts: &mut Vec<Vector3<f64>>, iterations: usize) {
    let mut delta = 1e-3;
    let mut current = min_chord(pts);
    for _ in 0..iterations {
        let mut moved = pts.clone();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let diff = pts[i] - pts[j];
                if diff.norm() < current * (1.0 + 10.0 * delta) {
                    let dir = diff.normalize();
                    moved[i] += dir * delta;
                    moved[j] -= dir * delta;
                }
            }
        }
        for p in moved.iter_mut() {
            *p = p.normalize();
        }
        let candidate = min_chord(&moved);
        if candidate > current {
            *pts = moved;
            current = candidate;
            delta *= 1.1;
        } else {
            delta *= 0.5;
            if delta < 1e-15 {
                break;
            }
        }
    }
}

/// Scenario family an eavesdropper faces when no inverse is applied.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Row-stochastic `M×M` matrix: probability that point `p` is decided as `q`.
    pub transitions: Vec<Vec<f64>>,
}

/// Noiseless transition matrices for π-rotations about uniformly spread
/// axes, and for rotations by each `theta` in `thetas` about axes with
/// polar angle and azimuth spread uniformly.
pub fn eavesdropper_scenarios(points: &[Vector3<f64>], thetas: &[f64], axis_grid: usize) -> Vec<Scenario> {
    let mut out = Vec::new();
    let fib = fibonacci_sphere(axis_grid * axis_grid * 2);
    out.push(Scenario { name: "golden".into(), transitions: transitions(points, &fib, std::f64::consts::PI) });
    let mut polar_axes = Vec::with_capacity(axis_grid * axis_grid * 2);
    for a in 0..axis_grid {
        let alpha = (a as f64 + 0.5) * std::f64::consts::PI / axis_grid as f64;
        for b in 0..2 * axis_grid {
            let beta = (b as f64 + 0.5) * std::f64::consts::PI / axis_grid as f64;
            polar_axes.push(Vector3::new(alpha.sin() * beta.cos(), alpha.sin() * beta.sin(), alpha.cos()));
        }
    }
    for &theta in thetas {
        out.push(Scenario {
            name: format!("rotation:{theta:.4}"),
            transitions: transitions(points, &polar_axes, theta),
        });
    }
    out
}

fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn nearest(points: &[Vector3<f64>], u: &Vector3<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - u).norm_squared();
        if d < best.1 - 1e-12 {
            best = (i, d);
        }
    }
    best.0
}

fn transitions(points: &[Vector3<f64>], axes: &[Vector3<f64>], theta: f64) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut t = vec![vec![0.0; m]; m];
    let w = 1.0 / axes.len() as f64;
    for axis in axes {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), theta);
        for (p, point) in points.iter().enumerate() {
            t[p][nearest(points, &(rot * point))] += w;
        }
    }
    t
}

/// Expected bit error rate of a labeling under one scenario.
pub fn scenario_ber(labels: &[usize], s: &Scenario) -> f64 {
    let m = labels.len();
    let k = m.trailing_zeros() as f64;
    let mut acc = 0.0;
    for p in 0..m {
        for q in 0..m {
            acc += s.transitions[p][q] * (labels[p] ^ labels[q]).count_ones() as f64;
        }
    }
    acc / (m as f64 * k)
}

/// Mean Hamming distance between labels of nearest-neighbour pairs, where
/// neighbours are pairs within 5% of the minimum distance of each point.
pub fn neighbour_cost(points: &[Vector3<f64>], labels: &[usize]) -> f64 {
    let m = points.len();
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..m {
        let dmin = (0..m).filter(|&j| j != i).map(|j| (points[i] - points[j]).norm()).fold(f64::INFINITY, f64::min);
        for j in 0..m {
            if j != i && (points[i] - points[j]).norm() <= dmin * 1.05 {
                total += (labels[i] ^ labels[j]).count_ones() as f64;
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Objective minimized by [`neutral_labels`]: the spread of the rotation
/// scenario BERs relative to the π-rotation BER, plus the distance of the
/// golden scenario BER from 1/2, plus a small neighbour-cost penalty.
pub fn labeling_objective(points: &[Vector3<f64>], labels: &[usize], scenarios: &[Scenario]) -> f64 {
    let golden = scenario_ber(labels, &scenarios[0]);
    let rot: Vec<f64> = scenarios[1..].iter().map(|s| scenario_ber(labels, s)).collect();
    let reference = *rot.last().unwrap_or(&golden);
    let spread = rot.iter().map(|b| (b - reference).abs()).fold(0.0, f64::max) / reference.max(1e-12);
    spread + (golden - 0.5).abs() + 0.01 * neighbour_cost(points, labels)
}

/// Labeling that keeps an inverse-less receiver near BER 1/2 across the
/// scenarios. Point 0 always carries label 0 (flipping a fixed bit pattern
/// on all labels leaves every Hamming distance unchanged). Up to eight
/// points are searched exhaustively; larger sets use seeded pair-swap
/// descent from `restarts` random starts.
pub fn neutral_labels(points: &[Vector3<f64>], scenarios: &[Scenario], seed: u64, restarts: usize) -> Vec<usize> {
    let m = points.len();
    let cost = |l: &[usize]| labeling_objective(points, l, scenarios);
    if m <= 8 {
        let mut rest: Vec<usize> = (1..m).collect();
        let mut best = (f64::INFINITY, Vec::new());
        permute(&mut rest, 0, &mut |perm| {
            let mut l = vec![0];
            l.extend_from_slice(perm);
            let c = cost(&l);
            if c < best.0 - 1e-12 {
                best = (c, l);
            }
        });
        return best.1;
    }
    let mut best = (f64::INFINITY, Vec::new());
    for r in 0..restarts {
        let mut rng = stream(seed, r as u64, Purpose::Design);
        let mut l: Vec<usize> = (0..m).collect();
        for i in (2..m).rev() {
            let j = rng.random_range(1..=i);
            l.swap(i, j);
        }
        let mut c = cost(&l);
        loop {
            let mut improved = false;
            for i in 1..m {
                for j in i + 1..m {
                    l.swap(i, j);
                    let cj = cost(&l);
                    if cj < c - 1e-12 {
                        c = cj;
                        improved = true;
                    } else {
                        l.swap(i, j);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if c < best.0 - 1e-12 {
            best = (c, l);
        }
    }
    best.1
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antiprism_has_equal_nearest_neighbours() {
        let pts = square_antiprism();
        let angle = min_angle(&pts);
        assert!((angle.cos() - 2f64.sqrt() / (4.0 + 2f64.sqrt())).abs() < 1e-12);
        for i in 0..8 {
            let close = (0..8).filter(|&j| j != i && (pts[i].dot(&pts[j]).acos() - angle).abs() < 1e-9).count();
            assert_eq!(close, 4);
        }
    }

    #[test]
    fn optimizer_is_deterministic_and_spreads_points() {
        let a = optimize_code(6, 11, 2);
        let b = optimize_code(6, 11, 2);
        assert_eq!(a, b);
        // Six points: the octahedron, 90°.
        assert!((min_angle(&a).to_degrees() - 90.0).abs() < 0.5);
    }

    #[test]
    fn transition_rows_are_stochastic() {
        let pts = tetrahedron();
        for s in eavesdropper_scenarios(&pts, &[1.0, std::f64::consts::PI], 6) {
            for row in &s.transitions {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_rotation_has_zero_ber() {
        let pts = square_antiprism();
        let s = &eavesdropper_scenarios(&pts, &[0.0], 4)[1];
        assert_eq!(scenario_ber(&(0..8).collect::<Vec<_>>(), s), 0.0);
    }

    #[test]
    fn permutations_are_exhaustive() {
        let mut count = 0;
        permute(&mut vec![1, 2, 3, 4], 0, &mut |_| count += 1);
        assert_eq!(count, 24);
    }
}
