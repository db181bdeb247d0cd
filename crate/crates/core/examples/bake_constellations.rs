//! Regenerates the baked constellation data.
//!
//! ```text
//! cargo run --release -p polcrypt --example bake_constellations -- crates/core/data
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::Vector3;
use polcrypt::constellation::design;

const SEED: u64 = 0x5EED_C0DE;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".into()));
    let thetas: Vec<f64> = (0..=8).map(|k| PI / 2.0 + k as f64 * PI / 16.0).collect();

    for m in [8usize, 16, 32] {
        let points = match m {
            8 => design::square_antiprism(),
            _ => {
                let pts = design::optimize_code(m, SEED + m as u64, 24);
                std::fs::write(dir.join(format!("sphere{m}.txt")), point_file(&pts))?;
                pts
            }
        };
        let scenarios = design::eavesdropper_scenarios(&points, &thetas, 24);
        let labels = design::neutral_labels(&points, &scenarios, SEED, if m == 16 { 64 } else { 16 });
        let bers: Vec<String> =
            scenarios.iter().map(|s| format!("{}={:.4}", s.name, design::scenario_ber(&labels, s))).collect();
        eprintln!(
            "M={m}: min angle {:.4} deg, neighbour cost {:.3}, {}",
            design::min_angle(&points).to_degrees(),
            design::neighbour_cost(&points, &labels),
            bers.join(" ")
        );
        let mut text = String::from("# label of point i on line i\n");
        for l in &labels {
            writeln!(text, "{l}").unwrap();
        }
        std::fs::write(dir.join(format!("labels{m}.txt")), text)?;
    }
    Ok(())
}

fn point_file(points: &[Vector3<f64>]) -> String {
    let mut text = format!("# {} unit vectors (s1 s2 s3)\n", points.len());
    writeln!(text, "# min_angle_deg = {:.17e}", design::min_angle(points).to_degrees()).unwrap();
    for p in points {
        writeln!(text, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z).unwrap();
    }
    text
}
