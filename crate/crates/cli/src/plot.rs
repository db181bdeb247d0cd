//! SVG rendering of experiment records.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use plotters::prelude::*;
use polcrypt::experiments::{ExperimentKind, ResultRecord, Role};

const SIZE: (u32, u32) = (900, 600);

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    /// Drawn as markers only.
    scatter: bool,
}

struct Figure {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    log_y: bool,
    series: Vec<Series>,
}

fn group<K: Ord>(records: &[ResultRecord], key: impl Fn(&ResultRecord) -> K) -> BTreeMap<K, Vec<&ResultRecord>> {
    let mut out: BTreeMap<K, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        out.entry(key(r)).or_default().push(r);
    }
    out
}

fn ber_curves(
    records: &[ResultRecord],
    x: impl Fn(&ResultRecord) -> Option<f64>,
    label: impl Fn(&ResultRecord) -> String,
) -> Vec<Series> {
    group(records, |r| label(r))
        .into_iter()
        .map(|(name, rs)| Series {
            name,
            points: rs.iter().filter_map(|r| Some((x(r)?, r.ber))).collect(),
            scatter: false,
        })
        .collect()
}

fn aux_series(
    records: &[&ResultRecord],
    name: String,
    x: impl Fn(&ResultRecord) -> Option<f64>,
    aux: &str,
    scatter: bool,
) -> Series {
    Series { name, points: records.iter().filter_map(|r| Some((x(r)?, r.aux_value(aux)?))).collect(), scatter }
}

fn figure(records: &[ResultRecord]) -> Result<Figure> {
    let kind = records.first().ok_or_else(|| anyhow!("no records to plot"))?.experiment;
    if let Some(other) = records.iter().find(|r| r.experiment != kind) {
        bail!("cannot plot {} and {} records together", kind, other.experiment);
    }
    let snr = |r: &ResultRecord| r.snr_db;
    let param = |r: &ResultRecord| r.parameter;
    let fig = match kind {
        ExperimentKind::BerSweep => Figure {
            title: "BER against SNR".into(),
            x_label: "SNR (dB)",
            y_label: "BER",
            log_y: true,
            series: ber_curves(records, snr, |r| format!("{} M={} {}", r.scheme, r.m, r.role)),
        },
        ExperimentKind::RotationSweep => Figure {
            title: "BER against rotation angle".into(),
            x_label: "θ (rad)",
            y_label: "BER",
            log_y: true,
            series: ber_curves(
                &records.iter().filter(|r| r.role != Role::Baseline).cloned().collect::<Vec<_>>(),
                param,
                |r| format!("{} {:.1} dB", r.role, r.snr_db.unwrap_or(f64::NAN)),
            ),
        },
        ExperimentKind::QVsTrace => {
            let all: Vec<&ResultRecord> = records.iter().collect();
            Figure {
                title: format!("Amount of transformation ({})", records[0].scheme),
                x_label: "tr(M)",
                y_label: "Q",
                log_y: false,
                series: vec![
                    aux_series(&all, "Q".into(), param, "q", true),
                    aux_series(&all, "lower bound".into(), param, "q_lower", true),
                    aux_series(&all, "upper bound".into(), param, "q_upper", true),
                ],
            }
        }
        ExperimentKind::StokesStats => {
            let mut series = Vec::new();
            for (role, rs) in group(records, |r| r.role.as_str()) {
                for v in ["var0", "var1", "var2", "var3"] {
                    series.push(aux_series(&rs, format!("{v} {role}"), snr, v, role == "empirical"));
                }
            }
            Figure { title: "Stokes variances".into(), x_label: "SNR (dB)", y_label: "variance", log_y: true, series }
        }
        ExperimentKind::SnrTransform => {
            let mut series = Vec::new();
            for (role, rs) in group(records, |r| r.role.as_str()) {
                for v in ["snr0", "snr2", "snr3"] {
                    series.push(aux_series(&rs, format!("{v} {role}"), snr, v, role == "empirical"));
                }
            }
            Figure {
                title: "Stokes parameter SNR".into(),
                x_label: "input SNR (dB)",
                y_label: "SNR",
                log_y: true,
                series,
            }
        }
        ExperimentKind::ImperfectionSweep => {
            let legit: Vec<ResultRecord> = records.iter().filter(|r| r.role == Role::Legit).cloned().collect();
            let series = group(&legit, |r| format!("{} M={} {:.1} dB", r.scheme, r.m, r.snr_db.unwrap_or(f64::NAN)))
                .into_iter()
                .map(|(name, rs)| aux_series(&rs, name, param, "post_snr_db", false))
                .collect();
            Figure {
                title: "Post-detection SNR under impairment".into(),
                x_label: "|ξ|",
                y_label: "SNR (dB)",
                log_y: false,
                series,
            }
        }
        ExperimentKind::Validate => {
            let all: Vec<&ResultRecord> = records.iter().collect();
            let worst = Series {
                name: "worst residual".into(),
                points: all
                    .iter()
                    .filter_map(|r| Some((r.parameter?, r.aux.first()?.1.max(1e-18))))
                    .filter(|p| p.1.is_finite())
                    .collect(),
                scatter: true,
            };
            let tol = aux_series(&all, "tolerance".into(), param, "tolerance", true);
            Figure {
                title: "Invariant checks".into(),
                x_label: "check",
                y_label: "residual",
                log_y: true,
                series: vec![worst, tol],
            }
        }
    };
    Ok(fig)
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn pad(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Writes one SVG file. Records must all come from the same experiment
/// kind; BER and variance axes are logarithmic.
pub fn emit_plot(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut fig = figure(records)?;
    if fig.log_y {
        for s in &mut fig.series {
            s.points.retain(|p| p.1 > 0.0 && p.1.is_finite());
        }
    }
    fig.series.retain(|s| !s.points.is_empty());
    let pts = || fig.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) =
        bounds(pts().map(|p| p.0)).ok_or_else(|| anyhow!("nothing plottable in {} records", records.len()))?;
    let (y0, y1) = bounds(pts().map(|p| p.1)).expect("x bounds imply y bounds");
    let (x0, x1) = pad(x0, x1);

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let colour = |i: usize| Palette99::pick(i).to_rgba();
    let mut builder = ChartBuilder::on(&root);
    builder.caption(&fig.title, ("sans-serif", 22)).margin(20).x_label_area_size(45).y_label_area_size(70);

    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc(fig.x_label).y_desc(fig.y_label).draw()?;
            for (i, s) in fig.series.iter().enumerate() {
                let style = colour(i);
                if s.scatter {
                    chart
                        .draw_series(s.points.iter().map(|&p| Circle::new(p, 2, style.filled())))?
                        .label(s.name.clone())
                        .legend(move |(x, y)| Circle::new((x + 10, y), 3, style.filled()));
                } else {
                    chart
                        .draw_series(LineSeries::new(s.points.iter().copied(), style.stroke_width(2)))?
                        .label(s.name.clone())
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style.stroke_width(2)));
                    chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, style.filled())))?;
                }
            }
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        }};
    }

    if fig.log_y {
        let (lo, hi) = (y0 / 2.0, (y1 * 2.0).max(y0 * 4.0));
        draw!(builder.build_cartesian_2d(x0..x1, (lo..hi).log_scale())?);
    } else {
        let (lo, hi) = pad(y0, y1);
        draw!(builder.build_cartesian_2d(x0..x1, lo..hi)?);
    }
    root.present()?;
    Ok(())
}
