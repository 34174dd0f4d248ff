//! CSV and SVG output, plus readers for the CSV dialect the CLI writes.
//!
//! CSV dialect: comma separators, LF line endings, '#'-prefixed comment
//! lines before the header row, values printed with enough digits to
//! round-trip through f64 exactly.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dde::Trajectory;
use crate::stochastic::MeanTrajectory;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv has no data rows")]
    Empty,
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        // f64 Display prints the shortest digits that round-trip exactly.
        let _ = write!(out, "{v}");
        first = false;
    }
    out.push('\n');
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# dt = {}", traj.dt);
    let _ = writeln!(out, "# clamp_events = {}", traj.clamp_events);
    let _ = writeln!(out, "time,{}", traj.labels.join(","));
    for (t, row) in traj.times.iter().zip(&traj.rows) {
        push_row(&mut out, std::iter::once(*t).chain(row.iter().copied()));
    }
    out
}

pub fn mean_trajectory_to_csv(mt: &MeanTrajectory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# master_seed = {}", mt.master_seed);
    let _ = writeln!(out, "# n_runs = {}", mt.n_runs);
    let header: Vec<String> = mt
        .labels
        .iter()
        .flat_map(|l| [format!("{l}_mean"), format!("{l}_std")])
        .collect();
    let _ = writeln!(out, "time,{}", header.join(","));
    for ((t, mean), std) in mt.times.iter().zip(&mt.mean).zip(&mt.std) {
        let interleaved = mean
            .iter()
            .zip(std)
            .flat_map(|(&m, &s)| [m, s]);
        push_row(&mut out, std::iter::once(*t).chain(interleaved));
    }
    out
}

/// Generic reader for the CLI's CSV dialect: returns (header, rows).
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), OutputError> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match &header {
            None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let row: Result<Vec<f64>, _> =
                    line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let row = row.map_err(|e| OutputError::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
                if row.len() != h.len() {
                    return Err(OutputError::Parse {
                        line: idx + 1,
                        message: format!("expected {} fields, got {}", h.len(), row.len()),
                    });
                }
                rows.push(row);
            }
        }
    }
    let header = header.ok_or(OutputError::Empty)?;
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    Ok((header, rows))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory, OutputError> {
    let (header, rows) = parse_csv(text)?;
    if header.first().map(String::as_str) != Some("time") {
        return Err(OutputError::Parse {
            line: 1,
            message: "first column must be `time`".into(),
        });
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    Ok(Trajectory {
        dt,
        labels: header[1..].to_vec(),
        times,
        rows: rows.into_iter().map(|r| r[1..].to_vec()).collect(),
        steady_state_reached: false,
        clamp_events: 0,
    })
}

/// A line series for [`line_chart`].
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Renders a static line chart. `hline` draws a horizontal reference line
/// (the outbreak threshold in the sweep plots) and marks where each series
/// crosses it.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    hline: Option<f64>,
) -> String {
    const W: f64 = 760.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;

    let all_points = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all_points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if let Some(h) = hline {
        y_min = y_min.min(h);
        y_max = y_max.max(h);
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| ML + (x - x_min) / (x_max - x_min) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_min) / (y_max - y_min) * (H - MT - MB);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        W / 2.0,
        xml_escape(title)
    );

    // Axes with five ticks each.
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - MB,
        W - MR
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB
    );
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\
             <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4:.3}</text>",
            sx(fx),
            H - MB,
            H - MB + 5.0,
            H - MB + 20.0,
            fx
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\
             <text x=\"{3}\" y=\"{4}\" text-anchor=\"end\">{5:.3}</text>",
            ML - 5.0,
            sy(fy),
            ML,
            ML - 8.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        (ML + W - MR) / 2.0,
        H - 12.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
        (MT + H - MB) / 2.0,
        xml_escape(y_label)
    );

    if let Some(h) = hline {
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"gray\" \
             stroke-dasharray=\"6 4\"/>",
            sy(h),
            W - MR
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>",
            path.join(" ")
        );
        // Legend entry.
        let ly = MT + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"2\"/><text x=\"{2}\" y=\"{3}\">{4}</text>",
            W - MR - 170.0,
            W - MR - 145.0,
            W - MR - 140.0,
            ly + 4.0,
            xml_escape(s.label)
        );
        // Mark the crossing of the reference line, if any.
        if let Some(h) = hline {
            if let Some(x_cross) = crossing(&s.points, h) {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{color}\"/>",
                    sx(x_cross),
                    sy(h)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Linear interpolation of the first downward crossing of `level`.
fn crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if (y0 - level) * (y1 - level) <= 0.0 && y0 != y1 {
            Some(x0 + (level - y0) / (y1 - y0) * (x1 - x0))
        } else {
            None
        }
    })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trajectory() -> Trajectory {
        Trajectory {
            dt: 0.5,
            labels: vec!["i_h".into(), "i_m".into()],
            times: vec![0.0, 0.5, 1.0],
            rows: vec![
                vec![0.1, 0.2],
                vec![0.15, 0.25],
                vec![1.0 / 3.0, 0.026_437_812_5],
            ],
            steady_state_reached: false,
            clamp_events: 0,
        }
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let traj = sample_trajectory();
        let parsed = parse_trajectory_csv(&trajectory_to_csv(&traj)).unwrap();
        assert_eq!(parsed.labels, traj.labels);
        assert_eq!(parsed.times, traj.times);
        assert_eq!(parsed.rows, traj.rows);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_csv("time,a\n1,oops\n").unwrap_err();
        match err {
            OutputError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chart_contains_series_and_threshold() {
        let svg = line_chart(
            "r0 vs x",
            "bait density",
            "r0",
            &[Series {
                label: "p = 0.2",
                points: vec![(0.0, 3.0), (1.0, 0.5)],
            }],
            Some(1.0),
        );
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("p = 0.2"));
        assert!(svg.contains("<circle")); // crossing marker
        assert!(svg.contains("</svg>"));
    }
}
