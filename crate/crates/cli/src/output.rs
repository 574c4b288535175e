//! Trajectory CSV, run manifest and SVG plots.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use microswim_core::paths::PathSpec;
use microswim_core::sim::Trajectory;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CSV_HEADER: &str = "t,px,py,s,wx,wy,speed,eps,tau,omega_norm";

/// CSV text with every value written to 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 + traj.len() * 240);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &traj.records {
        let fields = [
            r.t, r.p.x, r.p.y, r.s, r.omega.x, r.omega.y, r.speed, r.eps, r.tau, r.omega_norm,
        ];
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn config_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

pub fn now() -> String {
    chrono::Local::now().to_rfc3339()
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const MAX_POINTS: usize = 2000;

struct Series<'a> {
    points: Vec<(f64, f64)>,
    color: &'a str,
    dashed: bool,
}

fn downsample(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points;
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let last = *points.last().unwrap();
    let mut out: Vec<(f64, f64)> = points.into_iter().step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn bounds(series: &[Series<'_>], equal_axes: bool) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = hi - lo;
        let p = if span > 0.0 { 0.05 * span } else { lo.abs().max(1e-12) * 0.1 };
        (lo - p, hi + p)
    };
    let (x0, x1) = pad(b.0, b.1);
    let (y0, y1) = pad(b.2, b.3);
    if equal_axes {
        let span = (x1 - x0).max(y1 - y0);
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        return (cx - span / 2.0, cx + span / 2.0, cy - span / 2.0, cy + span / 2.0);
    }
    (x0, x1, y0, y1)
}

fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], equal_axes: bool) -> String {
    let (x0, x1, y0, y1) = bounds(series, equal_axes);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor_x, anchor_y) in [(x0, sx(x0), HEIGHT - MARGIN + 16.0), (x1, sx(x1), HEIGHT - MARGIN + 16.0)] {
        let _ = writeln!(s, r#"<text x="{anchor_x}" y="{anchor_y}" text-anchor="middle">{v:.3e}</text>"#);
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.3e}</text>"#, MARGIN - 4.0, sy(v) + 4.0);
    }
    for series in series {
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"/>"#,
            series.color,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn path_samples(path: &PathSpec, traj: &Trajectory) -> Vec<(f64, f64)> {
    let (lo, hi) = match path.period() {
        Some(period) => match path {
            PathSpec::Parametric(c) => (c.tau_min, c.tau_min + period),
            _ => (0.0, period),
        },
        None => {
            let (a, b) = traj
                .records
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.tau), b.max(r.tau)));
            if a.is_finite() {
                (a, b)
            } else {
                (0.0, 1.0)
            }
        }
    };
    (0..=400)
        .map(|k| {
            let p = path.point(lo + (hi - lo) * k as f64 / 400.0);
            (p.x, p.y)
        })
        .collect()
}

/// The four result panels; returns the written file paths.
pub fn write_plots(
    dir: &Path,
    stem: &str,
    traj: &Trajectory,
    path: &PathSpec,
    omega_so: f64,
) -> io::Result<Vec<PathBuf>> {
    let series = |f: &dyn Fn(&microswim_core::sim::Record) -> (f64, f64)| {
        downsample(traj.records.iter().map(f).collect())
    };
    let (t0, t1) = (
        traj.records.first().map_or(0.0, |r| r.t),
        traj.records.last().map_or(1.0, |r| r.t),
    );
    let panels = [
        (
            "position",
            svg_plot(
                "Position and desired path",
                "x [m]",
                "y [m]",
                &[
                    Series { points: path_samples(path, traj), color: "#999999", dashed: true },
                    Series { points: series(&|r| (r.p.x, r.p.y)), color: "#1f77b4", dashed: false },
                ],
                true,
            ),
        ),
        (
            "speed",
            svg_plot(
                "Speed",
                "t [s]",
                "|dp/dt| [m/s]",
                &[Series { points: series(&|r| (r.t, r.speed)), color: "#1f77b4", dashed: false }],
                false,
            ),
        ),
        (
            "omega",
            svg_plot(
                "Control input magnitude",
                "t [s]",
                "|omega| [rad/s]",
                &[
                    Series { points: series(&|r| (r.t, r.omega_norm)), color: "#1f77b4", dashed: false },
                    Series { points: vec![(t0, omega_so), (t1, omega_so)], color: "#d62728", dashed: true },
                ],
                false,
            ),
        ),
        (
            "s",
            svg_plot(
                "Integral state",
                "t [s]",
                "s",
                &[Series { points: series(&|r| (r.t, r.s)), color: "#1f77b4", dashed: false }],
                false,
            ),
        ),
    ];
    let mut written = Vec::new();
    for (name, svg) in panels {
        let file = dir.join(format!("{stem}_{name}.svg"));
        std::fs::write(&file, svg)?;
        written.push(file);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use microswim_core::sim::Record;
    use microswim_core::Vec2;

    fn record(t: f64) -> Record {
        Record {
            t,
            p: Vec2::new(0.1 * t, -1.0 / 3.0),
            s: 0.0,
            omega: Vec2::ZERO,
            speed: 1e-6,
            eps: -2e-3,
            tau: t,
            omega_norm: 0.0,
        }
    }

    #[test]
    fn csv_round_trips_doubles() {
        let traj = Trajectory { records: vec![record(0.0), record(0.01)] };
        let text = trajectory_csv(&traj);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[2], -1.0 / 3.0);
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 0.01);
        assert_eq!(row[1], 0.1 * 0.01);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            config_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn downsample_keeps_endpoints() {
        let pts: Vec<(f64, f64)> = (0..10_001).map(|k| (k as f64, 0.0)).collect();
        let d = downsample(pts);
        assert!(d.len() <= MAX_POINTS + 1);
        assert_eq!(d.first(), Some(&(0.0, 0.0)));
        assert_eq!(d.last(), Some(&(10_000.0, 0.0)));
    }
}
