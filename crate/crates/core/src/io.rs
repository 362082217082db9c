//! Text artifacts: CSV tables, minimal SVG charts, run manifests and the
//! bundled example configurations.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::sweep::{CrossingEvent, MixingRegion, SweepRecord};
use crate::tolerances::Tolerances;

/// Bundled configurations, addressable by name from the CLI.
pub const PRESETS: &[(&str, &str)] = &[
    ("two_level_v0", include_str!("../../../configs/two_level_v0.toml")),
    ("two_level_v005", include_str!("../../../configs/two_level_v005.toml")),
    ("two_level_v05", include_str!("../../../configs/two_level_v05.toml")),
    ("two_level_v1", include_str!("../../../configs/two_level_v1.toml")),
    ("four_level", include_str!("../../../configs/four_level.toml")),
    ("four_level_v003", include_str!("../../../configs/four_level_v003.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// One row per record: `a`, tracked energies, Hermitian norms, mixing
/// coefficients `b2_l_i` (label l, unperturbed level i, both 1-based) and the
/// matching confidence. Outside the Hermitian regime every `b2` column is
/// followed by its imaginary part.
pub fn sweep_csv(records: &[SweepRecord], hermitian: bool) -> String {
    let mut out = String::new();
    let Some(first) = records.first() else {
        return out;
    };
    let n = first.n();
    let mut header = vec!["a".to_string()];
    for l in 1..=n {
        header.push(format!("E_{l}_re"));
        header.push(format!("E_{l}_im"));
    }
    header.extend((1..=n).map(|l| format!("norm_{l}")));
    for l in 1..=n {
        for i in 1..=n {
            header.push(format!("b2_{l}_{i}"));
            if !hermitian {
                header.push(format!("b2_{l}_{i}_im"));
            }
        }
    }
    header.push("confidence".into());
    push_row(&mut out, &header);

    for rec in records {
        let mut row = vec![fmt_f64(rec.a)];
        for e in &rec.values {
            row.push(fmt_f64(e.re));
            row.push(fmt_f64(e.im));
        }
        row.extend(rec.norms.iter().map(|x| fmt_f64(*x)));
        for coeffs in &rec.b_sq {
            for b in coeffs {
                row.push(fmt_f64(b.re));
                if !hermitian {
                    row.push(fmt_f64(b.im));
                }
            }
        }
        row.push(fmt_f64(rec.match_confidence));
        push_row(&mut out, &row);
    }
    out
}

/// Crossing events with their mixing regions. `kind` is `avoided` when the two
/// states exchange character and `crossing` when their labels pass each other.
pub fn events_csv(events: &[(CrossingEvent, MixingRegion)]) -> String {
    let mut out = String::from("a_min,state_1,state_2,level_1,level_2,gap_min,kind,a_left,a_right,half_width,truncated\n");
    for (e, r) in events {
        push_row(
            &mut out,
            &[
                fmt_f64(e.a_min),
                (e.pair.0 + 1).to_string(),
                (e.pair.1 + 1).to_string(),
                (e.levels.0 + 1).to_string(),
                (e.levels.1 + 1).to_string(),
                fmt_f64(e.gap_min),
                if e.exchanged { "avoided" } else { "crossing" }.to_string(),
                fmt_f64(r.a_left),
                fmt_f64(r.a_right),
                fmt_f64(r.half_width),
                r.truncated.to_string(),
            ],
        );
    }
    out
}

pub fn fmt_complex_pair(z: Complex64) -> [String; 2] {
    [fmt_f64(z.re), fmt_f64(z.im)]
}

/// 1-based, space separated: `2 1` for a swap of two states.
pub fn fmt_permutation(p: &[usize]) -> String {
    p.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(" ")
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Standalone SVG line chart with axes, tick labels and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 18.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        top + ph / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &ser.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
            pen_down = true;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let ly = top + 14.0 + 16.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let r = format!("{v:.4}");
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" { "0".into() } else { r.into() }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Energies (real parts) of the tracked states over a sweep.
pub fn energies_chart(records: &[SweepRecord]) -> String {
    let n = records.first().map_or(0, |r| r.n());
    let series: Vec<Series> = (0..n)
        .map(|l| Series {
            name: format!("E_{}", l + 1),
            points: records.iter().map(|r| (r.a, r.values[l].re)).collect(),
        })
        .collect();
    line_chart("energies", "a", "E", &series)
}

/// Real parts of all mixing coefficients over a sweep.
pub fn mixing_chart(records: &[SweepRecord]) -> String {
    let n = records.first().map_or(0, |r| r.n());
    let series: Vec<Series> = (0..n)
        .flat_map(|l| {
            (0..n).map(move |i| Series {
                name: format!("b2_{}_{}", l + 1, i + 1),
                points: records.iter().map(|r| (r.a, r.b_sq[l][i].re)).collect(),
            })
        })
        .collect();
    line_chart("mixing coefficients", "a", "b^2", &series)
}

/// Everything needed to rerun a command: the exact arguments, the resolved
/// family (as config text) and the tolerances in effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: String,
    pub args: Vec<String>,
    pub output_paths: Vec<String>,
    pub tolerance_scale: f64,
    /// Entries set individually on the command line, after scaling.
    pub tolerance_overrides: std::collections::BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub config: String,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
