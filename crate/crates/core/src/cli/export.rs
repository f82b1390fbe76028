//! Artifact files: CSV fields, JSON descriptors and SVG polylines.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bernoulli::BranchingSet;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::input(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

/// Something a run can write to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Artifact {
    Field { field: ScalarField },
    Branching(BranchingSet),
    /// Polylines in a physical window `[x0, x1, y0, y1]`.
    Figure { window: [f64; 4], lines: Vec<Polyline> },
    Json(Value),
}

impl Artifact {
    pub fn supports(&self, format: Format) -> bool {
        matches!(
            (self, format),
            (_, Format::Json) | (Artifact::Field { .. }, Format::Csv) | (Artifact::Figure { .. }, Format::Svg)
        )
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match (self, format) {
            (Artifact::Field { field }, Format::Csv) => Ok(field_csv(field)),
            (Artifact::Field { field }, Format::Json) => pretty(&field_json(field)),
            (Artifact::Branching(b), Format::Json) => pretty(b),
            (Artifact::Figure { window, lines }, Format::Svg) => Ok(svg(*window, lines)),
            (Artifact::Figure { window, lines }, Format::Json) => pretty(&json!({ "window": window, "lines": lines })),
            (Artifact::Json(v), Format::Json) => pretty(v),
            (_, f) => Err(Error::input(format!("artifact cannot be exported as {}", f.extension()))),
        }
    }
}

pub fn pretty<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Shortest round-trip decimal; empty for masked or non-finite samples.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        String::new()
    }
}

/// Header `nx=..,ny=..,h=..,x0=..,y0=..`, then one line per grid row from
/// `y0` upwards; masked samples are empty fields.
pub fn field_csv(f: &ScalarField) -> String {
    let g = f.grid;
    let mut s = format!("nx={},ny={},h={},x0={},y0={}\r\n", g.nx, g.ny, num(g.h), num(g.origin[0]), num(g.origin[1]));
    for j in 0..g.ny {
        let row: Vec<String> = (0..g.nx)
            .map(|i| {
                let k = g.idx(i, j);
                if f.mask[k] {
                    num(f.values[k])
                } else {
                    String::new()
                }
            })
            .collect();
        s.push_str(&row.join(","));
        s.push_str("\r\n");
    }
    s
}

pub fn read_field_csv(text: &str) -> Result<ScalarField> {
    let bad = |m: &str| Error::input(format!("field CSV: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut meta = std::collections::BTreeMap::new();
    for item in header.split(',') {
        let (k, v) = item.split_once('=').ok_or_else(|| bad("malformed header"))?;
        meta.insert(k.trim(), v.trim());
    }
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| bad(&format!("header lacks `{k}`")));
    let parse_usize = |k: &str| get(k)?.parse::<usize>().map_err(|_| bad(&format!("bad `{k}`")));
    let parse_f64 = |k: &str| get(k)?.parse::<f64>().map_err(|_| bad(&format!("bad `{k}`")));
    let grid = GridSpec::new([parse_f64("x0")?, parse_f64("y0")?], parse_f64("h")?, parse_usize("nx")?, parse_usize("ny")?)?;
    let mut f = ScalarField::zeros(grid);
    let mut rows = 0;
    for (j, line) in lines.enumerate() {
        if j >= grid.ny {
            return Err(bad("too many rows"));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != grid.nx {
            return Err(bad(&format!("row {j} has {} fields, expected {}", cells.len(), grid.nx)));
        }
        for (i, c) in cells.iter().enumerate() {
            let k = grid.idx(i, j);
            if c.is_empty() {
                f.mask[k] = false;
            } else {
                f.values[k] = c.parse().map_err(|_| bad(&format!("bad value `{c}`")))?;
            }
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(bad(&format!("{rows} rows, expected {}", grid.ny)));
    }
    Ok(f)
}

/// JSON descriptor of a field: grid metadata and row-major values, `null`
/// where masked.
pub fn field_json(f: &ScalarField) -> Value {
    let g = f.grid;
    let values: Vec<Value> =
        (0..g.len()).map(|k| if f.mask[k] && f.values[k].is_finite() { json!(f.values[k]) } else { Value::Null }).collect();
    json!({ "nx": g.nx, "ny": g.ny, "h": g.h, "origin": g.origin, "values": values })
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Polylines in user units; `y` is negated so the figure reads upwards,
/// hence the viewBox `x0 −y1 (x1−x0) (y1−y0)`.
pub fn svg(window: [f64; 4], lines: &[Polyline]) -> String {
    let [x0, x1, y0, y1] = window;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" preserveAspectRatio="none">"#,
        num(x0),
        num(-y1),
        num(x1 - x0),
        num(y1 - y0)
    );
    for (n, l) in lines.iter().enumerate() {
        let pts: Vec<String> = l.points.iter().map(|p| format!("{},{}", num(p[0]), num(-p[1]))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" fill="none" stroke="{}" stroke-width="1.5" vector-effect="non-scaling-stroke" points="{}"/>"#,
            escape(&l.label),
            COLOURS[n % COLOURS.len()],
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One horizontal strip per check: green within tolerance, red otherwise;
/// the strip length is `log10(sup/tol)` clamped to `[−12, 4]` and shifted
/// to be positive.
pub fn residual_strips(report: &crate::report::ResidualReport) -> String {
    let n = report.checks.len().max(1);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 16 {n}\" preserveAspectRatio=\"none\">\n"
    );
    for (j, c) in report.checks.iter().enumerate() {
        let r = if c.sup == 0.0 { -12.0 } else { (c.sup / c.tolerance).log10() };
        let len = if r.is_finite() { r.clamp(-12.0, 4.0) + 12.0 } else { 16.0 };
        let y = j as f64 + 0.5;
        let _ = writeln!(
            s,
            r#"<polyline data-label="{}" fill="none" stroke="{}" stroke-width="0.8" points="0,{y} {},{y}"/>"#,
            escape(&c.name),
            if c.pass { "#2ca02c" } else { "#d62728" },
            num(len.max(0.05))
        );
    }
    s.push_str("</svg>\n");
    s
}
