//! CSV and JSON encodings of [`GridField`].
//!
//! CSV layout, one record per line:
//!
//! ```text
//! axis_sizes,5,5,5,5
//! spacings,5.0000000000000000e-1,...
//! center,0.0000000000000000e0,...
//! half_widths,...
//! tube,<radius>,<coord>,...
//! values
//! <value>
//! ...
//! ```
//!
//! Values are printed with 17 significant digits, which round-trips every
//! `f64` exactly. Unavailable nodes are written as `NA`.

use serde::{Deserialize, Serialize};

use super::{GridDomain, GridError, GridField};

fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn row<T: ToString>(name: &str, items: impl IntoIterator<Item = T>) -> String {
    let mut line = name.to_string();
    for item in items {
        line.push(',');
        line.push_str(&item.to_string());
    }
    line.push('\n');
    line
}

pub(super) fn to_csv(field: &GridField) -> String {
    let d = field.domain();
    let mut out = String::with_capacity(26 * field.len() + 256);
    out.push_str(&row("axis_sizes", d.points_per_axis()));
    out.push_str(&row("spacings", d.spacings().into_iter().map(fmt17)));
    out.push_str(&row("center", d.center().iter().map(|&v| fmt17(v))));
    out.push_str(&row("half_widths", d.half_widths().iter().map(|&v| fmt17(v))));
    let mut tube = vec![fmt17(d.excluded_tube_radius())];
    tube.extend(d.tube_coords().iter().map(|k| k.to_string()));
    out.push_str(&row("tube", tube));
    out.push_str("values\n");
    for &v in field.values() {
        out.push_str(&fmt17(v));
        out.push('\n');
    }
    out
}

fn parse_f64(s: &str) -> Result<f64, GridError> {
    let s = s.trim();
    if s == "NA" {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|e| GridError::Parse(format!("bad number {s:?}: {e}")))
}

fn header<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<Vec<&'a str>, GridError> {
    let line = lines.next().ok_or_else(|| GridError::Parse(format!("missing {name} record")))?;
    let mut parts = line.trim_end().split(',');
    if parts.next() != Some(name) {
        return Err(GridError::Parse(format!("expected {name} record, got {line:?}")));
    }
    Ok(parts.collect())
}

pub(super) fn from_csv(text: &str) -> Result<GridField, GridError> {
    let mut lines = text.lines();
    let sizes = header(&mut lines, "axis_sizes")?
        .into_iter()
        .map(|s| s.trim().parse::<usize>().map_err(|e| GridError::Parse(format!("bad axis size {s:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let spacings = header(&mut lines, "spacings")?.into_iter().map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    let center = header(&mut lines, "center")?.into_iter().map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    let half_widths = header(&mut lines, "half_widths")?.into_iter().map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    let tube = header(&mut lines, "tube")?;
    let (radius, coords) = tube.split_first().ok_or_else(|| GridError::Parse("empty tube record".into()))?;
    let tube_coords = coords
        .iter()
        .map(|s| s.trim().parse::<usize>().map_err(|e| GridError::Parse(format!("bad tube coordinate {s:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let domain = GridDomain::new(center, half_widths, sizes)?
        .with_tube_coords(tube_coords)?
        .with_tube(parse_f64(radius)?)?;
    if spacings.len() != domain.axes()
        || spacings.iter().zip(domain.spacings()).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs())
    {
        return Err(GridError::Parse("spacings disagree with axis sizes and half widths".into()));
    }
    if lines.next().map(str::trim) != Some("values") {
        return Err(GridError::Parse("missing values record".into()));
    }
    let values = lines.filter(|l| !l.trim().is_empty()).map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    GridField::from_values(domain, values)
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    domain: GridDomain,
    values: Vec<Option<f64>>,
}

pub(super) fn to_json(field: &GridField) -> Result<String, GridError> {
    let doc = FieldJson {
        domain: field.domain().clone(),
        values: field.values().iter().map(|&v| if v.is_nan() { None } else { Some(v) }).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub(super) fn from_json(text: &str) -> Result<GridField, GridError> {
    let doc: FieldJson = serde_json::from_str(text)?;
    doc.domain.validate()?;
    let values = doc.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    GridField::from_values(doc.domain, values)
}
