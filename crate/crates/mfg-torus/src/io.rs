//! Artifact writers and readers. CSV floats carry 17 significant digits; JSON
//! floats use the shortest round-trip representation.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use mfg_torus_core::measures::CurveMeasure;
use mfg_torus_core::paths::DiscreteCurve;
use mfg_torus_core::torus::TorusGrid;

use crate::error::{CliError, Result};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory CSV table, written in one piece.
pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n", width: header.len() }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.width);
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, &self.text)?)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse { what: "json".into(), msg: e.to_string() })?;
    Ok(fs::write(path, text + "\n")?)
}

pub fn write_jsonl(path: &Path, rows: &[Value]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    Ok(fs::write(path, text)?)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { what: path.display().to_string(), msg: e.to_string() })
}

/// Cell-center coordinate columns: `x` in one dimension, `x,y` in two.
pub fn coord_header(grid: &TorusGrid, name: &str) -> Vec<String> {
    if grid.dim() == 1 {
        vec![name.to_string()]
    } else {
        vec![name.to_string(), format!("y{}", name.trim_start_matches('x'))]
    }
}

pub fn coord_fields(grid: &TorusGrid, cell: usize) -> Vec<String> {
    let c = grid.center(cell);
    if grid.dim() == 1 {
        vec![num(c[0])]
    } else {
        vec![num(c[0]), num(c[1])]
    }
}

pub fn curve_json(curve: &DiscreteCurve, weight: f64) -> Value {
    json!({ "weight": weight, "nodes": curve.nodes() })
}

pub fn measure_json(xi: &CurveMeasure) -> Vec<Value> {
    xi.atoms().iter().map(|(c, w)| curve_json(c, *w)).collect()
}

/// Curve measure from `{"weight", "nodes"}` records.
pub fn measure_from_json(rows: &[Value], what: &str) -> Result<CurveMeasure> {
    let bad = |msg: String| CliError::Parse { what: what.to_string(), msg };
    let mut atoms = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let w = r["weight"].as_f64().ok_or_else(|| bad(format!("record {i}: missing weight")))?;
        let nodes = r["nodes"]
            .as_array()
            .ok_or_else(|| bad(format!("record {i}: missing nodes")))?
            .iter()
            .map(|n| n.as_u64().map(|n| n as usize))
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| bad(format!("record {i}: nodes must be cell indices")))?;
        atoms.push((DiscreteCurve::new(nodes), w));
    }
    Ok(CurveMeasure::new(atoms)?)
}

pub fn read_measure_jsonl(path: &Path) -> Result<CurveMeasure> {
    let what = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Parse { what: what.clone(), msg: format!("line {}: {e}", i + 1) })
        })
        .collect::<Result<Vec<Value>>>()?;
    measure_from_json(&rows, &what)
}
