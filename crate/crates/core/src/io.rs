//! File formats: pure-state files, `--dims` strings, matrix encoding and the
//! fixed-precision JSON writer used for every report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, CVector, Layout, PureState, C64};

/// Largest state dimension accepted from files or `--dims`.
pub const MAX_STATE_DIM: usize = 1 << 13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub label: String,
    pub dim: usize,
}

/// `{"factors": [{"label", "dim"}, …], "amplitudes": [[re, im], …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub factors: Vec<FactorSpec>,
    pub amplitudes: Vec<[f64; 2]>,
}

fn checked_layout(factors: impl IntoIterator<Item = (String, usize)>) -> Result<Layout> {
    let mut layout = Layout::empty();
    let mut total = 1usize;
    for (label, dim) in factors {
        if label.is_empty() {
            return Err(Error::Parse("empty factor label".into()));
        }
        total = total
            .checked_mul(dim)
            .filter(|&t| t <= MAX_STATE_DIM)
            .ok_or_else(|| Error::Infeasible(format!("state dimension exceeds {MAX_STATE_DIM}")))?;
        layout.push(label, dim)?;
    }
    Ok(layout)
}

impl StateFile {
    pub fn from_state(psi: &PureState) -> Self {
        StateFile {
            factors: psi
                .layout()
                .factors()
                .iter()
                .map(|f| FactorSpec { label: f.label.clone(), dim: f.dim })
                .collect(),
            amplitudes: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    /// Validates the layout and renormalizes the amplitudes.
    pub fn to_state(&self) -> Result<PureState> {
        let layout = checked_layout(self.factors.iter().map(|f| (f.label.clone(), f.dim)))?;
        if self.amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a layout of dimension {}",
                self.amplitudes.len(),
                layout.total_dim()
            )));
        }
        if self.amplitudes.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite amplitude".into()));
        }
        let v = CVector::from_iterator(self.amplitudes.len(), self.amplitudes.iter().map(|z| C64::new(z[0], z[1])));
        PureState::normalized(v, layout)
    }
}

pub fn parse_state(s: &str) -> Result<PureState> {
    let file: StateFile = serde_json::from_str(s)?;
    file.to_state()
}

/// Parses `"A=16,R=2"` into an ordered layout.
pub fn parse_dims(s: &str) -> Result<Layout> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty dimension list".into()));
    }
    let mut items = Vec::new();
    for part in s.split(',') {
        let (label, dim) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected LABEL=DIM, got `{}`", part.trim())))?;
        let label = label.trim();
        if label.is_empty() || label.chars().any(|c| c.is_whitespace() || c == '=') {
            return Err(Error::Parse(format!("bad factor label `{label}`")));
        }
        let dim: usize = dim
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension `{}` for `{label}`", dim.trim())))?;
        items.push((label.to_string(), dim));
    }
    checked_layout(items)
}

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

/// Rectangular complex matrix from rows of `[re, im]` pairs.
pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("matrix must be a non-empty rectangle".into()));
    }
    if nrows.checked_mul(ncols).is_none_or(|n| n > MAX_STATE_DIM * MAX_STATE_DIM) {
        return Err(Error::Infeasible("matrix too large".into()));
    }
    let mut m = CMatrix::zeros(nrows, ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::Parse("non-finite matrix entry".into()));
            }
            m[(r, c)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

/// Formats a float with 17 significant digits; non-finite values become `null`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Pretty JSON where every floating-point number carries 17 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Short arrays of scalars stay on one line.
            if items.len() <= 4 && items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, level, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(level + 1, out);
                write_value(item, level + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(item, level + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push('}');
        }
    }
}
