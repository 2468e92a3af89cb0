//! Serialization helpers shared by the CLI and the test suite.
//!
//! All floating-point output goes through [`fmt_f64`], which prints exactly
//! nine significant digits in scientific notation. That makes every CSV and
//! JSON artifact bit-identical across reruns of the same configuration,
//! which is what the regression tooling diffs against.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, Grid, GridFunction};

/// Format a float with exactly 9 significant digits.
///
/// Scientific notation with a fixed mantissa width keeps the output
/// unambiguous and diffable; `parse::<f64>()` round-trips it.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.8e}", x)
}

/// Minimal JSON value for the flat report objects this crate emits.
///
/// Numbers are printed through [`fmt_f64`] (quoted-free), so reports obey
/// the same nine-significant-digit rule as CSV output.
#[derive(Debug, Clone)]
pub enum Json {
    Num(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0);
        s.push('\n');
        s
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Num(x) => out.push_str(&fmt_f64(*x)),
            Json::Int(k) => {
                let _ = write!(out, "{}", k);
            }
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, indent);
                }
                out.push(']');
            }
            Json::Obj(pairs) => {
                if pairs.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                let pad = "  ".repeat(indent + 1);
                for (i, (key, val)) in pairs.iter().enumerate() {
                    out.push_str(&pad);
                    Json::Str(key.clone()).write(out, indent + 1);
                    out.push_str(": ");
                    val.write(out, indent + 1);
                    if i + 1 < pairs.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

/// CSV header + rows for a node field: `x[,y],value`, row-major node order.
pub fn grid_function_csv(u: &GridFunction) -> String {
    let g = &u.grid;
    let mut s = String::new();
    s.push_str(if g.dim == 1 { "x,value\n" } else { "x,y,value\n" });
    for k in 0..g.node_count() {
        let pos = g.node_pos(k);
        if g.dim == 1 {
            let _ = writeln!(s, "{},{}", fmt_f64(pos[0]), fmt_f64(u.values[k]));
        } else {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_f64(pos[0]),
                fmt_f64(pos[1]),
                fmt_f64(u.values[k])
            );
        }
    }
    s
}

/// CSV for a mask: same layout as a node field with value in {0,1}.
pub fn mask_csv(mask: &DomainMask) -> String {
    let g = &mask.grid;
    let mut s = String::new();
    s.push_str(if g.dim == 1 { "x,value\n" } else { "x,y,value\n" });
    for k in 0..g.node_count() {
        let pos = g.node_pos(k);
        let v = if mask.inside[k] { "1" } else { "0" };
        if g.dim == 1 {
            let _ = writeln!(s, "{},{}", fmt_f64(pos[0]), v);
        } else {
            let _ = writeln!(s, "{},{},{}", fmt_f64(pos[0]), fmt_f64(pos[1]), v);
        }
    }
    s
}

/// CSV for a measure field; infinite entries serialize as the literal `inf`.
pub fn measure_csv(beta: &crate::capmeasure::MeasureField) -> String {
    let g = &beta.grid;
    let mut s = String::new();
    s.push_str(if g.dim == 1 { "x,value\n" } else { "x,y,value\n" });
    for k in 0..g.node_count() {
        let pos = g.node_pos(k);
        let v = fmt_f64(beta.beta[k]);
        if g.dim == 1 {
            let _ = writeln!(s, "{},{}", fmt_f64(pos[0]), v);
        } else {
            let _ = writeln!(s, "{},{},{}", fmt_f64(pos[0]), fmt_f64(pos[1]), v);
        }
    }
    s
}

/// Parse a node-field CSV (`x[,y],value`) back into a grid and values.
///
/// The grid is reconstructed from the coordinate columns; rows must cover a
/// full uniform tensor grid in row-major order. `inf` is accepted as a value
/// so the same reader serves measure fields.
pub fn read_node_csv(text: &str) -> Result<(Grid, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("empty CSV"))?
        .trim();
    let dim = match header {
        "x,value" => 1usize,
        "x,y,value" => 2usize,
        other => {
            return Err(Error::parse(format!(
                "unrecognized CSV header {:?} (expected \"x,value\" or \"x,y,value\")",
                other
            )))
        }
    };
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != dim + 1 {
            return Err(Error::parse(format!(
                "CSV row {}: expected {} columns, got {}",
                lineno + 2,
                dim + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            let t = s.trim();
            match t {
                "inf" => Ok(f64::INFINITY),
                _ => t
                    .parse::<f64>()
                    .map_err(|_| Error::parse(format!("CSV row {}: bad number {:?}", lineno + 2, t))),
            }
        };
        xs.push(parse(cols[0])?);
        if dim == 2 {
            ys.push(parse(cols[1])?);
        }
        vals.push(parse(cols[dim])?);
    }
    if vals.is_empty() {
        return Err(Error::parse("CSV has a header but no rows"));
    }

    let axis = |coords: &[f64]| -> Result<Vec<f64>> {
        let mut uniq: Vec<f64> = Vec::new();
        for &c in coords {
            if !uniq.iter().any(|&u| (u - c).abs() <= 1e-12 * (1.0 + c.abs())) {
                uniq.push(c);
            }
        }
        uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if uniq.len() < 2 {
            return Err(Error::parse("CSV grid axis has fewer than 2 coordinates"));
        }
        let h = uniq[1] - uniq[0];
        for w in uniq.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * (1.0 + h.abs()) {
                return Err(Error::parse("CSV grid coordinates are not uniformly spaced"));
            }
        }
        Ok(uniq)
    };

    let ux = axis(&xs)?;
    let grid = if dim == 1 {
        Grid::build(&[(ux[0], *ux.last().unwrap())], &[ux.len()])?
    } else {
        let uy = axis(&ys)?;
        Grid::build(
            &[(ux[0], *ux.last().unwrap()), (uy[0], *uy.last().unwrap())],
            &[ux.len(), uy.len()],
        )?
    };
    if vals.len() != grid.node_count() {
        return Err(Error::parse(format!(
            "CSV row count {} does not cover the {}-node grid it implies",
            vals.len(),
            grid.node_count()
        )));
    }
    // Verify row-major ordering: row k must sit at node k of the
    // reconstructed grid.
    for (k, (&x, v)) in xs.iter().zip(vals.iter()).enumerate() {
        let pos = grid.node_pos(k);
        let ok_x = (x - pos[0]).abs() <= 1e-9 * (1.0 + pos[0].abs());
        let ok_y = dim == 1 || (ys[k] - pos[1]).abs() <= 1e-9 * (1.0 + pos[1].abs());
        if !ok_x || !ok_y {
            return Err(Error::parse(format!(
                "CSV rows are not in row-major node order (row {} is off-grid)",
                k + 2
            )));
        }
        let _ = v;
    }
    Ok((grid, vals))
}

/// 8-bit binary PGM (P5) of a 2D node field, values rescaled to 0..255.
pub fn pgm_bytes(u: &GridFunction) -> Result<Vec<u8>> {
    let g = &u.grid;
    if g.dim != 2 {
        return Err(Error::invalid("PGM output requires a 2D grid"));
    }
    let (lo, hi) = u
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(32 + g.node_count());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", g.n[0], g.n[1]).as_bytes());
    // Image rows top-to-bottom: flip y so the picture matches the axes.
    for j in (0..g.n[1]).rev() {
        for i in 0..g.n[0] {
            let v = u.values[g.idx(i, j)];
            let byte = (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8;
            out.push(byte);
        }
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
