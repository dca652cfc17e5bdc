use std::fmt::Write as _;
use std::path::Path;

use super::IoError;
use crate::knot::SampledKnot;

fn write(path: &Path, text: String) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

/// `s,x,y,z` rows in sample order, 17 significant digits.
pub fn write_polyline_csv(knot: &SampledKnot<f64>, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("s,x,y,z\n");
    for (s, p) in knot.params.iter().zip(&knot.points) {
        let _ = writeln!(out, "{s:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.y, p.z);
    }
    write(path, out)
}

/// Reads a file written by [`write_polyline_csv`] as `(s, point)` rows.
pub fn read_polyline_csv(path: &Path) -> Result<Vec<(f64, [f64; 3])>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                column: 1,
                message: e.to_string(),
            })?;
        if fields.len() != 4 {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                column: 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        rows.push((fields[0], [fields[1], fields[2], fields[3]]));
    }
    Ok(rows)
}

/// Closed OBJ polyline: one `v` per sample and a single `l` element that
/// returns to the first vertex.
pub fn write_polyline_obj(knot: &SampledKnot<f64>, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for p in &knot.points {
        let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    out.push('l');
    for k in 1..=knot.len() {
        let _ = write!(out, " {k}");
    }
    out.push_str(" 1\n");
    write(path, out)
}
