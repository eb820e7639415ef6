//! File formats: CSV tables and vectors, JSON lines, legacy VTK.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Write rows as CSV; the header comes from the first row's field names.
pub fn write_csv<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_jsonl(BufWriter::new(File::create(path)?), records)
}

/// A vector as a one-column CSV with header `value`.
pub fn write_vector_csv<W: Write>(mut w: W, v: &[f64]) -> Result<()> {
    writeln!(w, "value")?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a vector written by [`write_vector_csv`]. Accepts an optional
/// header line, one value per line, and ignores blank lines.
pub fn read_vector_csv<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let field = t.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::Parse { line: i + 1, msg: format!("non-finite value {field}") }),
            Err(_) if i == 0 && out.is_empty() => continue,
            Err(_) => return Err(Error::Parse { line: i + 1, msg: format!("not a number: {field}") }),
        }
        if t.contains(',') {
            return Err(Error::Parse { line: i + 1, msg: "expected a single column".into() });
        }
    }
    Ok(out)
}

pub fn write_matrix_market_file(path: &Path, k: &CsrMatrix) -> Result<()> {
    k.write_matrix_market(BufWriter::new(File::create(path)?))
}

/// Legacy-VTK structured points with point-data scalar fields, each of
/// length nx*ny in row-major order from the lower-left corner.
pub fn write_vtk_structured_points<W: Write>(
    mut w: W,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    spacing: [f64; 2],
    fields: &[(&str, &[f64])],
) -> Result<()> {
    for (name, f) in fields {
        if f.len() != nx * ny {
            return Err(Error::DimensionMismatch(format!("field {name} has {} values for a {nx}x{ny} grid", f.len())));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidConfiguration(format!("bad VTK field name {name:?}")));
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "crackfem field output")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {nx} {ny} 1")?;
    writeln!(w, "ORIGIN {:e} {:e} 0", origin[0], origin[1])?;
    writeln!(w, "SPACING {:e} {:e} 1", spacing[0], spacing[1])?;
    writeln!(w, "POINT_DATA {}", nx * ny)?;
    for (name, f) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in *f {
            writeln!(w, "{v:e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: usize,
        b: f64,
    }

    #[test]
    fn csv_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[Row { a: 1, b: 0.5 }, Row { a: 2, b: 1.5 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n2,1.5\n");
    }

    #[test]
    fn vector_round_trip() {
        let v = vec![1.0, -2.5e-7, 3.0e12, 0.1];
        let mut buf = Vec::new();
        write_vector_csv(&mut buf, &v).unwrap();
        assert_eq!(read_vector_csv(&buf[..]).unwrap(), v);
        assert_eq!(read_vector_csv(&b"1\n2\n\n3\n"[..]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(read_vector_csv(&b"value\n1\nx\n"[..]).is_err());
        assert!(read_vector_csv(&b"1,2\n"[..]).is_err());
        assert!(read_vector_csv(&b"1\nNaN\n"[..]).is_err());
    }

    #[test]
    fn jsonl_one_object_per_line() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[Row { a: 1, b: 2.0 }, Row { a: 3, b: 4.0 }]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().next().unwrap(), r#"{"a":1,"b":2.0}"#);
    }

    #[test]
    fn vtk_layout() {
        let mut buf = Vec::new();
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        write_vtk_structured_points(&mut buf, 3, 2, [0.0, 0.0], [0.5, 1.0], &[("von_mises", &f)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains("DIMENSIONS 3 2 1\n"));
        assert!(s.contains("POINT_DATA 6\nSCALARS von_mises double 1\nLOOKUP_TABLE default\n1e0\n"));
        assert!(write_vtk_structured_points(Vec::new(), 2, 2, [0.0; 2], [1.0; 2], &[("u", &f)]).is_err());
    }
}
