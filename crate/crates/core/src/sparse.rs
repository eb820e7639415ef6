//! Compressed sparse row storage for symmetric matrices (both triangles stored).

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from a per-row list of sorted unique columns, values zeroed.
    pub fn from_pattern(rows: Vec<Vec<u32>>) -> CsrMatrix {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        for r in rows {
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            values: vec![0.0; col_idx.len()],
            col_idx,
        }
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in trip {
            rows[i].push((j as u32, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Position of entry (i, j) in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|p| self.row_ptr[i] + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p] as usize];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest |K_ij - K_ji| over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p] as usize;
                d = d.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        d
    }

    /// Principal submatrix on the given sorted global indices.
    pub fn submatrix(&self, idx: &[usize]) -> CsrMatrix {
        let mut local = vec![u32::MAX; self.n];
        for (k, &g) in idx.iter().enumerate() {
            local[g] = k as u32;
        }
        let mut row_ptr = Vec::with_capacity(idx.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &g in idx {
            let mut entries: Vec<(u32, f64)> = Vec::new();
            for p in self.row_ptr[g]..self.row_ptr[g + 1] {
                let l = local[self.col_idx[p] as usize];
                if l != u32::MAX {
                    entries.push((l, self.values[p]));
                }
            }
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: idx.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Symmetric permutation: B[i][j] = A[perm[i]][perm[j]].
    pub fn permute(&self, perm: &[usize]) -> CsrMatrix {
        let mut inv = vec![0u32; self.n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i as u32;
        }
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut buf: Vec<(u32, f64)> = Vec::new();
        for &old in perm {
            buf.clear();
            for p in self.row_ptr[old]..self.row_ptr[old + 1] {
                buf.push((inv[self.col_idx[p] as usize], self.values[p]));
            }
            buf.sort_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                b = b.max((self.col_idx[p] as usize).abs_diff(i));
            }
        }
        b
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[p] as usize] = self.values[p];
            }
        }
        d
    }

    /// Write the lower triangle in MatrixMarket symmetric coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        let lower: usize = (0..self.n)
            .map(|i| self.row(i).0.iter().filter(|&&c| c as usize <= i).count())
            .sum();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower)?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c as usize <= i {
                    writeln!(w, "{} {} {:e}", i + 1, c + 1, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Parse a MatrixMarket coordinate real matrix (general or symmetric).
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
    let header = header?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(Error::Parse { line: 1, msg: "expected %%MatrixMarket matrix coordinate header".into() });
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(Error::Parse { line: 1, msg: format!("unsupported field {}", h[3]) });
    }
    let symmetric = match h[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Parse { line: 1, msg: format!("unsupported symmetry {other}") }),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let perr = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
        let f: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if f.len() != 3 {
                    return Err(perr("expected size line"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| perr("bad size"));
                let (m, n, nnz) = (p(f[0])?, p(f[1])?, p(f[2])?);
                if m != n {
                    return Err(perr("matrix must be square"));
                }
                if n > 50_000_000 || nnz > 500_000_000 {
                    return Err(perr("matrix too large"));
                }
                size = Some((m, n, nnz));
                trip.reserve(nnz.min(1 << 20));
            }
            Some((_, n, nnz)) => {
                if f.len() != 3 {
                    return Err(perr("expected 'row col value'"));
                }
                let i: usize = f[0].parse().map_err(|_| perr("bad row index"))?;
                let j: usize = f[1].parse().map_err(|_| perr("bad column index"))?;
                let v: f64 = f[2].parse().map_err(|_| perr("bad value"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(perr("index out of range"));
                }
                if trip.len() >= 2 * nnz {
                    return Err(perr("more entries than declared"));
                }
                trip.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    trip.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (_, n, _) = size.ok_or(Error::Parse { line: 0, msg: "missing size line".into() })?;
    Ok(CsrMatrix::from_triplets(n, &trip))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
