//! Incomplete Cholesky with level-of-fill and complete sparse Cholesky.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ordering::{reorder, Ordering};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Maximum number of shifted restarts after a non-positive pivot.
pub const MAX_SHIFT_RETRIES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMethod {
    /// Incomplete Cholesky keeping fill up to the given level.
    Icc(usize),
    /// Complete Cholesky.
    Cholesky,
}

impl FromStr for FactorMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "cc" || t == "cholesky" {
            return Ok(FactorMethod::Cholesky);
        }
        let inner = t
            .strip_prefix("icc(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("icc"));
        match inner.map(str::parse::<usize>) {
            Some(Ok(l)) => Ok(FactorMethod::Icc(l)),
            _ => Err(Error::Unsupported(format!("subsolver {s}"))),
        }
    }
}

impl fmt::Display for FactorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorMethod::Icc(l) => write!(f, "ICC({l})"),
            FactorMethod::Cholesky => write!(f, "CC"),
        }
    }
}

/// Lower-triangular factor L (rows stored, diagonal last) of P A P^T.
#[derive(Clone, Debug)]
pub struct SubFactor {
    pub method: FactorMethod,
    pub n: usize,
    /// New-to-old permutation.
    pub perm: Vec<usize>,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
    pub shift: f64,
    pub retries: usize,
    pub factor_seconds: f64,
}

impl SubFactor {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn memory_bytes(&self) -> usize {
        self.values.len() * 8 + self.col_idx.len() * 4 + self.row_ptr.len() * 8 + self.perm.len() * 8
    }

    /// Overwrite `x` with (L L^T)^{-1} x in the original ordering.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut y: Vec<f64> = self.perm.iter().map(|&p| x[p]).collect();
        for i in 0..self.n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut v = y[i];
            for p in s..e - 1 {
                v -= self.values[p] * y[self.col_idx[p] as usize];
            }
            y[i] = v / self.values[e - 1];
        }
        for i in (0..self.n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let v = y[i] / self.values[e - 1];
            y[i] = v;
            for p in s..e - 1 {
                y[self.col_idx[p] as usize] -= self.values[p] * v;
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Symbolic factorization: row patterns of L (strictly lower part, sorted).
/// A fill entry created through pivot k gets level 1 + max(lev(i,k), lev(k,j));
/// entries keep their minimum level. `level = None` keeps all fill.
fn symbolic(a: &CsrMatrix, level: Option<usize>) -> (Vec<usize>, Vec<u32>) {
    let n = a.n;
    let unlimited = level.is_none();
    let lmax = level.unwrap_or(0);
    // column lists of L built so far: (row, level)
    let mut cols: Vec<Vec<(u32, u16)>> = vec![Vec::new(); n];
    let mut lev = vec![u16::MAX; n];
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx: Vec<u32> = Vec::new();
    let mut heap: BinaryHeap<Reverse<u32>> = BinaryHeap::new();
    let mut row: Vec<u32> = Vec::new();
    for i in 0..n {
        row.clear();
        for &j in a.row(i).0 {
            if (j as usize) < i {
                lev[j as usize] = 0;
                heap.push(Reverse(j));
            }
        }
        while let Some(Reverse(k)) = heap.pop() {
            let k = k as usize;
            row.push(k as u32);
            let lik = lev[k];
            for &(j, ljk) in &cols[k] {
                let j = j as usize;
                if j >= i {
                    break;
                }
                let nl = if unlimited { 0 } else { 1 + lik.max(ljk) as usize };
                if nl > lmax {
                    continue;
                }
                if lev[j] == u16::MAX {
                    lev[j] = nl as u16;
                    heap.push(Reverse(j as u32));
                } else if (nl as u16) < lev[j] {
                    lev[j] = nl as u16;
                }
            }
        }
        for &k in &row {
            cols[k as usize].push((i as u32, lev[k as usize]));
            lev[k as usize] = u16::MAX;
        }
        col_idx.extend_from_slice(&row);
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx)
}

/// Numeric up-looking factorization on a fixed pattern (diagonal appended).
fn numeric(a: &CsrMatrix, shift: f64, row_ptr: &[usize], lower: &[u32]) -> std::result::Result<(Vec<usize>, Vec<u32>, Vec<f64>), usize> {
    let n = a.n;
    // full pattern with diagonal last
    let mut lp = Vec::with_capacity(n + 1);
    lp.push(0);
    let mut li: Vec<u32> = Vec::with_capacity(lower.len() + n);
    for i in 0..n {
        li.extend_from_slice(&lower[row_ptr[i]..row_ptr[i + 1]]);
        li.push(i as u32);
        lp.push(li.len());
    }
    // column access: for each column k, rows j > k with positions
    let mut ccount = vec![0usize; n + 1];
    for i in 0..n {
        for p in lp[i]..lp[i + 1] - 1 {
            ccount[li[p] as usize + 1] += 1;
        }
    }
    for k in 0..n {
        ccount[k + 1] += ccount[k];
    }
    let mut cfill = ccount.clone();
    let mut cpos = vec![0usize; ccount[n]];
    let mut crow = vec![0u32; ccount[n]];
    for i in 0..n {
        for p in lp[i]..lp[i + 1] - 1 {
            let k = li[p] as usize;
            cpos[cfill[k]] = p;
            crow[cfill[k]] = i as u32;
            cfill[k] += 1;
        }
    }
    let mut lv = vec![0.0; li.len()];
    let mut w = vec![0.0; n];
    let mut mark = vec![usize::MAX; n];
    for i in 0..n {
        for p in lp[i]..lp[i + 1] {
            let j = li[p] as usize;
            mark[j] = i;
            w[j] = 0.0;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let j = j as usize;
            if j <= i && mark[j] == i {
                w[j] += v;
            }
        }
        w[i] += shift;
        for p in lp[i]..lp[i + 1] - 1 {
            let k = li[p] as usize;
            let lkk = lv[lp[k + 1] - 1];
            let lik = w[k] / lkk;
            lv[p] = lik;
            for q in ccount[k]..ccount[k + 1] {
                let j = crow[q] as usize;
                if j >= i {
                    break;
                }
                if j > k && mark[j] == i {
                    w[j] -= lik * lv[cpos[q]];
                }
            }
            w[i] -= lik * lik;
        }
        let d = w[i];
        if !(d > 0.0) || !d.is_finite() {
            return Err(i);
        }
        lv[lp[i + 1] - 1] = d.sqrt();
    }
    Ok((lp, li, lv))
}

/// Factor `a` after reordering; retries with a diagonal shift on breakdown.
pub fn factorize(a: &CsrMatrix, method: FactorMethod, ordering: Ordering) -> Result<SubFactor> {
    let perm = reorder(a, ordering);
    factorize_with_perm(a, method, perm)
}

pub fn factorize_with_perm(a: &CsrMatrix, method: FactorMethod, perm: Vec<usize>) -> Result<SubFactor> {
    let t0 = Instant::now();
    let pa = a.permute(&perm);
    let level = match method {
        FactorMethod::Icc(l) => Some(l.min(u16::MAX as usize - 1)),
        FactorMethod::Cholesky => None,
    };
    let (rp, lower) = symbolic(&pa, level);
    let max_diag = pa.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut shift = 0.0;
    for attempt in 0..=MAX_SHIFT_RETRIES {
        match numeric(&pa, shift, &rp, &lower) {
            Ok((row_ptr, col_idx, values)) => {
                return Ok(SubFactor {
                    method,
                    n: a.n,
                    perm,
                    row_ptr,
                    col_idx,
                    values,
                    shift,
                    retries: attempt,
                    factor_seconds: t0.elapsed().as_secs_f64(),
                });
            }
            Err(row) => {
                shift = 1e-8 * max_diag * 10f64.powi(attempt as i32);
                log::debug!("{method} breakdown at row {row}; retrying with shift {shift:e}");
            }
        }
    }
    Err(Error::FactorizationFailed {
        what: format!("{method} on {}x{} matrix", a.n, a.n),
        retries: MAX_SHIFT_RETRIES,
    })
}

pub fn icc_factor(a: &CsrMatrix, level: usize, ordering: Ordering) -> Result<SubFactor> {
    factorize(a, FactorMethod::Icc(level), ordering)
}

pub fn cc_factor(a: &CsrMatrix, ordering: Ordering) -> Result<SubFactor> {
    factorize(a, FactorMethod::Cholesky, ordering)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_factor(f: &SubFactor) -> Vec<Vec<f64>> {
        let mut l = vec![vec![0.0; f.n]; f.n];
        for i in 0..f.n {
            for p in f.row_ptr[i]..f.row_ptr[i + 1] {
                l[i][f.col_idx[p] as usize] = f.values[p];
            }
        }
        l
    }

    fn random_spd(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut rowsum = vec![0.0; n];
        for i in 0..n {
            for j in 0..i {
                if rng.gen::<f64>() < density {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
        }
        for i in 0..n {
            t.push((i, i, rowsum[i] + 0.5));
        }
        CsrMatrix::from_triplets(n, &t)
    }

    fn laplace2d(g: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for j in 0..g {
            for i in 0..g {
                let k = j * g + i;
                t.push((k, k, 4.0));
                if i + 1 < g {
                    t.push((k, k + 1, -1.0));
                    t.push((k + 1, k, -1.0));
                }
                if j + 1 < g {
                    t.push((k, k + g, -1.0));
                    t.push((k + g, k, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(g * g, &t)
    }

    #[test]
    fn parse_methods() {
        assert_eq!("ICC(9)".parse::<FactorMethod>().unwrap(), FactorMethod::Icc(9));
        assert_eq!("icc3".parse::<FactorMethod>().unwrap(), FactorMethod::Icc(3));
        assert_eq!("CC".parse::<FactorMethod>().unwrap(), FactorMethod::Cholesky);
        assert!("lu".parse::<FactorMethod>().is_err());
    }

    #[test]
    fn hand_cholesky_2x2() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 4.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let f = cc_factor(&a, Ordering::Natural).unwrap();
        let l = dense_factor(&f);
        assert!((l[0][0] - 2.0).abs() < 1e-15);
        assert!((l[1][0] - 1.0).abs() < 1e-15);
        assert!((l[1][1] - 2f64.sqrt()).abs() < 1e-15);
        let id = cc_factor(&CsrMatrix::identity(4), Ordering::Rcm).unwrap();
        assert_eq!(dense_factor(&id), CsrMatrix::identity(4).to_dense());
    }

    #[test]
    fn diagonal_icc_is_sqrt() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 4.0), (1, 1, 9.0), (2, 2, 2.0)]);
        for l in [0, 3] {
            let f = icc_factor(&a, l, Ordering::Natural).unwrap();
            assert_eq!(f.values, vec![2.0, 3.0, 2f64.sqrt()]);
        }
    }

    #[test]
    fn cc_solves_random_spd() {
        let a = random_spd(50, 0.15, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for ord in [Ordering::Natural, Ordering::Rcm, Ordering::NestedDissection] {
            let f = cc_factor(&a, ord).unwrap();
            let x = f.solve(&b);
            let r: Vec<f64> = a.mul(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm2(&r) / norm2(&b) < 1e-10);
            // dense oracle
            let m = faer::Mat::<f64>::from_fn(50, 50, |i, j| a.get(i, j));
            let rhs = faer::Mat::<f64>::from_fn(50, 1, |i, _| b[i]);
            use faer::prelude::Solve;
            let xd = m.llt(faer::Side::Lower).unwrap().solve(&rhs);
            for i in 0..50 {
                assert!((x[i] - xd[(i, 0)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_level_icc_matches_cholesky() {
        let a = laplace2d(8);
        let full = icc_factor(&a, a.n, Ordering::Rcm).unwrap();
        let cc = cc_factor(&a, Ordering::Rcm).unwrap();
        assert_eq!(full.row_ptr, cc.row_ptr);
        for (x, y) in full.values.iter().zip(&cc.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn level_zero_keeps_pattern_and_memory_grows() {
        let a = laplace2d(12);
        let f0 = icc_factor(&a, 0, Ordering::Natural).unwrap();
        let lower_nnz = (a.nnz() + a.n) / 2;
        assert_eq!(f0.nnz(), lower_nnz);
        let mut prev = 0;
        for l in 0..10 {
            let m = icc_factor(&a, l, Ordering::Rcm).unwrap().memory_bytes();
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn level_one_fill_pattern() {
        // 5-point Laplacian in natural order: level-1 fill adds the
        // (i, i-g+1) diagonal only
        let g = 6;
        let a = laplace2d(g);
        let f1 = icc_factor(&a, 1, Ordering::Natural).unwrap();
        for i in 0..a.n {
            let cols: Vec<usize> = f1.col_idx[f1.row_ptr[i]..f1.row_ptr[i + 1]].iter().map(|&c| c as usize).collect();
            for &c in &cols {
                let d = i - c;
                assert!(d == 0 || d == 1 || d == g || d == g - 1, "row {i} col {c}");
            }
        }
    }

    #[test]
    fn indefinite_matrix_fails_after_retries() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 1.0)]);
        assert!(matches!(cc_factor(&a, Ordering::Natural), Err(Error::FactorizationFailed { .. })));
    }
}
