//! Preconditioned conjugate gradients.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::asm::Preconditioner;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PcgOptions {
    pub rtol: f64,
    pub maxiter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions { rtol: 1e-6, maxiter: 20000 }
    }
}

/// One line of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// ||r_k|| / ||r_0||
    pub residual: f64,
    /// sqrt(r_k^T M^{-1} r_k) / sqrt(r_0^T M^{-1} r_0)
    pub precond_residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub final_residual: f64,
    /// Wall time of the iteration loop.
    pub t_sol: f64,
    /// t_sol / iterations.
    pub t_piter: f64,
    /// Time spent applying the preconditioner.
    pub t_precond: f64,
    /// Alpha and beta coefficients, usable for Lanczos eigenvalue estimates.
    #[serde(skip)]
    pub alphas: Vec<f64>,
    #[serde(skip)]
    pub betas: Vec<f64>,
}

/// y = K x, rows split across the current rayon pool.
pub fn par_matvec(k: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(1024).enumerate().for_each(|(c, out)| {
        let base = c * 1024;
        for (o, yi) in out.iter_mut().enumerate() {
            let i = base + o;
            let mut s = 0.0;
            for p in k.row_ptr[i]..k.row_ptr[i + 1] {
                s += k.values[p] * x[k.col_idx[p] as usize];
            }
            *yi = s;
        }
    });
}

/// Fixed-order dot product (chunked partial sums combined in order).
fn pdot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a.par_chunks(4096).zip(b.par_chunks(4096)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    parts.iter().sum()
}

/// Solve K x = b starting from `x0`. Runs on the current rayon pool.
pub fn pcg_solve(k: &CsrMatrix, b: &[f64], x0: &[f64], m: &dyn Preconditioner, opts: &PcgOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = k.n;
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!("K is {n}x{n}, b has {}, x0 has {}", b.len(), x0.len())));
    }
    if !(opts.rtol > 0.0) {
        return Err(Error::InvalidConfiguration(format!("rtol must be positive, got {}", opts.rtol)));
    }
    let t0 = Instant::now();
    let mut t_precond = 0.0;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    par_matvec(k, &x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    let tp = Instant::now();
    m.apply(&r, &mut z);
    t_precond += tp.elapsed().as_secs_f64();
    let mut rz = pdot(&r, &z);
    let r0 = pdot(&r, &r).sqrt();
    let rz0 = rz.max(0.0).sqrt();
    let mut history = vec![IterationRecord { iteration: 0, residual: 1.0, precond_residual: 1.0, seconds: 0.0 }];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let report = |iterations, converged, history: Vec<IterationRecord>, alphas, betas, t_precond| {
        let t_sol = t0.elapsed().as_secs_f64();
        SolveReport {
            iterations,
            converged,
            final_residual: history.last().map(|h: &IterationRecord| h.residual).unwrap_or(0.0),
            history,
            t_sol,
            t_piter: if iterations > 0 { t_sol / iterations as f64 } else { 0.0 },
            t_precond,
            alphas,
            betas,
        }
    };
    if r0 == 0.0 {
        return Ok((x, report(0, true, history, alphas, betas, t_precond)));
    }
    if !(rz > 0.0) {
        return Err(Error::IndefinitePreconditioner(rz));
    }
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    for it in 1..=opts.maxiter {
        par_matvec(k, &p, &mut q);
        let pq = pdot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::IndefiniteOperator(pq));
        }
        let alpha = rz / pq;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(q.par_iter()).for_each(|(r, q)| *r -= alpha * q);
        let tp = Instant::now();
        m.apply(&r, &mut z);
        t_precond += tp.elapsed().as_secs_f64();
        let rz_new = pdot(&r, &z);
        let rn = pdot(&r, &r).sqrt();
        alphas.push(alpha);
        history.push(IterationRecord {
            iteration: it,
            residual: rn / r0,
            precond_residual: rz_new.max(0.0).sqrt() / rz0,
            seconds: t0.elapsed().as_secs_f64(),
        });
        if !rn.is_finite() {
            return Err(Error::IndefiniteOperator(rn));
        }
        if rn / r0 <= opts.rtol {
            return Ok((x, report(it, true, history, alphas, betas, t_precond)));
        }
        if !(rz_new > 0.0) {
            return Err(Error::IndefinitePreconditioner(rz_new));
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + beta * *p);
    }
    log::info!("PCG reached maxiter={} at relative residual {:e}", opts.maxiter, history.last().unwrap().residual);
    Ok((x, report(opts.maxiter, false, history, alphas, betas, t_precond)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::asm::{IdentityPreconditioner, JacobiPreconditioner};
    use crate::sparse::norm2;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + i as f64 * 1e-3));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn identity_converges_in_one() {
        let k = CsrMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let (x, rep) = pcg_solve(&k, &b, &[0.0; 7], &IdentityPreconditioner, &PcgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn solves_and_energy_error_decreases() {
        let n = 60;
        let k = tridiag(n);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = k.mul(&xs);
        let opts = PcgOptions { rtol: 1e-10, maxiter: 500 };
        let (x, rep) = pcg_solve(&k, &b, &vec![0.0; n], &JacobiPreconditioner::new(&k).unwrap(), &opts).unwrap();
        assert!(rep.converged);
        let e: Vec<f64> = x.iter().zip(&xs).map(|(a, b)| a - b).collect();
        assert!(norm2(&e) < 1e-8);
        assert_eq!(rep.history.len(), rep.iterations + 1);
        // error in the energy norm is monotone for CG
        let mut prev = f64::INFINITY;
        let (x2, _) = pcg_solve(&k, &b, &vec![0.0; n], &IdentityPreconditioner, &PcgOptions { rtol: 1e-14, maxiter: 5 }).unwrap();
        for m in 1..=5 {
            let (xm, _) = pcg_solve(&k, &b, &vec![0.0; n], &IdentityPreconditioner, &PcgOptions { rtol: 1e-14, maxiter: m }).unwrap();
            let em: Vec<f64> = xm.iter().zip(&xs).map(|(a, b)| a - b).collect();
            let en = crate::sparse::dot(&em, &k.mul(&em));
            assert!(en <= prev * (1.0 + 1e-12));
            prev = en;
        }
        assert_eq!(x2.len(), n);
    }

    #[test]
    fn maxiter_reports_not_converged() {
        let k = tridiag(100);
        let b = vec![1.0; 100];
        let (_, rep) = pcg_solve(&k, &b, &vec![0.0; 100], &IdentityPreconditioner, &PcgOptions { rtol: 1e-12, maxiter: 3 }).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn indefinite_aborts() {
        let k = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let r = pcg_solve(&k, &[0.0, 1.0], &[0.0, 0.0], &IdentityPreconditioner, &PcgOptions::default());
        assert!(matches!(r, Err(Error::IndefiniteOperator(_))));
        assert!(pcg_solve(&k, &[1.0], &[0.0, 0.0], &IdentityPreconditioner, &PcgOptions::default()).is_err());
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let k = tridiag(5);
        let (x, rep) = pcg_solve(&k, &[0.0; 5], &[0.0; 5], &IdentityPreconditioner, &PcgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged && x.iter().all(|&v| v == 0.0));
    }
}
