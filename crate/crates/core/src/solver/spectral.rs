//! Singular value, eigenvalue and condition number estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::factor::cc_factor;
use super::ordering::Ordering;
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

pub const DENSE_THRESHOLD: usize = 5000;
pub const LANCZOS_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondMode {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondEstimate {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub cond: f64,
    /// Residual bounds on the two extremal values (zero for dense mode).
    pub err_max: f64,
    pub err_min: f64,
}

impl CondEstimate {
    fn new(sigma_max: f64, sigma_min: f64, err_max: f64, err_min: f64) -> Self {
        CondEstimate { sigma_max, sigma_min, cond: sigma_max / sigma_min, err_max, err_min }
    }
}

/// Assemble a dense matrix from a linear operator, column by column.
pub fn dense_from_operator<F>(op: F, n: usize) -> faer::Mat<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut m = faer::Mat::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Extremal singular values of a general operator (dense) or extremal
/// eigenvalue magnitudes of a symmetric operator (Lanczos).
pub fn estimate_cond<F>(op: F, n: usize, mode: CondMode) -> Result<CondEstimate>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::DimensionMismatch("empty operator".into()));
    }
    match mode {
        CondMode::Dense => {
            if n > DENSE_THRESHOLD {
                return Err(Error::Unsupported(format!("dense SVD of order {n} exceeds {DENSE_THRESHOLD}")));
            }
            let m = dense_from_operator(op, n);
            let s = m.singular_values().map_err(|e| Error::Unsupported(format!("SVD failed: {e:?}")))?;
            let max = s.iter().cloned().fold(0.0, f64::max);
            let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(CondEstimate::new(max, min, 0.0, 0.0))
        }
        CondMode::Lanczos => {
            let r = lanczos(&op, n, LANCZOS_STEPS, 0x5eed);
            let (lo, hi) = (r.min.0.abs(), r.max.0.abs());
            Ok(CondEstimate::new(hi.max(lo), hi.min(lo), r.max.1, r.min.1))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosResult {
    /// (Ritz value, residual bound)
    pub min: (f64, f64),
    pub max: (f64, f64),
    pub steps: usize,
}

/// Symmetric Lanczos with full reorthogonalization.
pub fn lanczos<F>(op: &F, n: usize, steps: usize, seed: u64) -> LanczosResult
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for j in 0..m {
        op(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm2(&w);
        beta.push(b);
        if j + 1 == m || b <= 1e-14 * a.abs().max(1e-300) {
            break;
        }
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let k = alpha.len();
    let t = faer::Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t.self_adjoint_eigen(faer::Side::Lower).expect("tridiagonal eigensolve");
    let s = eig.S().column_vector();
    let u = eig.U();
    let last = beta[k - 1];
    LanczosResult {
        min: (s[0], (last * u[(k - 1, 0)]).abs()),
        max: (s[k - 1], (last * u[(k - 1, k - 1)]).abs()),
        steps: k,
    }
}

/// Condition number of an SPD sparse matrix: dense eigenvalues when small,
/// otherwise Lanczos for the largest eigenvalue and Lanczos on the
/// Cholesky-applied inverse for the smallest.
pub fn spd_condition(k: &CsrMatrix) -> Result<CondEstimate> {
    if k.n <= DENSE_THRESHOLD {
        let e = eig_spectrum(k)?;
        let (lo, hi) = (e[0], e[e.len() - 1]);
        if !(lo > 0.0) {
            return Err(Error::IndefiniteOperator(lo));
        }
        return Ok(CondEstimate::new(hi, lo, 0.0, 0.0));
    }
    let hi = lanczos(&|x: &[f64], y: &mut [f64]| k.matvec(x, y), k.n, LANCZOS_STEPS, 1);
    let f = cc_factor(k, Ordering::NestedDissection)?;
    if f.shift != 0.0 {
        log::warn!("Cholesky needed a shift of {:e}; smallest eigenvalue is approximate", f.shift);
    }
    let inv = lanczos(
        &|x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(x);
            f.solve_in_place(y);
        },
        k.n,
        LANCZOS_STEPS,
        2,
    );
    let mu = inv.max.0;
    let lo = 1.0 / mu;
    Ok(CondEstimate::new(hi.max.0, lo, hi.max.1, inv.max.1 / (mu * mu)))
}

/// Condition number of the preconditioned operator M^-1 K for SPD K and
/// M^-1, measured on the similar symmetric form L^T K L with M^-1 = L L^T
/// (dense; both operators are sampled column by column).
pub fn preconditioned_condition_dense<F, G>(k_op: F, minv_op: G, n: usize) -> Result<CondEstimate>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    if n == 0 || n > DENSE_THRESHOLD {
        return Err(Error::Unsupported(format!("dense preconditioned condition of order {n}")));
    }
    let k = dense_from_operator(k_op, n);
    let mi = dense_from_operator(minv_op, n);
    let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (mi[(i, j)] + mi[(j, i)]));
    let l = sym
        .llt(faer::Side::Lower)
        .map_err(|_| Error::IndefinitePreconditioner(f64::NAN))?
        .L()
        .to_owned();
    let s = l.transpose() * &k * &l;
    let s = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let sv = s.singular_values().map_err(|e| Error::Unsupported(format!("SVD failed: {e:?}")))?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CondEstimate::new(max, min, 0.0, 0.0))
}

/// All eigenvalues of a symmetric sparse matrix, ascending.
pub fn eig_spectrum(k: &CsrMatrix) -> Result<Vec<f64>> {
    if k.n > DENSE_THRESHOLD {
        return Err(Error::Unsupported(format!("dense eigensolve of order {} exceeds {DENSE_THRESHOLD}", k.n)));
    }
    let m = faer::Mat::<f64>::from_fn(k.n, k.n, |i, j| k.get(i, j));
    let mut e = m
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Unsupported(format!("eigensolve failed: {e:?}")))?;
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Extreme Ritz values of the preconditioned operator from the CG
/// coefficients of a PCG run.
pub fn cg_ritz_values(alphas: &[f64], betas: &[f64]) -> Option<(f64, f64)> {
    let k = alphas.len();
    if k == 0 {
        return None;
    }
    let t = faer::Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            let mut d = 1.0 / alphas[i];
            if i > 0 {
                d += betas[i - 1] / alphas[i - 1];
            }
            d
        } else if i == j + 1 || j == i + 1 {
            let m = i.min(j);
            betas[m].sqrt() / alphas[m]
        } else {
            0.0
        }
    });
    let e = t.self_adjoint_eigenvalues(faer::Side::Lower).ok()?;
    Some((e[0], e[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> CsrMatrix {
        CsrMatrix::from_triplets(v.len(), &v.iter().enumerate().map(|(i, &x)| (i, i, x)).collect::<Vec<_>>())
    }

    #[test]
    fn identity_and_diagonal() {
        let id = CsrMatrix::identity(6);
        let c = estimate_cond(|x: &[f64], y: &mut [f64]| id.matvec(x, y), 6, CondMode::Dense).unwrap();
        assert!((c.sigma_max - 1.0).abs() < 1e-14 && (c.sigma_min - 1.0).abs() < 1e-14 && (c.cond - 1.0).abs() < 1e-13);
        let d = diag(&(1..=10).map(|i| i as f64).collect::<Vec<_>>());
        for mode in [CondMode::Dense, CondMode::Lanczos] {
            let c = estimate_cond(|x: &[f64], y: &mut [f64]| d.matvec(x, y), 10, mode).unwrap();
            assert!((c.sigma_max - 10.0).abs() < 1e-10, "{mode:?} {c:?}");
            assert!((c.sigma_min - 1.0).abs() < 1e-10);
            assert!((c.cond - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_invert_path_matches_dense() {
        // 1D Laplacian, large enough to take the sparse route
        let n = DENSE_THRESHOLD + 1;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, &t);
        let c = spd_condition(&k).unwrap();
        let h = std::f64::consts::PI / (n + 1) as f64;
        let lo = 2.0 - 2.0 * h.cos();
        let hi = 2.0 + 2.0 * h.cos();
        assert!((c.sigma_min - lo).abs() / lo < 1e-6, "{} vs {lo}", c.sigma_min);
        assert!((c.sigma_max - hi).abs() / hi < 1e-3);
    }

    #[test]
    fn cg_ritz_values_bracket_spectrum() {
        use crate::solver::asm::IdentityPreconditioner;
        use crate::solver::pcg::{pcg_solve, PcgOptions};
        let d = diag(&(1..=30).map(|i| i as f64).collect::<Vec<_>>());
        let b = vec![1.0; 30];
        let (_, rep) = pcg_solve(&d, &b, &[0.0; 30], &IdentityPreconditioner, &PcgOptions { rtol: 1e-12, maxiter: 100 }).unwrap();
        let (lo, hi) = cg_ritz_values(&rep.alphas, &rep.betas).unwrap();
        assert!((lo - 1.0).abs() < 1e-6 && (hi - 30.0).abs() < 1e-6, "{lo} {hi}");
    }

    #[test]
    fn preconditioned_form_matches_eigenvalue_ratio() {
        // K = diag(1..6), M^-1 = diag(1/k) up to a factor on the last entry
        let d = diag(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = preconditioned_condition_dense(
            |x: &[f64], y: &mut [f64]| d.matvec(x, y),
            |x: &[f64], y: &mut [f64]| {
                for i in 0..6 {
                    y[i] = x[i] / (i as f64 + 1.0) * if i == 5 { 4.0 } else { 1.0 };
                }
            },
            6,
        )
        .unwrap();
        assert!((c.cond - 4.0).abs() < 1e-10, "{c:?}");
        // exact inverse gives 1
        let c = preconditioned_condition_dense(
            |x: &[f64], y: &mut [f64]| d.matvec(x, y),
            |x: &[f64], y: &mut [f64]| {
                for i in 0..6 {
                    y[i] = x[i] / (i as f64 + 1.0);
                }
            },
            6,
        )
        .unwrap();
        assert!((c.cond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_matches_sorted_diagonal() {
        let d = diag(&[3.0, 1.0, 2.0]);
        let e = eig_spectrum(&d).unwrap();
        for (a, b) in e.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
