//! Two-phase overlapping additive Schwarz preconditioner.
//!
//! Phase one solves the tip subdomains, phase two the regular ones; the
//! contributions are then summed in subdomain order so the result does not
//! depend on the number of worker threads.

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::factor::{factorize, FactorMethod, SubFactor};
use super::ordering::Ordering;
use crate::error::{Error, Result};
use crate::partition::{Subdomain, SubdomainKind};
use crate::sparse::CsrMatrix;

/// Something that approximates K^{-1}.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(k: &CsrMatrix) -> Result<Self> {
        let d = k.diag();
        if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::IndefiniteOperator(d[i]));
        }
        Ok(JacobiPreconditioner { inv_diag: d.iter().map(|v| 1.0 / v).collect() })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsolverSpec {
    pub regular: FactorMethod,
    pub tip: FactorMethod,
    pub ordering: Ordering,
}

impl Default for SubsolverSpec {
    fn default() -> Self {
        SubsolverSpec {
            regular: FactorMethod::Icc(9),
            tip: FactorMethod::Cholesky,
            ordering: Ordering::Rcm,
        }
    }
}

pub struct AsmPreconditioner {
    pub subdomains: Vec<Subdomain>,
    pub factors: Vec<SubFactor>,
    tip_ids: Vec<usize>,
    reg_ids: Vec<usize>,
    n: usize,
    pub setup_seconds: f64,
    tip_nanos: AtomicU64,
    reg_nanos: AtomicU64,
    applications: AtomicU64,
}

impl AsmPreconditioner {
    /// Factor every subdomain matrix K_i = R_i K R_i^T. Runs on the current
    /// rayon pool.
    pub fn build(k: &CsrMatrix, subdomains: Vec<Subdomain>, spec: &SubsolverSpec) -> Result<Self> {
        let t0 = Instant::now();
        for (i, s) in subdomains.iter().enumerate() {
            if s.dofs.is_empty() {
                return Err(Error::InvalidConfiguration(format!("subdomain {i} is empty")));
            }
            if s.dofs.windows(2).any(|w| w[0] >= w[1]) || *s.dofs.last().unwrap() >= k.n {
                return Err(Error::InvalidConfiguration(format!("subdomain {i} has an invalid DOF list")));
            }
        }
        let factors: Vec<Result<SubFactor>> = subdomains
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let method = match s.kind {
                    SubdomainKind::Regular => spec.regular,
                    SubdomainKind::Tip(_) => spec.tip,
                };
                let ki = k.submatrix(&s.dofs);
                factorize(&ki, method, spec.ordering).map_err(|e| match e {
                    Error::FactorizationFailed { what, retries } => Error::FactorizationFailed {
                        what: format!("subdomain {i} ({:?}): {what}", s.kind),
                        retries,
                    },
                    other => other,
                })
            })
            .collect();
        let factors = factors.into_iter().collect::<Result<Vec<_>>>()?;
        let tip_ids = (0..subdomains.len()).filter(|&i| matches!(subdomains[i].kind, SubdomainKind::Tip(_))).collect();
        let reg_ids = (0..subdomains.len()).filter(|&i| subdomains[i].kind == SubdomainKind::Regular).collect();
        Ok(AsmPreconditioner {
            subdomains,
            factors,
            tip_ids,
            reg_ids,
            n: k.n,
            setup_seconds: t0.elapsed().as_secs_f64(),
            tip_nanos: AtomicU64::new(0),
            reg_nanos: AtomicU64::new(0),
            applications: AtomicU64::new(0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn memory_bytes(&self) -> usize {
        self.factors.iter().map(SubFactor::memory_bytes).sum()
    }

    /// Largest factor footprint over the regular and tip subdomains.
    pub fn max_memory_bytes(&self) -> usize {
        self.factors.iter().map(SubFactor::memory_bytes).max().unwrap_or(0)
    }

    pub fn factor_seconds(&self) -> f64 {
        self.factors.iter().map(|f| f.factor_seconds).sum()
    }

    pub fn num_tip_subdomains(&self) -> usize {
        self.tip_ids.len()
    }

    /// Accumulated wall time of the tip and regular phases.
    pub fn phase_seconds(&self) -> (f64, f64) {
        (
            self.tip_nanos.load(AtomicOrdering::Relaxed) as f64 * 1e-9,
            self.reg_nanos.load(AtomicOrdering::Relaxed) as f64 * 1e-9,
        )
    }

    pub fn applications(&self) -> u64 {
        self.applications.load(AtomicOrdering::Relaxed)
    }

    pub fn reset_timers(&self) {
        self.tip_nanos.store(0, AtomicOrdering::Relaxed);
        self.reg_nanos.store(0, AtomicOrdering::Relaxed);
        self.applications.store(0, AtomicOrdering::Relaxed);
    }

    fn solve_phase(&self, ids: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
        ids.par_iter()
            .map(|&i| {
                let mut xi = self.subdomains[i].restrict(x);
                self.factors[i].solve_in_place(&mut xi);
                xi
            })
            .collect()
    }
}

impl Preconditioner for AsmPreconditioner {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t0 = Instant::now();
        let tip = self.solve_phase(&self.tip_ids, x);
        let t1 = Instant::now();
        let reg = self.solve_phase(&self.reg_ids, x);
        let t2 = Instant::now();
        self.tip_nanos.fetch_add((t1 - t0).as_nanos() as u64, AtomicOrdering::Relaxed);
        self.reg_nanos.fetch_add((t2 - t1).as_nanos() as u64, AtomicOrdering::Relaxed);
        self.applications.fetch_add(1, AtomicOrdering::Relaxed);
        y.fill(0.0);
        for (&i, yi) in self.reg_ids.iter().zip(&reg) {
            self.subdomains[i].extend(yi, y);
        }
        for (&i, yi) in self.tip_ids.iter().zip(&tip) {
            self.subdomains[i].extend(yi, y);
        }
    }
}

/// Dense matrix of sum_i R_i^T K_i^{-1} R_i built from dense inverses;
/// for verification on small problems.
pub fn dense_asm_matrix(k: &CsrMatrix, subdomains: &[Subdomain]) -> Result<Vec<Vec<f64>>> {
    use faer::prelude::Solve;
    let n = k.n;
    let mut m = vec![vec![0.0; n]; n];
    let order: Vec<&Subdomain> = subdomains
        .iter()
        .filter(|s| s.kind == SubdomainKind::Regular)
        .chain(subdomains.iter().filter(|s| s.kind != SubdomainKind::Regular))
        .collect();
    for s in order {
        let ni = s.dofs.len();
        let ki = k.submatrix(&s.dofs);
        let a = faer::Mat::<f64>::from_fn(ni, ni, |i, j| ki.get(i, j));
        let inv = a.full_piv_lu().solve(faer::Mat::<f64>::identity(ni, ni));
        for a in 0..ni {
            for b in 0..ni {
                m[s.dofs[a]][s.dofs[b]] += inv[(a, b)];
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{dot, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplace2d(g: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for j in 0..g {
            for i in 0..g {
                let k = j * g + i;
                t.push((k, k, 4.0 + 0.01 * (k % 7) as f64));
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

    fn sub(kind: SubdomainKind, dofs: Vec<usize>) -> Subdomain {
        Subdomain { kind, owner: 0, core: dofs.clone(), dofs }
    }

    fn cc() -> SubsolverSpec {
        SubsolverSpec { regular: FactorMethod::Cholesky, tip: FactorMethod::Cholesky, ordering: Ordering::Rcm }
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_subdomain_is_direct_solve() {
        let k = laplace2d(9);
        let p = AsmPreconditioner::build(&k, vec![sub(SubdomainKind::Regular, (0..k.n).collect())], &cc()).unwrap();
        let b = random(k.n, 1);
        let mut y = vec![0.0; k.n];
        p.apply(&b, &mut y);
        let r: Vec<f64> = k.mul(&y).iter().zip(&b).map(|(a, c)| a - c).collect();
        assert!(norm2(&r) < 1e-12 * norm2(&b));
    }

    #[test]
    fn block_diagonal_is_blockwise_solve() {
        // two decoupled 1D Laplacians
        let mut t = Vec::new();
        for blk in 0..2 {
            for i in 0..10 {
                let k = blk * 10 + i;
                t.push((k, k, 2.5));
                if i + 1 < 10 {
                    t.push((k, k + 1, -1.0));
                    t.push((k + 1, k, -1.0));
                }
            }
        }
        let k = CsrMatrix::from_triplets(20, &t);
        let subs = vec![sub(SubdomainKind::Regular, (0..10).collect()), sub(SubdomainKind::Tip(0), (10..20).collect())];
        let p = AsmPreconditioner::build(&k, subs, &cc()).unwrap();
        let b = random(20, 2);
        let mut y = vec![0.0; 20];
        p.apply(&b, &mut y);
        let r: Vec<f64> = k.mul(&y).iter().zip(&b).map(|(a, c)| a - c).collect();
        assert!(norm2(&r) < 1e-12);
        assert_eq!(p.num_tip_subdomains(), 1);
    }

    fn overlapping(k: &CsrMatrix, g: usize) -> Vec<Subdomain> {
        let mut subs = Vec::new();
        for (bx, by) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut d = Vec::new();
            for j in 0..g {
                for i in 0..g {
                    let inx = if bx == 0 { i <= g / 2 + 1 } else { i + 1 >= g / 2 };
                    let iny = if by == 0 { j <= g / 2 + 1 } else { j + 1 >= g / 2 };
                    if inx && iny {
                        d.push(j * g + i);
                    }
                }
            }
            subs.push(sub(SubdomainKind::Regular, d));
        }
        subs.push(sub(SubdomainKind::Tip(0), (0..k.n).filter(|&v| (v % g).abs_diff(g / 2) <= 1 && (v / g).abs_diff(g / 2) <= 2).collect()));
        subs
    }

    #[test]
    fn matches_dense_oracle_and_is_symmetric() {
        let g = 11;
        let k = laplace2d(g);
        let subs = overlapping(&k, g);
        let m = dense_asm_matrix(&k, &subs).unwrap();
        let p = AsmPreconditioner::build(&k, subs, &cc()).unwrap();
        let x = random(k.n, 3);
        let z = random(k.n, 4);
        let mut y = vec![0.0; k.n];
        p.apply(&x, &mut y);
        for i in 0..k.n {
            let yd: f64 = (0..k.n).map(|j| m[i][j] * x[j]).sum();
            assert!((y[i] - yd).abs() < 1e-10, "{i}: {} vs {yd}", y[i]);
        }
        let mut w = vec![0.0; k.n];
        p.apply(&z, &mut w);
        let (a, b) = (dot(&y, &z), dot(&x, &w));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn deterministic_across_pool_sizes() {
        let g = 15;
        let k = laplace2d(g);
        let x = random(k.n, 5);
        let spec = SubsolverSpec { regular: FactorMethod::Icc(1), ..SubsolverSpec::default() };
        let mut outs = Vec::new();
        for w in [1, 2, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            let y = pool.install(|| {
                let p = AsmPreconditioner::build(&k, overlapping(&k, g), &spec).unwrap();
                let mut y = vec![0.0; k.n];
                p.apply(&x, &mut y);
                y
            });
            outs.push(y);
        }
        for o in &outs[1..] {
            assert!(o.iter().zip(&outs[0]).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn rejects_bad_subdomains() {
        let k = laplace2d(3);
        assert!(AsmPreconditioner::build(&k, vec![sub(SubdomainKind::Regular, vec![])], &cc()).is_err());
        assert!(AsmPreconditioner::build(&k, vec![sub(SubdomainKind::Regular, vec![2, 1])], &cc()).is_err());
        assert!(AsmPreconditioner::build(&k, vec![sub(SubdomainKind::Regular, vec![0, 99])], &cc()).is_err());
    }
}
