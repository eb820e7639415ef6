//! Overlapping subdomain decompositions (strategies S0, S1, S2) with
//! restriction and extension maps.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::geometry::{EnrichmentMap, Mesh};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Contiguous DOF index ranges, overlap by matrix-graph distance.
    S0,
    /// Geometric blocks carrying every DOF type.
    S1,
    /// Geometric blocks without the tip regions plus one subdomain per tip.
    S2,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S0" => Ok(Strategy::S0),
            "S1" => Ok(Strategy::S1),
            "S2" => Ok(Strategy::S2),
            _ => Err(Error::Unsupported(format!("strategy {s}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubdomainKind {
    Regular,
    Tip(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub kind: SubdomainKind,
    pub owner: usize,
    /// Sorted core DOFs (disjoint among subdomains of the same kind).
    pub core: Vec<usize>,
    /// Sorted restriction list: core plus overlap.
    pub dofs: Vec<usize>,
}

impl Subdomain {
    pub fn overlap_len(&self) -> usize {
        self.dofs.len() - self.core.len()
    }

    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&g| x[g]).collect()
    }

    pub fn extend(&self, y: &[f64], out: &mut [f64]) {
        for (&g, &v) in self.dofs.iter().zip(y) {
            out[g] += v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionPlan {
    pub strategy: Strategy,
    pub workers: usize,
    pub delta_reg: usize,
    pub delta_tip: usize,
}

/// Most square factorization px * py = np with px >= py.
pub fn grid_factor(np: usize) -> (usize, usize) {
    let mut best = (np, 1);
    for py in 1..=np {
        if py * py > np {
            break;
        }
        if np % py == 0 {
            best = (np / py, py);
        }
    }
    best
}

fn split_range(len: usize, parts: usize, k: usize) -> (usize, usize) {
    let base = len / parts;
    let rem = len % parts;
    let start = k * base + k.min(rem);
    (start, start + base + usize::from(k < rem))
}

/// Element blocks of a near-square grid, listed block-row-major.
pub fn partition_regular(mesh: &Mesh, np: usize) -> Result<Vec<Vec<usize>>> {
    let (px, py) = block_grid(mesh, np)?;
    let mut out = Vec::with_capacity(np);
    for by in 0..py {
        let (j0, j1) = split_range(mesh.ney(), py, by);
        for bx in 0..px {
            let (i0, i1) = split_range(mesh.nex(), px, bx);
            let mut v = Vec::with_capacity((i1 - i0) * (j1 - j0));
            for j in j0..j1 {
                for i in i0..i1 {
                    v.push(mesh.element_id(i, j));
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn block_grid(mesh: &Mesh, np: usize) -> Result<(usize, usize)> {
    if np == 0 || np > mesh.num_elements() {
        return Err(Error::InvalidConfiguration(format!(
            "cannot split {} elements among {np} workers",
            mesh.num_elements()
        )));
    }
    let (a, b) = grid_factor(np);
    // longer mesh axis gets more blocks
    let (px, py) = if mesh.nex() >= mesh.ney() { (a, b) } else { (b, a) };
    if px > mesh.nex() || py > mesh.ney() {
        return Err(Error::InvalidConfiguration(format!(
            "{px}x{py} block grid does not fit {}x{} elements",
            mesh.nex(),
            mesh.ney()
        )));
    }
    Ok((px, py))
}

/// Owner block of every node (disjoint node ownership).
pub fn node_owner(mesh: &Mesh, np: usize) -> Result<Vec<usize>> {
    let (px, py) = block_grid(mesh, np)?;
    let xb: Vec<usize> = (0..mesh.nex())
        .map(|i| (0..px).find(|&b| { let (s, e) = split_range(mesh.nex(), px, b); (s..e).contains(&i) }).unwrap())
        .collect();
    let yb: Vec<usize> = (0..mesh.ney())
        .map(|j| (0..py).find(|&b| { let (s, e) = split_range(mesh.ney(), py, b); (s..e).contains(&j) }).unwrap())
        .collect();
    Ok((0..mesh.num_nodes())
        .map(|n| {
            let (i, j) = mesh.node_ij(n);
            yb[j.min(mesh.ney() - 1)] * px + xb[i.min(mesh.nex() - 1)]
        })
        .collect())
}

/// Chebyshev dilation of a node mask by `d` grid steps.
pub fn dilate(mesh: &Mesh, mask: &[bool], d: usize) -> Vec<bool> {
    if d == 0 {
        return mask.to_vec();
    }
    let (nx, ny) = (mesh.nx, mesh.ny);
    let mut tmp = vec![false; mask.len()];
    for j in 0..ny {
        let row = &mask[j * nx..(j + 1) * nx];
        let mut last: Option<usize> = None;
        let mut dist_right = vec![usize::MAX; nx];
        for i in (0..nx).rev() {
            if row[i] {
                last = Some(i);
            }
            if let Some(l) = last {
                dist_right[i] = l - i;
            }
        }
        last = None;
        for i in 0..nx {
            if row[i] {
                last = Some(i);
            }
            let dl = last.map_or(usize::MAX, |l| i - l);
            tmp[j * nx + i] = dl <= d || dist_right[i] <= d;
        }
    }
    let mut out = vec![false; mask.len()];
    for i in 0..nx {
        let mut last: Option<usize> = None;
        let mut dist_up = vec![usize::MAX; ny];
        for j in (0..ny).rev() {
            if tmp[j * nx + i] {
                last = Some(j);
            }
            if let Some(l) = last {
                dist_up[j] = l - j;
            }
        }
        last = None;
        for j in 0..ny {
            if tmp[j * nx + i] {
                last = Some(j);
            }
            let dl = last.map_or(usize::MAX, |l| j - l);
            out[j * nx + i] = dl <= d || dist_up[j] <= d;
        }
    }
    out
}

/// DOFs of every node in CSR form.
fn node_dofs(dofmap: &DofMap) -> (Vec<usize>, Vec<usize>) {
    let mut count = vec![0usize; dofmap.num_nodes + 1];
    for d in 0..dofmap.n {
        count[dofmap.node_of(d) + 1] += 1;
    }
    for i in 0..dofmap.num_nodes {
        count[i + 1] += count[i];
    }
    let mut fill = count.clone();
    let mut list = vec![0; dofmap.n];
    for d in 0..dofmap.n {
        let nd = dofmap.node_of(d);
        list[fill[nd]] = d;
        fill[nd] += 1;
    }
    (count, list)
}

fn collect_dofs(mask: &[bool], ptr: &[usize], list: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .flat_map(|(n, _)| list[ptr[n]..ptr[n + 1]].iter().copied())
        .collect();
    v.sort_unstable();
    v
}

/// Nodes belonging to the region of tip `t`: all nodes of elements with at
/// least one tip-enriched node.
pub fn tip_region_nodes(mesh: &Mesh, map: &EnrichmentMap, t: usize) -> Vec<bool> {
    let mut mask = vec![false; mesh.num_nodes()];
    for e in map.tip_region_elements(mesh, t) {
        for n in mesh.element_nodes(e) {
            mask[n] = true;
        }
    }
    mask
}

/// BFS growth of a DOF set by `levels` steps on the graph of `k`.
pub fn graph_overlap(k: &CsrMatrix, seed: &[usize], levels: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; k.n];
    let mut q = VecDeque::new();
    for &s in seed {
        dist[s] = 0;
        q.push_back(s);
    }
    while let Some(i) = q.pop_front() {
        if dist[i] == levels {
            continue;
        }
        for &j in k.row(i).0 {
            let j = j as usize;
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                q.push_back(j);
            }
        }
    }
    (0..k.n).filter(|&i| dist[i] != usize::MAX).collect()
}

pub fn build_strategy(mesh: &Mesh, map: &EnrichmentMap, dofmap: &DofMap, k: &CsrMatrix, plan: &PartitionPlan) -> Result<Vec<Subdomain>> {
    let np = plan.workers;
    if np == 0 {
        return Err(Error::InvalidConfiguration("need at least one worker".into()));
    }
    match plan.strategy {
        Strategy::S0 => {
            if np > dofmap.n {
                return Err(Error::InvalidConfiguration("more workers than DOFs".into()));
            }
            Ok((0..np)
                .map(|w| {
                    let (s, e) = split_range(dofmap.n, np, w);
                    let core: Vec<usize> = (s..e).collect();
                    let dofs = graph_overlap(k, &core, plan.delta_reg);
                    Subdomain { kind: SubdomainKind::Regular, owner: w, core, dofs }
                })
                .collect())
        }
        Strategy::S1 | Strategy::S2 => {
            let owner = node_owner(mesh, np)?;
            let (ptr, list) = node_dofs(dofmap);
            let nn = mesh.num_nodes();
            let mut tip_mask = vec![false; nn];
            let mut regions = Vec::new();
            if plan.strategy == Strategy::S2 {
                for t in 0..map.tip_nodes.len() {
                    let r = tip_region_nodes(mesh, map, t);
                    for (a, &b) in tip_mask.iter_mut().zip(&r) {
                        *a |= b;
                    }
                    regions.push(r);
                }
                let covered = tip_mask.iter().filter(|&&m| m).count();
                if 2 * covered > nn {
                    log::warn!("tip regions cover more than half of the domain");
                }
            }
            let mut subs = Vec::with_capacity(np + regions.len());
            for w in 0..np {
                let own: Vec<bool> = (0..nn).map(|n| owner[n] == w && !tip_mask[n]).collect();
                let mut grown = dilate(mesh, &(0..nn).map(|n| owner[n] == w).collect::<Vec<_>>(), plan.delta_reg);
                for (g, &t) in grown.iter_mut().zip(&tip_mask) {
                    *g &= !t;
                }
                let core = collect_dofs(&own, &ptr, &list);
                if core.is_empty() {
                    // block swallowed by tip regions
                    log::info!("regular block {w} lies inside tip regions; dropped");
                    continue;
                }
                subs.push(Subdomain {
                    kind: SubdomainKind::Regular,
                    owner: w,
                    core,
                    dofs: collect_dofs(&grown, &ptr, &list),
                });
            }
            let mut claimed = vec![false; nn];
            for (t, r) in regions.iter().enumerate() {
                let mut votes = vec![0usize; np];
                for n in 0..nn {
                    if r[n] {
                        votes[owner[n]] += 1;
                    }
                }
                let best = votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(w, _)| w).unwrap();
                let core_mask: Vec<bool> = (0..nn).map(|n| r[n] && !claimed[n]).collect();
                for n in 0..nn {
                    claimed[n] |= r[n];
                }
                subs.push(Subdomain {
                    kind: SubdomainKind::Tip(t),
                    owner: best,
                    core: collect_dofs(&core_mask, &ptr, &list),
                    dofs: collect_dofs(&dilate(mesh, r, plan.delta_tip), &ptr, &list),
                });
            }
            Ok(subs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Crack, CrackSet, EnrichmentMode, Point};

    #[test]
    fn factorizations() {
        assert_eq!(grid_factor(25), (5, 5));
        assert_eq!(grid_factor(16), (4, 4));
        assert_eq!(grid_factor(8), (4, 2));
        assert_eq!(grid_factor(7), (7, 1));
        assert_eq!(grid_factor(1), (1, 1));
    }

    #[test]
    fn regular_blocks() {
        let m = Mesh::new(26, 26, Point::default(), 2.0, 2.0).unwrap();
        let b = partition_regular(&m, 25).unwrap();
        assert_eq!(b.len(), 25);
        assert!(b.iter().all(|v| v.len() == 25));
        let m = Mesh::new(11, 11, Point::default(), 1.0, 1.0).unwrap();
        let b = partition_regular(&m, 4).unwrap();
        assert!(b.iter().all(|v| v.len() == 25));
        let one = partition_regular(&m, 1).unwrap();
        assert_eq!(one[0].len(), m.num_elements());
        assert!(partition_regular(&m, 101).is_err());
    }

    #[test]
    fn dilation_matches_bruteforce() {
        let m = Mesh::new(9, 7, Point::default(), 1.0, 1.0).unwrap();
        let mut mask = vec![false; m.num_nodes()];
        mask[m.node_id(2, 3)] = true;
        mask[m.node_id(8, 0)] = true;
        for d in 0..4 {
            let out = dilate(&m, &mask, d);
            for n in 0..m.num_nodes() {
                let (i, j) = m.node_ij(n);
                let oracle = (0..m.num_nodes()).any(|s| {
                    let (a, b) = m.node_ij(s);
                    mask[s] && a.abs_diff(i) <= d && b.abs_diff(j) <= d
                });
                assert_eq!(out[n], oracle);
            }
        }
    }

    fn setup() -> (Mesh, EnrichmentMap, DofMap, CsrMatrix) {
        let m = Mesh::new(21, 21, Point::default(), 1.0, 1.0).unwrap();
        let cs = CrackSet::new(vec![Crack::interior(vec![Point::new(0.313, 0.427), Point::new(0.661, 0.571)])]).unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.1 }).unwrap();
        let dm = DofMap::build(&map, m.num_nodes(), 4, &[]).unwrap();
        // adjacency: DOFs sharing an element
        let mut trip = Vec::new();
        for e in 0..m.num_elements() {
            let ed = crate::assembly::element_dofs(&m, &cs, &map, &dm, e);
            for &(_, a) in &ed.active {
                for &(_, b) in &ed.active {
                    for (x, y) in [(a, b), (a, b + 1), (a + 1, b), (a + 1, b + 1)] {
                        trip.push((x, y, 1.0));
                    }
                }
            }
        }
        let k = CsrMatrix::from_triplets(dm.n, &trip);
        (m, map, dm, k)
    }

    #[test]
    fn coverage_and_separation() {
        let (m, map, dm, k) = setup();
        for strategy in [Strategy::S0, Strategy::S1, Strategy::S2] {
            let plan = PartitionPlan { strategy, workers: 4, delta_reg: 1, delta_tip: 2 };
            let subs = build_strategy(&m, &map, &dm, &k, &plan).unwrap();
            let mut seen = vec![0; dm.n];
            for s in &subs {
                assert!(s.dofs.windows(2).all(|w| w[0] < w[1]));
                assert!(s.core.iter().all(|c| s.dofs.binary_search(c).is_ok()));
                for &c in &s.core {
                    seen[c] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c >= 1), "{strategy:?} leaves orphans");
            let regs: Vec<_> = subs.iter().filter(|s| s.kind == SubdomainKind::Regular).collect();
            let mut cnt = vec![0; dm.n];
            for s in &regs {
                for &c in &s.core {
                    cnt[c] += 1;
                }
            }
            assert!(cnt.iter().all(|&c| c <= 1));
            if strategy == Strategy::S2 {
                assert_eq!(subs.len(), 4 + 2);
                for s in &regs {
                    assert!(s.dofs.iter().all(|&d| !dm.is_branch(d)));
                }
                let tips: Vec<_> = subs.iter().filter(|s| s.kind != SubdomainKind::Regular).collect();
                for t in &tips {
                    for r in &regs {
                        assert!(t.core.iter().all(|c| r.dofs.binary_search(c).is_err()));
                    }
                }
            }
        }
    }

    #[test]
    fn restrict_extend_multiplicity() {
        let (m, map, dm, k) = setup();
        let plan = PartitionPlan { strategy: Strategy::S1, workers: 4, delta_reg: 2, delta_tip: 2 };
        let subs = build_strategy(&m, &map, &dm, &k, &plan).unwrap();
        let x: Vec<f64> = (0..dm.n).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; dm.n];
        let mut mult = vec![0.0; dm.n];
        for s in &subs {
            s.extend(&s.restrict(&x), &mut y);
            for &d in &s.dofs {
                mult[d] += 1.0;
            }
        }
        for i in 0..dm.n {
            assert_eq!(y[i], mult[i] * x[i]);
        }
        let plan0 = PartitionPlan { delta_reg: 0, ..plan };
        let subs = build_strategy(&m, &map, &dm, &k, &plan0).unwrap();
        let mut y = vec![0.0; dm.n];
        for s in &subs {
            assert_eq!(s.overlap_len(), 0);
            s.extend(&s.restrict(&x), &mut y);
        }
        assert_eq!(y, x);
    }
}
