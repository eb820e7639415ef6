//! DOF numbering, global stiffness/load assembly and Dirichlet elimination.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enrichment::{BasisEval, ElementBasis, FunctionKey};
use crate::error::{Error, Result};
use crate::geometry::{clip_segment, CrackSet, EnrichmentMap, Mesh, Point};
use crate::quadrature::{element_quadrature, gauss_legendre, QuadratureOrders};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Stress,
    Strain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub e: f64,
    pub nu: f64,
    pub plane: Plane,
}

/// (mu, lambda) for the given elastic constants.
pub fn lame_constants(e: f64, nu: f64, plane: Plane) -> Result<(f64, f64)> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {e}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidMaterial(format!("Poisson's ratio must lie in [0, 0.5), got {nu}")));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = match plane {
        Plane::Strain => e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        Plane::Stress => e * nu / (1.0 - nu * nu),
    };
    Ok((mu, lambda))
}

impl Material {
    pub fn new(e: f64, nu: f64, plane: Plane) -> Result<Material> {
        lame_constants(e, nu, plane)?;
        Ok(Material { e, nu, plane })
    }
    pub fn lame(&self) -> (f64, f64) {
        lame_constants(self.e, self.nu, self.plane).expect("validated material")
    }
    pub fn mu(&self) -> f64 {
        self.lame().0
    }
    /// Constitutive matrix in Voigt order (xx, yy, xy) with engineering shear.
    pub fn d_matrix(&self) -> [[f64; 3]; 3] {
        let (mu, la) = self.lame();
        [[la + 2.0 * mu, la, 0.0], [la, la + 2.0 * mu, 0.0], [0.0, 0.0, mu]]
    }
    /// Kolosov constant.
    pub fn kappa(&self) -> f64 {
        match self.plane {
            Plane::Stress => (3.0 - self.nu) / (1.0 + self.nu),
            Plane::Strain => 3.0 - 4.0 * self.nu,
        }
    }
    /// Effective modulus used in energy release relations.
    pub fn e_star(&self) -> f64 {
        match self.plane {
            Plane::Stress => self.e,
            Plane::Strain => self.e / (1.0 - self.nu * self.nu),
        }
    }
    /// Stress (xx, yy, xy) from strain (xx, yy, engineering xy).
    pub fn stress(&self, eps: [f64; 3]) -> [f64; 3] {
        let d = self.d_matrix();
        [
            d[0][0] * eps[0] + d[0][1] * eps[1],
            d[1][0] * eps[0] + d[1][1] * eps[1],
            d[2][2] * eps[2],
        ]
    }
}

/// Assignment of global DOF ids to basis functions.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub n: usize,
    pub num_nodes: usize,
    pub enr: usize,
    /// Basis function owning each DOF and its component (0 = x, 1 = y).
    pub tags: Vec<(FunctionKey, u8)>,
    pub eliminated: Vec<FunctionKey>,
    enriched: HashMap<FunctionKey, usize>,
}

impl DofMap {
    pub fn build(map: &EnrichmentMap, num_nodes: usize, enr: usize, eliminated: &[FunctionKey]) -> Result<DofMap> {
        if !(1..=4).contains(&enr) {
            return Err(Error::InvalidConfiguration(format!("enr must be in 1..=4, got {enr}")));
        }
        let mut tags = Vec::with_capacity(2 * num_nodes);
        for node in 0..num_nodes {
            tags.push((FunctionKey::Standard { node }, 0));
            tags.push((FunctionKey::Standard { node }, 1));
        }
        let mut elim: Vec<FunctionKey> = eliminated.to_vec();
        elim.sort_unstable();
        elim.dedup();
        let mut enriched = HashMap::new();
        let mut push = |key: FunctionKey, tags: &mut Vec<(FunctionKey, u8)>| {
            if elim.binary_search(&key).is_ok() {
                return;
            }
            enriched.insert(key, tags.len());
            tags.push((key, 0));
            tags.push((key, 1));
        };
        for (crack, nodes) in map.heaviside_nodes.iter().enumerate() {
            for &node in nodes {
                push(FunctionKey::Heaviside { crack, node }, &mut tags);
            }
        }
        for (tip, nodes) in map.tip_nodes.iter().enumerate() {
            for &node in nodes {
                for alpha in 0..enr {
                    push(FunctionKey::Branch { tip, node, alpha }, &mut tags);
                }
            }
        }
        Ok(DofMap {
            n: tags.len(),
            num_nodes,
            enr,
            tags,
            eliminated: elim,
            enriched,
        })
    }

    pub fn num_standard(&self) -> usize {
        2 * self.num_nodes
    }

    /// The two DOF ids of a basis function, or None if it was eliminated.
    pub fn dofs(&self, key: &FunctionKey) -> Option<usize> {
        match key {
            FunctionKey::Standard { node } => Some(2 * node),
            k => self.enriched.get(k).copied(),
        }
    }

    pub fn is_branch(&self, dof: usize) -> bool {
        matches!(self.tags[dof].0, FunctionKey::Branch { .. })
    }

    pub fn node_of(&self, dof: usize) -> usize {
        match self.tags[dof].0 {
            FunctionKey::Standard { node } | FunctionKey::Heaviside { node, .. } | FunctionKey::Branch { node, .. } => node,
        }
    }
}

/// Sides of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

pub const ALL_EDGES: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

pub fn node_on_edge(mesh: &Mesh, n: usize, edge: Edge) -> bool {
    let (i, j) = mesh.node_ij(n);
    match edge {
        Edge::Left => i == 0,
        Edge::Right => i == mesh.nx - 1,
        Edge::Bottom => j == 0,
        Edge::Top => j == mesh.ny - 1,
    }
}

/// Loads entering the right-hand side.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadSpec {
    pub body_force: Point,
    /// Uniform traction per traction edge.
    pub tractions: Vec<(Edge, Point)>,
    /// Crack-face pressure, applied equal and opposite on both faces.
    pub pressure: f64,
}

#[derive(Clone, Debug)]
pub struct SymSparseSystem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub d: Vec<f64>,
    /// Sorted constrained DOF ids.
    pub constrained: Vec<usize>,
}

impl SymSparseSystem {
    pub fn n(&self) -> usize {
        self.k.n
    }
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut free = Vec::with_capacity(self.n() - self.constrained.len());
        let mut c = self.constrained.iter().peekable();
        for i in 0..self.n() {
            if c.peek() == Some(&&i) {
                c.next();
            } else {
                free.push(i);
            }
        }
        free
    }
    /// Stiffness restricted to free DOFs.
    pub fn reduced_matrix(&self) -> CsrMatrix {
        self.k.submatrix(&self.free_dofs())
    }
}

#[derive(Clone, Debug)]
pub struct Assembled {
    pub system: SymSparseSystem,
    pub dropped_subcells: usize,
    pub quadrature_points: usize,
}

/// Element basis restricted to DOFs that survive elimination.
pub struct ElementDofs {
    pub basis: ElementBasis,
    /// Index into `basis.keys` and the base DOF id.
    pub active: Vec<(usize, usize)>,
}

pub fn element_dofs(mesh: &Mesh, cracks: &CrackSet, map: &EnrichmentMap, dofmap: &DofMap, e: usize) -> ElementDofs {
    let basis = ElementBasis::new(mesh, cracks, map, e, dofmap.enr);
    let active = basis
        .keys
        .iter()
        .enumerate()
        .filter_map(|(i, k)| dofmap.dofs(k).map(|d| (i, d)))
        .collect();
    ElementDofs { basis, active }
}

struct ElementContribution {
    dofs: Vec<usize>,
    ke: Vec<f64>,
    fe: Vec<f64>,
    dropped: usize,
    points: usize,
}

/// Element stiffness (upper triangle computed, then mirrored) and load.
fn element_matrix(
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    material: &Material,
    ed: &ElementDofs,
    loads: &LoadSpec,
    orders: &QuadratureOrders,
) -> Result<ElementContribution> {
    let e = ed.basis.element;
    let (qp, dropped) = element_quadrature(mesh, cracks, map, e, orders);
    let nf = ed.active.len();
    let nd = 2 * nf;
    let mut ke = vec![0.0; nd * nd];
    let mut fe = vec![0.0; nd];
    let (mu, la) = material.lame();
    let c11 = la + 2.0 * mu;
    let mut ev = BasisEval::default();
    let mut g = vec![Point::default(); nf];
    let mut v = vec![0.0; nf];
    let body = loads.body_force != Point::default();
    for q in &qp {
        ed.basis.eval(mesh, cracks, q.x, &mut ev);
        for (a, &(i, _)) in ed.active.iter().enumerate() {
            g[a] = ev.grads[i];
            v[a] = ev.values[i];
        }
        let w = q.w;
        for a in 0..nf {
            let (gxa, gya) = (g[a].x * w, g[a].y * w);
            for b in a..nf {
                let (gxb, gyb) = (g[b].x, g[b].y);
                let kxx = c11 * gxa * gxb + mu * gya * gyb;
                let kxy = la * gxa * gyb + mu * gya * gxb;
                let kyx = la * gya * gxb + mu * gxa * gyb;
                let kyy = c11 * gya * gyb + mu * gxa * gxb;
                let (ra, rb) = (2 * a, 2 * b);
                ke[ra * nd + rb] += kxx;
                ke[ra * nd + rb + 1] += kxy;
                ke[(ra + 1) * nd + rb] += kyx;
                ke[(ra + 1) * nd + rb + 1] += kyy;
            }
            if body {
                fe[2 * a] += w * v[a] * loads.body_force.x;
                fe[2 * a + 1] += w * v[a] * loads.body_force.y;
            }
        }
    }
    for a in 0..nd {
        for b in 0..a {
            // within a diagonal 2x2 block (a odd, b = a-1) the upper entry was computed
            ke[a * nd + b] = ke[b * nd + a];
        }
    }
    if let Some(bad) = ke.iter().chain(fe.iter()).position(|x| !x.is_finite()) {
        return Err(Error::InvalidConfiguration(format!(
            "non-finite stiffness entry {bad} in element {e}"
        )));
    }
    let dofs = ed.active.iter().flat_map(|&(_, d)| [d, d + 1]).collect();
    Ok(ElementContribution {
        dofs,
        ke,
        fe,
        dropped,
        points: qp.len(),
    })
}

/// Equivalent nodal forces of the crack-face pressure in element `e`.
fn pressure_load(mesh: &Mesh, cracks: &CrackSet, map: &EnrichmentMap, ed: &ElementDofs, p: f64, fe: &mut [f64]) {
    let e = ed.basis.element;
    let h = mesh.h();
    let lo = mesh.element_min(e);
    let hi = lo + Point::new(mesh.hx, mesh.hy);
    let g = gauss_legendre(4);
    let (mut ep, mut em) = (BasisEval::default(), BasisEval::default());
    let eps = 1e-9 * h;
    for &c in &map.cut_by[e] {
        let crack = &cracks.cracks[c];
        for s in 0..crack.num_segments() {
            let (a, b) = crack.segment(s);
            let Some((t0, t1)) = clip_segment(a, b, lo, hi) else { continue };
            let len = (b - a).norm() * (t1 - t0);
            if len <= 1e-12 * h {
                continue;
            }
            let n = (b - a).normalized().perp();
            for &(xi, w) in &g {
                let t = t0 + 0.5 * (xi + 1.0) * (t1 - t0);
                let x = a + (b - a) * t;
                ed.basis.eval(mesh, cracks, x + n * eps, &mut ep);
                ed.basis.eval(mesh, cracks, x - n * eps, &mut em);
                let wl = 0.5 * w * len * p;
                for (k, &(i, _)) in ed.active.iter().enumerate() {
                    if matches!(ed.basis.keys[i], FunctionKey::Standard { .. }) {
                        continue;
                    }
                    let jump = ep.values[i] - em.values[i];
                    fe[2 * k] += wl * jump * n.x;
                    fe[2 * k + 1] += wl * jump * n.y;
                }
            }
        }
    }
}

/// Traction contributions on the boundary edges of element `e`.
fn traction_load(mesh: &Mesh, cracks: &CrackSet, ed: &ElementDofs, tractions: &[(Edge, Point)], fe: &mut [f64]) {
    let e = ed.basis.element;
    let (i, j) = mesh.element_ij(e);
    let g = gauss_legendre(3);
    let mut ev = BasisEval::default();
    for &(edge, tr) in tractions {
        let (on, a, b, len) = match edge {
            Edge::Left => (i == 0, (-1.0, -1.0), (-1.0, 1.0), mesh.hy),
            Edge::Right => (i == mesh.nex() - 1, (1.0, -1.0), (1.0, 1.0), mesh.hy),
            Edge::Bottom => (j == 0, (-1.0, -1.0), (1.0, -1.0), mesh.hx),
            Edge::Top => (j == mesh.ney() - 1, (-1.0, 1.0), (1.0, 1.0), mesh.hx),
        };
        if !on {
            continue;
        }
        for &(s, w) in &g {
            let t = 0.5 * (s + 1.0);
            let x = mesh.from_reference(e, a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            ed.basis.eval(mesh, cracks, x, &mut ev);
            for (k, &(fi, _)) in ed.active.iter().enumerate() {
                fe[2 * k] += 0.5 * w * len * ev.values[fi] * tr.x;
                fe[2 * k + 1] += 0.5 * w * len * ev.values[fi] * tr.y;
            }
        }
    }
}

/// Assemble K and F (no boundary conditions). Element contributions are
/// computed in parallel and summed in element order, so the result does not
/// depend on the thread count.
pub fn assemble(
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    material: &Material,
    dofmap: &DofMap,
    loads: &LoadSpec,
    orders: &QuadratureOrders,
) -> Result<Assembled> {
    let ne = mesh.num_elements();
    let n = dofmap.n;
    let eds: Vec<ElementDofs> = (0..ne)
        .into_par_iter()
        .map(|e| element_dofs(mesh, cracks, map, dofmap, e))
        .collect();
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
    for ed in &eds {
        for &(_, da) in &ed.active {
            for &(_, db) in &ed.active {
                rows[da].extend([db as u32, db as u32 + 1]);
                rows[da + 1].extend([db as u32, db as u32 + 1]);
            }
        }
    }
    rows.par_iter_mut().for_each(|r| {
        r.sort_unstable();
        r.dedup();
    });
    let mut k = CsrMatrix::from_pattern(rows);
    let mut f = vec![0.0; n];
    let mut dropped = 0;
    let mut points = 0;
    const CHUNK: usize = 512;
    for chunk in eds.chunks(CHUNK) {
        let contribs: Vec<Result<ElementContribution>> = chunk
            .par_iter()
            .map(|ed| {
                let mut c = element_matrix(mesh, cracks, map, material, ed, loads, orders)?;
                if loads.pressure != 0.0 && map.is_cut(ed.basis.element) {
                    pressure_load(mesh, cracks, map, ed, loads.pressure, &mut c.fe);
                }
                if !loads.tractions.is_empty() {
                    traction_load(mesh, cracks, ed, &loads.tractions, &mut c.fe);
                }
                Ok(c)
            })
            .collect();
        for c in contribs {
            let c = c?;
            let nd = c.dofs.len();
            for a in 0..nd {
                let row = c.dofs[a];
                let start = k.row_ptr[row];
                let cols = &k.col_idx[start..k.row_ptr[row + 1]];
                for b in 0..nd {
                    let p = start + cols.binary_search(&(c.dofs[b] as u32)).expect("pattern entry");
                    k.values[p] += c.ke[a * nd + b];
                }
                f[row] += c.fe[a];
            }
            dropped += c.dropped;
            points += c.points;
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} degenerate integration sub-cells");
    }
    Ok(Assembled {
        system: SymSparseSystem {
            k,
            f,
            d: vec![0.0; n],
            constrained: Vec::new(),
        },
        dropped_subcells: dropped,
        quadrature_points: points,
    })
}

/// Prescribe standard DOFs of boundary nodes on `edges` by symmetric elimination.
pub fn apply_dirichlet<F>(system: &mut SymSparseSystem, mesh: &Mesh, edges: &[Edge], u0: F) -> Result<()>
where
    F: Fn(Point) -> [f64; 2],
{
    let mut vals: Vec<(usize, f64)> = Vec::new();
    for node in 0..mesh.num_nodes() {
        if edges.iter().any(|&e| node_on_edge(mesh, node, e)) {
            let u = u0(mesh.node_coord(node));
            if !(u[0].is_finite() && u[1].is_finite()) {
                return Err(Error::InvalidConfiguration(format!("non-finite Dirichlet value at node {node}")));
            }
            vals.push((2 * node, u[0]));
            vals.push((2 * node + 1, u[1]));
        }
    }
    let n = system.n();
    let mut fixed = vec![false; n];
    let mut value = vec![0.0; n];
    for &(d, v) in &vals {
        fixed[d] = true;
        value[d] = v;
    }
    let k = &mut system.k;
    for &(j, uj) in &vals {
        if uj == 0.0 {
            continue;
        }
        for p in k.row_ptr[j]..k.row_ptr[j + 1] {
            let i = k.col_idx[p] as usize;
            if !fixed[i] {
                system.f[i] -= k.values[p] * uj;
            }
        }
    }
    for i in 0..n {
        for p in k.row_ptr[i]..k.row_ptr[i + 1] {
            let j = k.col_idx[p] as usize;
            if fixed[i] || fixed[j] {
                k.values[p] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    for &(d, v) in &vals {
        system.f[d] = v;
        system.d[d] = v;
    }
    let mut c: Vec<usize> = system.constrained.iter().copied().chain(vals.iter().map(|v| v.0)).collect();
    c.sort_unstable();
    c.dedup();
    system.constrained = c;
    Ok(())
}
