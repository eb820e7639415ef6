//! Post-processing: analytical near-tip fields, nodal error norms, stress
//! intensity factors from the interaction integral, von Mises stress and
//! convergence orders.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{element_dofs, DofMap, ElementDofs, Material, Plane};
use crate::enrichment::BasisEval;
use crate::error::{Error, Result};
use crate::geometry::{tip_polar, CrackSet, EnrichmentMap, Mesh, Point, Tip};
use crate::quadrature::{element_quadrature, QuadratureOrders};

/// Mode-I and mode-II near-tip displacement in the tip frame (x', y').
pub fn williams_displacement_local(r: f64, theta: f64, k1: f64, k2: f64, material: &Material) -> [f64; 2] {
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let mu = material.mu();
    let kappa = material.kappa();
    let a = (r / (2.0 * PI)).sqrt() / (2.0 * mu);
    let (s, c) = (theta / 2.0).sin_cos();
    let ux = k1 * a * c * (kappa - 1.0 + 2.0 * s * s) + k2 * a * s * (kappa + 1.0 + 2.0 * c * c);
    let uy = k1 * a * s * (kappa + 1.0 - 2.0 * c * c) - k2 * a * c * (kappa - 1.0 - 2.0 * s * s);
    [ux, uy]
}

/// Near-tip stress (xx, yy, xy) in the tip frame.
pub fn williams_stress_local(r: f64, theta: f64, k1: f64, k2: f64) -> [f64; 3] {
    let f = 1.0 / (2.0 * PI * r).sqrt();
    let (s, c) = (theta / 2.0).sin_cos();
    let (s3, c3) = (1.5 * theta).sin_cos();
    [
        f * (k1 * c * (1.0 - s * s3) - k2 * s * (2.0 + c * c3)),
        f * (k1 * c * (1.0 + s * s3) + k2 * s * c * c3),
        f * (k1 * s * c * c3 + k2 * c * (1.0 - s * s3)),
    ]
}

fn rotate_vec(v: [f64; 2], t: Point) -> [f64; 2] {
    // local -> global, t = local x' axis
    [t.x * v[0] - t.y * v[1], t.y * v[0] + t.x * v[1]]
}

fn to_local_vec(v: [f64; 2], t: Point) -> [f64; 2] {
    [t.x * v[0] + t.y * v[1], -t.y * v[0] + t.x * v[1]]
}

/// Rotate a symmetric tensor (xx, yy, xy) from global into the frame whose
/// x' axis is `t`.
fn to_local_tensor(s: [f64; 3], t: Point) -> [f64; 3] {
    let (c, n) = (t.x, t.y);
    [
        c * c * s[0] + n * n * s[1] + 2.0 * c * n * s[2],
        n * n * s[0] + c * c * s[1] - 2.0 * c * n * s[2],
        -c * n * s[0] + c * n * s[1] + (c * c - n * n) * s[2],
    ]
}

/// Rotate a full 2x2 gradient G[i][j] = du_i/dx_j into the local frame.
fn to_local_grad(g: [[f64; 2]; 2], t: Point) -> [[f64; 2]; 2] {
    let q = [[t.x, t.y], [-t.y, t.x]];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += q[i][a] * g[a][b] * q[j][b];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

/// Global displacement of the pure mode-I field of `tip` with intensity `k1`.
pub fn analytical_edge_crack(x: Point, k1: f64, material: &Material, tip: &Tip) -> [f64; 2] {
    let (r, th) = tip_polar(tip, x);
    rotate_vec(williams_displacement_local(r, th, k1, 0.0, material), tip.tangent)
}

/// Global (strain, stress) of the mode-I field, Voigt order with engineering shear.
pub fn analytical_strain_stress(x: Point, k1: f64, material: &Material, tip: &Tip) -> ([f64; 3], [f64; 3]) {
    let (r, th) = tip_polar(tip, x);
    if r == 0.0 {
        return ([f64::INFINITY; 3], [f64::INFINITY; 3]);
    }
    let sl = williams_stress_local(r, th, k1, 0.0);
    // back to global: rotate by -angle
    let back = Point::new(tip.tangent.x, -tip.tangent.y);
    let sg = to_local_tensor(sl, back);
    (compliance(material, sg), sg)
}

/// Strain from stress under the material's plane assumption.
pub fn compliance(m: &Material, s: [f64; 3]) -> [f64; 3] {
    let (e, nu) = match m.plane {
        Plane::Stress => (m.e, m.nu),
        Plane::Strain => (m.e / (1.0 - m.nu * m.nu), m.nu / (1.0 - m.nu)),
    };
    [
        (s[0] - nu * s[1]) / e,
        (s[1] - nu * s[0]) / e,
        2.0 * (1.0 + nu) * s[2] / e,
    ]
}

pub fn von_mises(s: [f64; 3], material: &Material) -> f64 {
    match material.plane {
        Plane::Stress => (s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3.0 * s[2] * s[2]).max(0.0).sqrt(),
        Plane::Strain => {
            let sz = material.nu * (s[0] + s[1]);
            let d = (s[0] - s[1]).powi(2) + (s[1] - sz).powi(2) + (sz - s[0]).powi(2);
            (0.5 * d + 3.0 * s[2] * s[2]).max(0.0).sqrt()
        }
    }
}

/// How element strains are carried to the nodes before averaging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodalRecovery {
    /// Evaluate the element field at its corners. For the bilinear part this
    /// equals extrapolating the 2x2 Gauss values; the enrichment part is
    /// taken exactly, which keeps the singular term out of the error.
    #[default]
    Corner,
    /// Bilinear extrapolation of all 2x2 Gauss point values.
    Extrapolate,
}

/// Solved displacement field with evaluators for u, strain and stress.
pub struct FieldSolution<'a> {
    pub mesh: &'a Mesh,
    pub cracks: &'a CrackSet,
    pub map: &'a EnrichmentMap,
    pub dofmap: &'a DofMap,
    pub material: &'a Material,
    pub d: &'a [f64],
}

/// Displacement and full gradient G[i][j] = du_i/dx_j at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointState {
    pub u: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

impl PointState {
    pub fn strain(&self) -> [f64; 3] {
        [self.grad[0][0], self.grad[1][1], self.grad[0][1] + self.grad[1][0]]
    }
}

impl<'a> FieldSolution<'a> {
    pub fn new(
        mesh: &'a Mesh,
        cracks: &'a CrackSet,
        map: &'a EnrichmentMap,
        dofmap: &'a DofMap,
        material: &'a Material,
        d: &'a [f64],
    ) -> Result<Self> {
        if d.len() != dofmap.n {
            return Err(Error::DimensionMismatch(format!("solution has {} entries, DOF map {}", d.len(), dofmap.n)));
        }
        Ok(FieldSolution { mesh, cracks, map, dofmap, material, d })
    }

    pub fn element(&self, e: usize) -> ElementDofs {
        element_dofs(self.mesh, self.cracks, self.map, self.dofmap, e)
    }

    pub fn eval_in(&self, ed: &ElementDofs, x: Point, scratch: &mut BasisEval) -> PointState {
        ed.basis.eval(self.mesh, self.cracks, x, scratch);
        let mut s = PointState::default();
        for &(i, base) in &ed.active {
            let (v, g) = (scratch.values[i], scratch.grads[i]);
            let (a, b) = (self.d[base], self.d[base + 1]);
            s.u[0] += v * a;
            s.u[1] += v * b;
            s.grad[0][0] += g.x * a;
            s.grad[0][1] += g.y * a;
            s.grad[1][0] += g.x * b;
            s.grad[1][1] += g.y * b;
        }
        s
    }

    pub fn eval(&self, x: Point) -> Option<PointState> {
        let e = self.mesh.locate(x)?;
        let ed = self.element(e);
        Some(self.eval_in(&ed, x, &mut BasisEval::default()))
    }

    pub fn displacement(&self, x: Point) -> Option<[f64; 2]> {
        self.eval(x).map(|s| s.u)
    }

    pub fn strain(&self, x: Point) -> Option<[f64; 3]> {
        self.eval(x).map(|s| s.strain())
    }

    pub fn stress(&self, x: Point) -> Option<[f64; 3]> {
        self.eval(x).map(|s| self.material.stress(s.strain()))
    }

    /// Nodal displacements: the standard DOFs, since shifted enrichments
    /// vanish at nodes.
    pub fn nodal_displacements(&self) -> Vec<[f64; 2]> {
        (0..self.mesh.num_nodes()).map(|n| [self.d[2 * n], self.d[2 * n + 1]]).collect()
    }

    /// Nodal strain averaged over the adjacent elements, see [`NodalRecovery`].
    pub fn nodal_strains(&self) -> Vec<[f64; 3]> {
        self.nodal_strains_with(NodalRecovery::default())
    }

    pub fn nodal_strains_with(&self, how: NodalRecovery) -> Vec<[f64; 3]> {
        let mesh = self.mesh;
        let g = 1.0 / 3f64.sqrt();
        let gp = [(-g, -g), (g, -g), (g, g), (-g, g)];
        let per_elem: Vec<[[f64; 3]; 4]> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let ed = self.element(e);
                let mut sc = BasisEval::default();
                match how {
                    NodalRecovery::Corner => {
                        // just inside each corner, so a node on a crack takes
                        // this element's side
                        let s = 1.0 - 1e-9;
                        [(-s, -s), (s, -s), (s, s), (-s, s)]
                            .map(|(xi, eta)| self.eval_in(&ed, mesh.from_reference(e, xi, eta), &mut sc).strain())
                    }
                    NodalRecovery::Extrapolate => {
                        let vals: Vec<[f64; 3]> = gp
                            .iter()
                            .map(|&(xi, eta)| self.eval_in(&ed, mesh.from_reference(e, xi, eta), &mut sc).strain())
                            .collect();
                        // corner k sits at reference coordinate sqrt(3) in Gauss-point units
                        let s = 3f64.sqrt();
                        [(-s, -s), (s, -s), (s, s), (-s, s)].map(|(a, b)| {
                            let mut out = [0.0; 3];
                            for (q, &(gx, gy)) in gp.iter().enumerate() {
                                let w = 0.25 * (1.0 + a * gx / g) * (1.0 + b * gy / g);
                                for c in 0..3 {
                                    out[c] += w * vals[q][c];
                                }
                            }
                            out
                        })
                    }
                }
            })
            .collect();
        let mut acc = vec![[0.0; 3]; mesh.num_nodes()];
        let mut cnt = vec![0usize; mesh.num_nodes()];
        for (e, c) in per_elem.iter().enumerate() {
            for (k, &n) in mesh.element_nodes(e).iter().enumerate() {
                for i in 0..3 {
                    acc[n][i] += c[k][i];
                }
                cnt[n] += 1;
            }
        }
        acc.iter().zip(&cnt).map(|(a, &c)| a.map(|v| v / c as f64)).collect()
    }

    /// von Mises stress on a regular grid of `nx` by `ny` sample points,
    /// row-major from the lower-left corner. Samples falling on a crack are
    /// nudged off it.
    pub fn von_mises_grid(&self, nx: usize, ny: usize) -> Vec<f64> {
        let m = self.mesh;
        let h = m.h();
        (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let fx = if nx > 1 { i as f64 / (nx - 1) as f64 } else { 0.5 };
                let fy = if ny > 1 { j as f64 / (ny - 1) as f64 } else { 0.5 };
                let mut x = m.origin + Point::new(fx * m.lx, fy * m.ly);
                for c in 0..self.cracks.cracks.len() {
                    if self.cracks.nearest(c, x).dist < 1e-9 * h {
                        x = x + self.cracks.face_normal(c, x) * (1e-8 * h);
                    }
                }
                for t in &self.cracks.tips {
                    if x.dist(t.position) < 1e-9 * h {
                        x = x + Point::new(1e-8 * h, 1e-8 * h);
                    }
                }
                self.stress(x).map(|s| von_mises(s, self.material)).unwrap_or(0.0)
            })
            .collect()
    }
}

/// Root-mean nodal displacement error.
pub fn l2_error(u: &[[f64; 2]], u_ref: &[[f64; 2]]) -> Result<f64> {
    if u.len() != u_ref.len() || u.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} vs {} nodes", u.len(), u_ref.len())));
    }
    let s: f64 = u.iter().zip(u_ref).map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sum();
    Ok((s / u.len() as f64).sqrt())
}

/// Root-mean nodal energy error from strain/stress differences
/// (engineering shear in Voigt storage).
pub fn energy_error(eps: &[[f64; 3]], sig: &[[f64; 3]], eps_ref: &[[f64; 3]], sig_ref: &[[f64; 3]]) -> Result<f64> {
    let n = eps.len();
    if sig.len() != n || eps_ref.len() != n || sig_ref.len() != n || n == 0 {
        return Err(Error::DimensionMismatch("nodal strain/stress arrays differ in length".into()));
    }
    let s: f64 = (0..n)
        .map(|i| {
            let de: [f64; 3] = std::array::from_fn(|c| eps_ref[i][c] - eps[i][c]);
            let ds: [f64; 3] = std::array::from_fn(|c| sig_ref[i][c] - sig[i][c]);
            de[0] * ds[0] + de[1] * ds[1] + de[2] * ds[2]
        })
        .sum();
    Ok((s.max(0.0) / n as f64).sqrt())
}

pub fn sif_error(k_num: f64, k_ref: f64) -> Result<f64> {
    if k_ref == 0.0 || !k_ref.is_finite() {
        return Err(Error::InvalidConfiguration("reference SIF must be nonzero".into()));
    }
    Ok((k_ref - k_num).abs() / k_ref.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SifResult {
    pub tip: usize,
    pub k1: f64,
    pub k2: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub quadrature_points: usize,
}

/// Gradient source for the interaction integral.
pub trait GradientField: Sync {
    /// Full displacement gradient at `x` within element `e`.
    fn grad(&self, e: usize, x: Point) -> [[f64; 2]; 2];
}

impl GradientField for FieldSolution<'_> {
    fn grad(&self, e: usize, x: Point) -> [[f64; 2]; 2] {
        let ed = self.element(e);
        self.eval_in(&ed, x, &mut BasisEval::default()).grad
    }
}

/// Analytical mode-I field, usable as a gradient source.
pub struct AnalyticalModeI<'a> {
    pub tip: &'a Tip,
    pub k1: f64,
    pub material: &'a Material,
}

impl GradientField for AnalyticalModeI<'_> {
    fn grad(&self, _e: usize, x: Point) -> [[f64; 2]; 2] {
        let (r, th) = tip_polar(self.tip, x);
        let g = aux_grad_local(r, th, self.k1, 0.0, self.material);
        let back = Point::new(self.tip.tangent.x, -self.tip.tangent.y);
        to_local_grad(g, back)
    }
}

/// Local-frame displacement gradient of the Williams field, by central
/// differences in Cartesian local coordinates.
fn aux_grad_local(r: f64, th: f64, k1: f64, k2: f64, m: &Material) -> [[f64; 2]; 2] {
    let (x, y) = (r * th.cos(), r * th.sin());
    let step = 1e-6 * r;
    let u = |px: f64, py: f64| {
        let rr = px.hypot(py);
        let mut t = py.atan2(px);
        // stay on the same face as the centre point
        if th.abs() > 0.5 * PI && t.signum() != th.signum() {
            t += 2.0 * PI * th.signum();
        }
        williams_displacement_local(rr, t, k1, k2, m)
    };
    let (ux1, ux0) = (u(x + step, y), u(x - step, y));
    let (uy1, uy0) = (u(x, y + step), u(x, y - step));
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        g[i][0] = (ux1[i] - ux0[i]) / (2.0 * step);
        g[i][1] = (uy1[i] - uy0[i]) / (2.0 * step);
    }
    g
}

/// Interaction-integral extraction of (K_I, K_II) for tip `t`, using the
/// domain form with a weight q that falls linearly from 1 at radius `r_in`
/// to 0 at `r_out` (nodal values, bilinear in each element).
pub fn sif_extract<G: GradientField>(
    field: &G,
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    material: &Material,
    t: usize,
    r_in: f64,
    r_out: f64,
) -> Result<SifResult> {
    if !(r_out > r_in && r_in >= 0.0) {
        return Err(Error::InvalidConfiguration(format!("bad extraction radii [{r_in}, {r_out}]")));
    }
    let tip = cracks
        .tips
        .get(t)
        .ok_or_else(|| Error::InvalidConfiguration(format!("no tip {t}")))?;
    let qn: Vec<f64> = (0..mesh.num_nodes())
        .map(|n| ((r_out - mesh.node_coord(n).dist(tip.position)) / (r_out - r_in)).clamp(0.0, 1.0))
        .collect();
    let elems: Vec<usize> = (0..mesh.num_elements())
        .filter(|&e| {
            let q = mesh.element_nodes(e).map(|n| qn[n]);
            q.iter().any(|&v| v != q[0])
        })
        .collect();
    if elems.iter().any(|&e| map.tip_in[e].is_some()) {
        log::warn!("tip {t}: extraction ring touches a tip element");
    }
    if elems.iter().any(|&e| map.cut_by[e].iter().any(|&c| c != tip.crack)) {
        log::warn!("tip {t}: extraction ring crosses another crack");
    }
    // the auxiliary field is not polynomial; integrate every ring element finely
    let orders = QuadratureOrders { regular: 8, ..QuadratureOrders::default() };
    let e_star = material.e_star();
    let parts: Vec<([f64; 2], usize)> = elems
        .par_iter()
        .map(|&e| {
            let (qp, _) = element_quadrature(mesh, cracks, map, e, &orders);
            let nodes = mesh.element_nodes(e);
            let mut acc = [0.0; 2];
            for p in &qp {
                let (_, gn) = crate::enrichment::shape_physical(mesh, e, p.x);
                let mut gq = Point::default();
                for k in 0..4 {
                    gq = gq + gn[k] * qn[nodes[k]];
                }
                let gq = to_local_vec([gq.x, gq.y], tip.tangent);
                let gu = to_local_grad(field.grad(e, p.x), tip.tangent);
                let eps = [gu[0][0], gu[1][1], gu[0][1] + gu[1][0]];
                let sig = material.stress(eps);
                let (r, th) = tip_polar(tip, p.x);
                for (mode, (a1, a2)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
                    let ga = aux_grad_local(r, th, a1, a2, material);
                    let sa = williams_stress_local(r, th, a1, a2);
                    let s = [[sig[0], sig[2]], [sig[2], sig[1]]];
                    let sx = [[sa[0], sa[2]], [sa[2], sa[1]]];
                    // mutual strain energy W = sigma : eps_aux
                    let ea = [[ga[0][0], 0.5 * (ga[0][1] + ga[1][0])], [0.5 * (ga[0][1] + ga[1][0]), ga[1][1]]];
                    let mut w = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            w += s[i][j] * ea[i][j];
                        }
                    }
                    let mut integrand = 0.0;
                    let gqv = [gq[0], gq[1]];
                    for j in 0..2 {
                        let mut v = 0.0;
                        for i in 0..2 {
                            v += s[i][j] * ga[i][0] + sx[i][j] * gu[i][0];
                        }
                        if j == 0 {
                            v -= w;
                        }
                        integrand += v * gqv[j];
                    }
                    acc[mode] += integrand * p.w;
                }
            }
            (acc, qp.len())
        })
        .collect();
    let mut i_int = [0.0; 2];
    let mut npts = 0;
    for (a, n) in &parts {
        i_int[0] += a[0];
        i_int[1] += a[1];
        npts += n;
    }
    Ok(SifResult {
        tip: t,
        k1: 0.5 * e_star * i_int[0],
        k2: 0.5 * e_star * i_int[1],
        r_in,
        r_out,
        quadrature_points: npts,
    })
}

/// Least-squares slope of log(error) against log(h); positive when the
/// error decreases under refinement.
pub fn convergence_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::DimensionMismatch("need at least two (h, error) pairs".into()));
    }
    if h.iter().chain(err).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidConfiguration("mesh sizes and errors must be positive".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfiguration("mesh sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Crack, EnrichmentMode};

    fn mat() -> Material {
        Material::new(1e4, 0.3, Plane::Stress).unwrap()
    }

    fn edge_setup(n: usize) -> (Mesh, CrackSet, EnrichmentMap) {
        let m = Mesh::new(n, n, Point::default(), 2.0, 2.0).unwrap();
        let cs = CrackSet::new(vec![Crack::edge(vec![Point::new(0.0, 1.0), Point::new(1.0, 1.0)])]).unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.3 }).unwrap();
        (m, cs, map)
    }

    #[test]
    fn analytical_field_properties() {
        let m = mat();
        let (_, cs, _) = edge_setup(5);
        let tip = &cs.tips[0];
        assert_eq!(analytical_edge_crack(tip.position, 1.0, &m, tip), [0.0, 0.0]);
        let ahead = analytical_edge_crack(tip.position + Point::new(0.3, 0.0), 1.0, &m, tip);
        assert!(ahead[1].abs() < 1e-15);
        let up = analytical_edge_crack(tip.position + Point::new(-0.01, 1e-12), 1.0, &m, tip);
        let dn = analytical_edge_crack(tip.position + Point::new(-0.01, -1e-12), 1.0, &m, tip);
        assert!(up[1] - dn[1] > 0.0);
    }

    #[test]
    fn williams_stress_matches_displacement_gradient() {
        let m = mat();
        for &(r, th) in &[(0.3, 0.4), (0.1, -2.0), (1.2, 2.9)] {
            for (k1, k2) in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.4)] {
                let g = aux_grad_local(r, th, k1, k2, &m);
                let s = m.stress([g[0][0], g[1][1], g[0][1] + g[1][0]]);
                let w = williams_stress_local(r, th, k1, k2);
                for c in 0..3 {
                    assert!((s[c] - w[c]).abs() < 1e-6 * w.iter().fold(0.0f64, |a, v| a.max(v.abs())), "{r} {th} {c}: {s:?} {w:?}");
                }
            }
        }
    }

    #[test]
    fn error_norm_examples() {
        let u = vec![[1.0, 2.0]; 5];
        assert_eq!(l2_error(&u, &u).unwrap(), 0.0);
        let c = 0.3;
        let shifted: Vec<[f64; 2]> = u.iter().map(|a| [a[0] + c, a[1] + c]).collect();
        assert!((l2_error(&u, &shifted).unwrap() - c * 2f64.sqrt()).abs() < 1e-14);
        assert!(l2_error(&u, &u[..3]).is_err());
        assert_eq!(sif_error(1.0, 1.0).unwrap(), 0.0);
        assert!((sif_error(1.02, 1.0).unwrap() - 0.02).abs() < 1e-15);
        assert!(sif_error(1.0, 0.0).is_err());
        let e = vec![[1e-3, 0.0, 0.0]];
        let s = vec![[10.0, 0.0, 0.0]];
        assert_eq!(energy_error(&e, &s, &e, &s).unwrap(), 0.0);
    }

    #[test]
    fn von_mises_uniaxial() {
        let m = mat();
        assert!((von_mises([5.0, 0.0, 0.0], &m) - 5.0).abs() < 1e-14);
        assert_eq!(von_mises([0.0; 3], &m), 0.0);
        let ms = Material::new(1e4, 0.0, Plane::Strain).unwrap();
        assert!((von_mises([5.0, 0.0, 0.0], &ms) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn order_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(1.9)).collect();
        assert!((convergence_order(&h, &e).unwrap() - 1.9).abs() < 1e-12);
        assert!(convergence_order(&h[..1], &e[..1]).is_err());
    }

    #[test]
    fn interaction_integral_recovers_analytical_k1() {
        let m = mat();
        let (mesh, cs, map) = edge_setup(41);
        let h = mesh.h();
        let field = AnalyticalModeI { tip: &cs.tips[0], k1: 1.0, material: &m };
        let r = sif_extract(&field, &mesh, &cs, &map, &m, 0, 2.0 * h, 4.0 * h).unwrap();
        assert!((r.k1 - 1.0).abs() < 0.02, "{r:?}");
        assert!(r.k2.abs() < 0.02, "{r:?}");
        let wide = sif_extract(&field, &mesh, &cs, &map, &m, 0, 3.0 * h, 6.0 * h).unwrap();
        assert!((wide.k1 - r.k1).abs() < 0.03);
    }

    struct Rigid;
    impl GradientField for Rigid {
        fn grad(&self, _: usize, _: Point) -> [[f64; 2]; 2] {
            // infinitesimal rotation
            [[0.0, -1e-3], [1e-3, 0.0]]
        }
    }

    #[test]
    fn rigid_motion_has_zero_sif() {
        let m = mat();
        let (mesh, cs, map) = edge_setup(21);
        let h = mesh.h();
        let r = sif_extract(&Rigid, &mesh, &cs, &map, &m, 0, 2.0 * h, 4.0 * h).unwrap();
        assert!(r.k1.abs() < 1e-10 && r.k2.abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn nodal_strain_exact_for_linear_field() {
        use crate::assembly::DofMap;
        let m = mat();
        let mesh = Mesh::new(6, 5, Point::default(), 1.0, 0.8).unwrap();
        let cs = CrackSet::empty();
        let map = classify(&mesh, &cs, EnrichmentMode::Geometrical { r_tip: 0.1 }).unwrap();
        let dm = DofMap::build(&map, mesh.num_nodes(), 4, &[]).unwrap();
        let mut d = vec![0.0; dm.n];
        for n in 0..mesh.num_nodes() {
            let p = mesh.node_coord(n);
            d[2 * n] = 1e-3 * p.x + 2e-3 * p.y;
            d[2 * n + 1] = -1e-3 * p.y;
        }
        let sol = FieldSolution::new(&mesh, &cs, &map, &dm, &m, &d).unwrap();
        for e in sol.nodal_strains().into_iter().chain(sol.nodal_strains_with(NodalRecovery::Extrapolate)) {
            assert!((e[0] - 1e-3).abs() < 1e-14 && (e[1] + 1e-3).abs() < 1e-14 && (e[2] - 2e-3).abs() < 1e-14);
        }
        let u = sol.displacement(Point::new(0.33, 0.41)).unwrap();
        assert!((u[0] - (0.33e-3 + 0.82e-3)).abs() < 1e-15);
        assert!(sol.von_mises_grid(4, 4).iter().all(|v| v.is_finite()));
    }
}
