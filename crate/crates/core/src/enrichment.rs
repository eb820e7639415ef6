//! Basis functions of the corrected XFEM approximation: bilinear shape
//! functions, shifted Heaviside terms and ramp-weighted shifted branch terms.

use serde::Serialize;

use crate::geometry::{tip_polar, CrackSet, EnrichmentMap, Mesh, Point, Side, Tip};

/// Q4 values and reference-coordinate gradients.
pub fn shape_bilinear(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    debug_assert!(xi.abs() <= 1.0 + 1e-9 && eta.abs() <= 1.0 + 1e-9);
    const S: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut n = [0.0; 4];
    let mut g = [[0.0; 2]; 4];
    for (k, &(sx, sy)) in S.iter().enumerate() {
        n[k] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
        g[k] = [0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi)];
    }
    (n, g)
}

/// Shape values and physical gradients at `x` in element `e`.
pub fn shape_physical(mesh: &Mesh, e: usize, x: Point) -> ([f64; 4], [Point; 4]) {
    let (xi, eta) = mesh.to_reference(e, x);
    let (n, g) = shape_bilinear(xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0));
    let (sx, sy) = (2.0 / mesh.hx, 2.0 / mesh.hy);
    (n, g.map(|d| Point::new(d[0] * sx, d[1] * sy)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchEval {
    pub values: [f64; 4],
    /// Gradients in the local tip frame (d/dx', d/dy').
    pub grads: [Point; 4],
    pub singular: bool,
}

/// The four near-tip functions and their local Cartesian gradients; only
/// the first `enr` entries are filled.
pub fn branch(r: f64, theta: f64, enr: usize) -> BranchEval {
    let mut out = BranchEval {
        values: [0.0; 4],
        grads: [Point::default(); 4],
        singular: r == 0.0,
    };
    if r == 0.0 {
        return out;
    }
    let sr = r.sqrt();
    let (s2, c2) = (0.5 * theta).sin_cos();
    let (s, c) = theta.sin_cos();
    let vals = [sr * s2, sr * c2, sr * s2 * s, sr * c2 * s];
    // (d/dr, d/dtheta)
    let dr = [
        s2 / (2.0 * sr),
        c2 / (2.0 * sr),
        s2 * s / (2.0 * sr),
        c2 * s / (2.0 * sr),
    ];
    let dt = [
        0.5 * sr * c2,
        -0.5 * sr * s2,
        sr * (0.5 * c2 * s + s2 * c),
        sr * (-0.5 * s2 * s + c2 * c),
    ];
    for a in 0..enr.min(4) {
        out.values[a] = vals[a];
        out.grads[a] = Point::new(c * dr[a] - s / r * dt[a], s * dr[a] + c / r * dt[a]);
    }
    out
}

/// Branch functions at `x` with gradients in global coordinates.
pub fn branch_global(tip: &Tip, x: Point, enr: usize) -> BranchEval {
    let (r, th) = tip_polar(tip, x);
    let mut b = branch(r, th, enr);
    let (t, n) = (tip.tangent, tip.tangent.perp());
    for g in b.grads.iter_mut() {
        *g = t * g.x + n * g.y;
    }
    b
}

/// Ramp weight and gradient: sum of shape functions of flagged nodes.
pub fn ramp(n: &[f64; 4], g: &[Point; 4], enriched: [bool; 4]) -> (f64, Point) {
    let mut r = 0.0;
    let mut gr = Point::default();
    for k in 0..4 {
        if enriched[k] {
            r += n[k];
            gr = gr + g[k];
        }
    }
    (r, gr)
}

/// Identity of a basis function (each one owns two scalar DOFs).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FunctionKey {
    Standard { node: usize },
    Heaviside { crack: usize, node: usize },
    /// `alpha` is 0-based.
    Branch { tip: usize, node: usize, alpha: usize },
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Standard,
    Heaviside { slot: usize, shift: f64 },
    Branch { slot: usize, alpha: usize, shift: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Func {
    local: usize,
    kind: Kind,
}

/// Values and gradients of every basis function of an element at one point.
#[derive(Clone, Debug, Default)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

/// Enriched basis of one element, with nodal shifts precomputed.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub element: usize,
    pub nodes: [usize; 4],
    pub keys: Vec<FunctionKey>,
    funcs: Vec<Func>,
    cracks: Vec<usize>,
    tips: Vec<(usize, [bool; 4])>,
    enr: usize,
}

/// Heaviside value at an integration point, nudged off the crack if needed.
pub fn heaviside_at(cracks: &CrackSet, c: usize, x: Point, h: f64) -> f64 {
    if cracks.crack_side(c, x, 1e-12 * h) == Side::OnCrack {
        let n = cracks.face_normal(c, x);
        return cracks.heaviside(c, x + n * (1e-10 * h));
    }
    cracks.heaviside(c, x)
}

impl ElementBasis {
    pub fn new(mesh: &Mesh, cracks: &CrackSet, map: &EnrichmentMap, e: usize, enr: usize) -> Self {
        let nodes = mesh.element_nodes(e);
        let mut keys = Vec::new();
        let mut funcs = Vec::new();
        for (k, &n) in nodes.iter().enumerate() {
            keys.push(FunctionKey::Standard { node: n });
            funcs.push(Func { local: k, kind: Kind::Standard });
        }
        let mut crack_slots = Vec::new();
        for c in 0..map.heaviside_nodes.len() {
            let flagged: Vec<usize> = (0..4).filter(|&k| map.is_heaviside_node(c, nodes[k])).collect();
            if flagged.is_empty() {
                continue;
            }
            let slot = crack_slots.len();
            crack_slots.push(c);
            for k in flagged {
                let shift = cracks.heaviside(c, mesh.node_coord(nodes[k]));
                keys.push(FunctionKey::Heaviside { crack: c, node: nodes[k] });
                funcs.push(Func { local: k, kind: Kind::Heaviside { slot, shift } });
            }
        }
        let mut tips = Vec::new();
        for t in 0..map.tip_nodes.len() {
            let flags = [0, 1, 2, 3].map(|k| map.is_tip_node(t, nodes[k]));
            if !flags.iter().any(|&f| f) {
                continue;
            }
            let slot = tips.len();
            tips.push((t, flags));
            for k in 0..4 {
                if !flags[k] {
                    continue;
                }
                let (r, th) = tip_polar(&cracks.tips[t], mesh.node_coord(nodes[k]));
                let phi = branch(r, th, enr).values;
                for alpha in 0..enr {
                    keys.push(FunctionKey::Branch { tip: t, node: nodes[k], alpha });
                    funcs.push(Func {
                        local: k,
                        kind: Kind::Branch { slot, alpha, shift: phi[alpha] },
                    });
                }
            }
        }
        ElementBasis {
            element: e,
            nodes,
            keys,
            funcs,
            cracks: crack_slots,
            tips,
            enr,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_enriched(&self) -> bool {
        self.keys.len() > 4
    }

    pub fn eval(&self, mesh: &Mesh, cracks: &CrackSet, x: Point, out: &mut BasisEval) {
        let h = mesh.h();
        let (n, g) = shape_physical(mesh, self.element, x);
        let hv: Vec<f64> = self.cracks.iter().map(|&c| heaviside_at(cracks, c, x, h)).collect();
        let tipdata: Vec<(BranchEval, f64, Point)> = self
            .tips
            .iter()
            .map(|&(t, flags)| {
                let b = branch_global(&cracks.tips[t], x, self.enr);
                let (r, gr) = ramp(&n, &g, flags);
                (b, r, gr)
            })
            .collect();
        out.values.clear();
        out.grads.clear();
        for f in &self.funcs {
            let k = f.local;
            match f.kind {
                Kind::Standard => {
                    out.values.push(n[k]);
                    out.grads.push(g[k]);
                }
                Kind::Heaviside { slot, shift } => {
                    let d = hv[slot] - shift;
                    out.values.push(n[k] * d);
                    out.grads.push(g[k] * d);
                }
                Kind::Branch { slot, alpha, shift } => {
                    let (b, r, gr) = &tipdata[slot];
                    let d = b.values[alpha] - shift;
                    out.values.push(n[k] * d * r);
                    out.grads.push(g[k] * (d * r) + b.grads[alpha] * (n[k] * r) + *gr * (n[k] * d));
                }
            }
        }
    }
}

/// The 16 local branch functions N_k (phi_a - phi_a(x_k)) R of element `e`
/// for tip `t`, indexed 4*k + a; R sums the tip-enriched nodes of `e`.
pub fn local_branch_functions(mesh: &Mesh, cracks: &CrackSet, map: &EnrichmentMap, e: usize, t: usize, x: Point) -> [f64; 16] {
    let nodes = mesh.element_nodes(e);
    let tip = &cracks.tips[t];
    let (n, g) = shape_physical(mesh, e, x);
    let flags = nodes.map(|nd| map.is_tip_node(t, nd));
    let (r, _) = ramp(&n, &g, flags);
    let phi = branch_global(tip, x, 4).values;
    let mut out = [0.0; 16];
    for k in 0..4 {
        let (rk, tk) = tip_polar(tip, mesh.node_coord(nodes[k]));
        let pk = branch(rk, tk, 4).values;
        for a in 0..4 {
            out[4 * k + a] = n[k] * (phi[a] - pk[a]) * r;
        }
    }
    out
}
