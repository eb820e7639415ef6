//! Linear dependency of the local branch enrichment functions and the
//! elimination of two of them per crack tip.

use serde::Serialize;

use crate::enrichment::{local_branch_functions, FunctionKey};
use crate::error::{Error, Result};
use crate::geometry::{CrackSet, EnrichmentMap, Mesh};
use crate::quadrature::{element_quadrature, QuadratureOrders};

/// Minimum eigenvalue above which an elimination is considered good.
pub const GOOD_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ElementType {
    /// Blending and cut.
    E1,
    /// Cut, all nodes enriched.
    E2,
    /// Contains the tip.
    E3,
    /// All nodes enriched, not cut.
    E4,
    /// Blending, not cut.
    E5,
}

pub const ALL_TYPES: [ElementType; 5] = [ElementType::E1, ElementType::E2, ElementType::E3, ElementType::E4, ElementType::E5];

pub fn element_type(mesh: &Mesh, map: &EnrichmentMap, e: usize, t: usize) -> Option<ElementType> {
    let k = mesh.element_nodes(e).iter().filter(|&&n| map.is_tip_node(t, n)).count();
    if k == 0 {
        return None;
    }
    if map.tip_in[e] == Some(t) {
        return Some(ElementType::E3);
    }
    Some(match (map.is_cut(e), k == 4) {
        (true, false) => ElementType::E1,
        (true, true) => ElementType::E2,
        (false, true) => ElementType::E4,
        (false, false) => ElementType::E5,
    })
}

/// Gram matrix of the 16 local branch functions over element `e`.
pub fn local_enrichment_gram(
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    e: usize,
    t: usize,
    orders: &QuadratureOrders,
) -> [[f64; 16]; 16] {
    let (qp, _) = element_quadrature(mesh, cracks, map, e, orders);
    let mut g = [[0.0; 16]; 16];
    for q in &qp {
        let f = local_branch_functions(mesh, cracks, map, e, t, q.x);
        for i in 0..16 {
            for j in i..16 {
                g[i][j] += q.w * f[i] * f[j];
            }
        }
    }
    for i in 0..16 {
        for j in 0..i {
            g[i][j] = g[j][i];
        }
    }
    g
}

fn min_eig(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[i][j]);
    let e: Vec<f64> = a.self_adjoint_eigenvalues(faer::Side::Lower).expect("symmetric eigensolve");
    e.into_iter().fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of a trace-normalized symmetric matrix.
pub fn normalized_min_eig(g: &[[f64; 16]; 16]) -> f64 {
    let tr: f64 = (0..16).map(|i| g[i][i]).sum();
    let m: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| v / tr).collect()).collect();
    min_eig(&m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairScan {
    /// 1-based local function indices, i < j.
    pub i: usize,
    pub j: usize,
    pub min_eig: f64,
    pub good: bool,
}

/// Remove every pair of local functions from the unit-trace Gram matrix and
/// classify by the smallest remaining eigenvalue.
pub fn scan_eliminations(g: &[[f64; 16]; 16]) -> Vec<PairScan> {
    let tr: f64 = (0..16).map(|i| g[i][i]).sum();
    let mut out = Vec::with_capacity(120);
    for i in 0..16 {
        for j in i + 1..16 {
            let keep: Vec<usize> = (0..16).filter(|&k| k != i && k != j).collect();
            let m: Vec<Vec<f64>> = keep
                .iter()
                .map(|&a| keep.iter().map(|&b| g[a][b] / tr).collect())
                .collect();
            let min_eig = min_eig(&m);
            out.push(PairScan {
                i: i + 1,
                j: j + 1,
                min_eig,
                good: min_eig > GOOD_THRESHOLD,
            });
        }
    }
    out
}

/// Local function index (1-based) -> (local node 0..4, alpha 0..4).
pub fn local_index(l: usize) -> (usize, usize) {
    ((l - 1) / 4, (l - 1) % 4)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminationRecord {
    pub tip: usize,
    pub element: usize,
    pub element_type: ElementType,
    pub pair: (usize, usize),
    pub keys: Vec<FunctionKey>,
}

/// Pick the fully enriched uncut element nearest each tip (falling back to
/// the tip element) and eliminate the given pair of its local functions.
/// Nothing is eliminated unless all four branch terms are active.
pub fn select_and_eliminate(
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    enr: usize,
    pair: (usize, usize),
) -> Result<Vec<EliminationRecord>> {
    if enr < 4 {
        return Ok(Vec::new());
    }
    if !(1..=16).contains(&pair.0) || !(1..=16).contains(&pair.1) || pair.0 == pair.1 {
        return Err(Error::InvalidConfiguration(format!("invalid elimination pair {pair:?}")));
    }
    let mut out = Vec::with_capacity(cracks.tips.len());
    for (t, tip) in cracks.tips.iter().enumerate() {
        let region = map.tip_region_elements(mesh, t);
        let pick = |want: ElementType| {
            region
                .iter()
                .copied()
                .filter(|&e| element_type(mesh, map, e, t) == Some(want))
                .map(|e| (mesh.element_center(e).dist(tip.position), e))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
                .map(|(_, e)| e)
        };
        let (element, ty) = match pick(ElementType::E4) {
            Some(e) => (e, ElementType::E4),
            None => match pick(ElementType::E3) {
                Some(e) if mesh.element_nodes(e).iter().all(|&n| map.is_tip_node(t, n)) => {
                    log::warn!("tip {t}: no E4 element, eliminating in the tip element");
                    (e, ElementType::E3)
                }
                _ => {
                    return Err(Error::InvalidConfiguration(format!(
                        "tip {t} has no fully enriched element; increase r_tip"
                    )))
                }
            },
        };
        let nodes = mesh.element_nodes(element);
        let keys = [pair.0, pair.1]
            .iter()
            .map(|&l| {
                let (k, alpha) = local_index(l);
                FunctionKey::Branch { tip: t, node: nodes[k], alpha }
            })
            .collect();
        out.push(EliminationRecord {
            tip: t,
            element,
            element_type: ty,
            pair,
            keys,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Crack, EnrichmentMode, Point};

    fn patch(h_scale: f64) -> (Mesh, CrackSet, EnrichmentMap) {
        let m = Mesh::new(11, 11, Point::default(), h_scale, h_scale).unwrap();
        let cs = CrackSet::new(vec![Crack::edge(vec![
            Point::new(0.0, 0.55 * h_scale),
            Point::new(0.55 * h_scale, 0.55 * h_scale),
        ])])
        .unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.185 * h_scale }).unwrap();
        (m, cs, map)
    }

    #[test]
    fn element_types_present() {
        let (m, _, map) = patch(1.0);
        let region = map.tip_region_elements(&m, 0);
        let mut counts = std::collections::BTreeMap::new();
        for e in region {
            *counts.entry(element_type(&m, &map, e, 0).unwrap()).or_insert(0) += 1;
        }
        for ty in ALL_TYPES {
            assert!(counts.get(&ty).copied().unwrap_or(0) > 0, "{ty:?} missing: {counts:?}");
        }
        assert_eq!(counts[&ElementType::E3], 1);
    }

    #[test]
    fn gram_symmetric_psd_and_dependent() {
        let (m, cs, map) = patch(1.0);
        for e in map.tip_region_elements(&m, 0) {
            let g = local_enrichment_gram(&m, &cs, &map, e, 0, &QuadratureOrders::default());
            for i in 0..16 {
                for j in 0..16 {
                    assert_eq!(g[i][j], g[j][i]);
                }
            }
            let me = normalized_min_eig(&g);
            assert!(me > -1e-12, "element {e}: {me}");
            if element_type(&m, &map, e, 0) == Some(ElementType::E4) {
                assert!(me < 1e-14, "E4 element {e} should be dependent, min eig {me}");
            }
        }
    }

    #[test]
    fn scan_invariant_under_scaling() {
        let (m1, c1, p1) = patch(1.0);
        let (m2, c2, p2) = patch(2.0);
        let e = p1.tip_region_elements(&m1, 0).into_iter().find(|&e| element_type(&m1, &p1, e, 0) == Some(ElementType::E4)).unwrap();
        let a = scan_eliminations(&local_enrichment_gram(&m1, &c1, &p1, e, 0, &QuadratureOrders::default()));
        let b = scan_eliminations(&local_enrichment_gram(&m2, &c2, &p2, e, 0, &QuadratureOrders::default()));
        assert_eq!(a.len(), 120);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.good, y.good, "pair {} {}", x.i, x.j);
        }
    }

    #[test]
    fn default_selection_removes_node4_terms_3_4() {
        let (m, cs, map) = patch(1.0);
        let rec = select_and_eliminate(&m, &cs, &map, 4, (15, 16)).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec[0].element_type, ElementType::E4);
        let n4 = m.element_nodes(rec[0].element)[3];
        assert_eq!(
            rec[0].keys,
            vec![
                FunctionKey::Branch { tip: 0, node: n4, alpha: 2 },
                FunctionKey::Branch { tip: 0, node: n4, alpha: 3 }
            ]
        );
        assert!(select_and_eliminate(&m, &cs, &map, 3, (15, 16)).unwrap().is_empty());
        assert_eq!(local_index(12), (2, 3));
        assert_eq!(local_index(1), (0, 0));
    }
}
