//! Quadrature rules and crack-conforming element integration plans.

use crate::geometry::{CrackSet, ElementClass, EnrichmentMap, Mesh, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub w: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    if n == 1 {
        return vec![(0.0, 2.0)];
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Barycentric points and weights (summing to 1) of a triangle rule.
pub fn dunavant(points: usize) -> Vec<([f64; 3], f64)> {
    let mut out = Vec::new();
    let mut orbit3 = |w: f64, a: f64, b: f64| {
        out.push(([a, a, b], w));
        out.push(([a, b, a], w));
        out.push(([b, a, a], w));
    };
    match points {
        7 => {
            orbit3(0.132394152788506, 0.470142064105115, 0.059715871789770);
            orbit3(0.125939180544827, 0.101286507323456, 0.797426985353087);
            out.push(([1.0 / 3.0; 3], 0.225));
        }
        13 => {
            orbit3(0.175615257433208, 0.260345966079040, 0.479308067841920);
            orbit3(0.053347235608838, 0.065130102902216, 0.869739794195568);
            let (a, b, c) = (0.048690315425316, 0.312865496004874, 0.638444188569810);
            let w = 0.077113760890257;
            for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                out.push((p, w));
            }
            out.push(([1.0 / 3.0; 3], -0.149570044467682));
        }
        _ => panic!("unsupported triangle rule with {points} points"),
    }
    out
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Orders used for element integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOrders {
    pub regular: usize,
    pub enriched: usize,
    pub cut_points: usize,
    pub cut_tip_points: usize,
    /// Gauss order per direction of the collapsed rule on tip-element fans.
    pub tip_fan: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        QuadratureOrders {
            regular: 2,
            enriched: 8,
            cut_points: 7,
            cut_tip_points: 13,
            tip_fan: 8,
        }
    }
}

impl QuadratureOrders {
    /// Roughly doubled rule, used for refinement checks.
    pub fn refined(&self) -> Self {
        QuadratureOrders {
            regular: self.regular * 2,
            enriched: self.enriched * 2,
            cut_points: 13,
            cut_tip_points: 13,
            tip_fan: self.tip_fan * 2,
        }
    }
}

pub fn tensor_gauss(mesh: &Mesh, e: usize, n: usize) -> Vec<QuadPoint> {
    let g = gauss_legendre(n);
    let jac = 0.25 * mesh.hx * mesh.hy;
    let mut out = Vec::with_capacity(n * n);
    for &(eta, we) in &g {
        for &(xi, wx) in &g {
            out.push(QuadPoint {
                x: mesh.from_reference(e, xi, eta),
                w: wx * we * jac,
            });
        }
    }
    out
}

fn push_triangle(out: &mut Vec<QuadPoint>, rule: &[([f64; 3], f64)], a: Point, b: Point, c: Point) {
    let area = triangle_area(a, b, c).abs();
    for (l, w) in rule {
        out.push(QuadPoint {
            x: a * l[0] + b * l[1] + c * l[2],
            w: w * area,
        });
    }
}

/// Collapsed tensor Gauss rule on a triangle whose vertex `s` is singular.
fn push_collapsed(out: &mut Vec<QuadPoint>, g: &[(f64, f64)], s: Point, b: Point, c: Point) {
    let twice = (b - s).cross(c - s).abs();
    for &(gu, wu) in g {
        let u = 0.5 * (gu + 1.0);
        for &(gv, wv) in g {
            let v = 0.5 * (gv + 1.0);
            let x = s + ((b - s) * (1.0 - v) + (c - s) * v) * u;
            out.push(QuadPoint {
                x,
                w: 0.25 * wu * wv * u * twice,
            });
        }
    }
}

/// Split a convex polygon by the line through `a` with direction `d`.
fn split_polygon(poly: &[Point], a: Point, d: Point, eps: f64) -> (Vec<Point>, Vec<Point>) {
    let dist: Vec<f64> = poly.iter().map(|&p| d.cross(p - a)).collect();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (dp, dq) = (dist[i], dist[(i + 1) % n]);
        if dp >= -eps {
            left.push(p);
        }
        if dp <= eps {
            right.push(p);
        }
        if (dp > eps && dq < -eps) || (dp < -eps && dq > eps) {
            let t = dp / (dp - dq);
            let m = p + (q - p) * t;
            left.push(m);
            right.push(m);
        }
    }
    (left, right)
}

fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Sub-polygons of element `e` conforming to every crack segment that cuts it.
pub fn conforming_pieces(mesh: &Mesh, cracks: &CrackSet, map: &EnrichmentMap, e: usize) -> Vec<Vec<Point>> {
    let h = mesh.h();
    let eps = 1e-12 * h * h;
    let lo = mesh.element_min(e);
    let hi = lo + Point::new(mesh.hx, mesh.hy);
    let mut pieces = vec![mesh.element_corners(e).to_vec()];
    for &c in &map.cut_by[e] {
        let crack = &cracks.cracks[c];
        for s in 0..crack.num_segments() {
            let (a, b) = crack.segment(s);
            let Some((t0, t1)) = crate::geometry::clip_segment(a, b, lo, hi) else {
                continue;
            };
            if (b - a).norm() * (t1 - t0) <= 1e-12 * h {
                continue;
            }
            let d = (b - a).normalized();
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for p in pieces {
                let (l, r) = split_polygon(&p, a, d, 1e-13 * h);
                let (al, ar) = (polygon_area(&l).abs(), polygon_area(&r).abs());
                if l.len() >= 3 && r.len() >= 3 && al > eps && ar > eps {
                    next.push(l);
                    next.push(r);
                } else {
                    next.push(p);
                }
            }
            pieces = next;
        }
    }
    pieces
}

/// Integration points for element `e` and the number of dropped slivers.
pub fn element_quadrature(
    mesh: &Mesh,
    cracks: &CrackSet,
    map: &EnrichmentMap,
    e: usize,
    orders: &QuadratureOrders,
) -> (Vec<QuadPoint>, usize) {
    let h = mesh.h();
    let min_area = 1e-12 * h * h;
    let tip_enriched = map.class[e] != ElementClass::U;
    let mut dropped = 0;
    if let Some(t) = map.tip_in[e] {
        let tip = cracks.tips[t].position;
        let g = gauss_legendre(orders.tip_fan);
        let mut out = Vec::new();
        let rule = dunavant(orders.cut_tip_points);
        for piece in conforming_pieces(mesh, cracks, map, e) {
            let n = piece.len();
            let sign = polygon_area(&piece).signum();
            let touches = (0..n).all(|i| sign * triangle_area(tip, piece[i], piece[(i + 1) % n]) > -min_area);
            for i in 0..n {
                let (b, c) = (piece[i], piece[(i + 1) % n]);
                if touches {
                    if triangle_area(tip, b, c).abs() < min_area {
                        // edges through the tip carry no area
                        continue;
                    }
                    push_collapsed(&mut out, &g, tip, b, c);
                } else if i >= 1 && i + 1 < n {
                    if triangle_area(piece[0], b, c).abs() < min_area {
                        dropped += 1;
                        continue;
                    }
                    push_triangle(&mut out, &rule, piece[0], b, c);
                }
            }
        }
        return (out, dropped);
    }
    if map.is_cut(e) {
        let rule = dunavant(if tip_enriched { orders.cut_tip_points } else { orders.cut_points });
        let mut out = Vec::new();
        for piece in conforming_pieces(mesh, cracks, map, e) {
            for i in 1..piece.len() - 1 {
                let (a, b, c) = (piece[0], piece[i], piece[i + 1]);
                if triangle_area(a, b, c).abs() < min_area {
                    dropped += 1;
                    continue;
                }
                push_triangle(&mut out, &rule, a, b, c);
            }
        }
        return (out, dropped);
    }
    let n = if tip_enriched { orders.enriched } else { orders.regular };
    (tensor_gauss(mesh, e, n), dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Crack, EnrichmentMode};

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_exact_for_polynomials() {
        for n in 1..=16 {
            let g = gauss_legendre(n);
            assert_eq!(g.len(), n);
            for k in 0..(2 * n) as i32 {
                let q: f64 = g.iter().map(|(x, w)| w * x.powi(k)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k} {q} {exact}");
            }
        }
    }

    #[test]
    fn dunavant_exact_on_reference_triangle() {
        for (pts, deg) in [(7usize, 5u32), (13, 7)] {
            let rule = dunavant(pts);
            assert_eq!(rule.len(), pts);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    // x = l1, y = l2 on the unit right triangle (area 1/2)
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-13, "pts={pts} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn unenriched_element_four_points() {
        let m = Mesh::new(4, 4, Point::default(), 3.0, 3.0).unwrap();
        let map = classify(&m, &CrackSet::empty(), EnrichmentMode::Topological { layers: 1 }).unwrap();
        let (q, d) = element_quadrature(&m, &CrackSet::empty(), &map, 4, &QuadratureOrders::default());
        assert_eq!(q.len(), 4);
        assert_eq!(d, 0);
        assert!((q.iter().map(|p| p.w).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cut_and_tip_elements_preserve_area() {
        let m = Mesh::new(11, 11, Point::default(), 1.0, 1.0).unwrap();
        let cs = CrackSet::new(vec![Crack::edge(vec![
            Point::new(0.0, 0.537),
            Point::new(0.3, 0.561),
            Point::new(0.55, 0.55),
        ])])
        .unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.185 }).unwrap();
        let h2 = m.hx * m.hy;
        let orders = QuadratureOrders::default();
        let mut saw_cut = false;
        for e in 0..m.num_elements() {
            let (q, _) = element_quadrature(&m, &cs, &map, e, &orders);
            let area: f64 = q.iter().map(|p| p.w).sum();
            assert!((area - h2).abs() < 1e-12, "element {e}: {area}");
            if map.is_cut(e) {
                saw_cut = true;
                assert!(q.iter().all(|p| cs.crack_side(0, p.x, 1e-12 * m.h()) != crate::geometry::Side::OnCrack));
            }
        }
        assert!(saw_cut);
        let te = map.tip_elements[0];
        let (q, _) = element_quadrature(&m, &cs, &map, te, &orders);
        let tip = cs.tips[0].position;
        assert!(q.iter().all(|p| p.x.dist(tip) > 0.0));
    }

    #[test]
    fn collapsed_rule_integrates_inverse_sqrt_singularity() {
        // integral of 1/r over the triangle (0,0),(1,0),(1,1) with singular vertex at the origin
        let g = gauss_legendre(8);
        let mut q = Vec::new();
        push_collapsed(&mut q, &g, Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0));
        let val: f64 = q.iter().map(|p| p.w / p.x.norm()).sum();
        let exact = (1.0 + 2f64.sqrt()).ln();
        assert!((val - exact).abs() < 1e-10, "{val} {exact}");
    }
}
