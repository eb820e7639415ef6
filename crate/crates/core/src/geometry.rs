//! Structured quadrilateral mesh, polyline cracks and enrichment classification.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }
    /// Left normal (rotate +90 degrees).
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}
impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Uniform Cartesian grid of bilinear quadrilaterals. Nodes are numbered
/// row-major, `id = j * nx + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize, origin: Point, lx: f64, ly: f64) -> Result<Mesh> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGeometry(format!(
                "mesh needs at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "mesh extents must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Mesh {
            nx,
            ny,
            origin,
            lx,
            ly,
            hx: lx / (nx - 1) as f64,
            hy: ly / (ny - 1) as f64,
        })
    }

    /// Characteristic element size.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }
    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }
    pub fn nex(&self) -> usize {
        self.nx - 1
    }
    pub fn ney(&self) -> usize {
        self.ny - 1
    }
    pub fn num_elements(&self) -> usize {
        self.nex() * self.ney()
    }
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % self.nx, n / self.nx)
    }
    pub fn node_coord(&self, n: usize) -> Point {
        let (i, j) = self.node_ij(n);
        Point::new(
            self.origin.x + i as f64 * self.hx,
            self.origin.y + j as f64 * self.hy,
        )
    }
    pub fn element_id(&self, i: usize, j: usize) -> usize {
        j * self.nex() + i
    }
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nex(), e / self.nex())
    }
    /// Counterclockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_ij(e);
        [
            self.node_id(i, j),
            self.node_id(i + 1, j),
            self.node_id(i + 1, j + 1),
            self.node_id(i, j + 1),
        ]
    }
    pub fn element_corners(&self, e: usize) -> [Point; 4] {
        self.element_nodes(e).map(|n| self.node_coord(n))
    }
    pub fn element_min(&self, e: usize) -> Point {
        let (i, j) = self.element_ij(e);
        Point::new(
            self.origin.x + i as f64 * self.hx,
            self.origin.y + j as f64 * self.hy,
        )
    }
    pub fn element_center(&self, e: usize) -> Point {
        self.element_min(e) + Point::new(0.5 * self.hx, 0.5 * self.hy)
    }
    /// Reference coordinates of a physical point relative to element `e`.
    pub fn to_reference(&self, e: usize, p: Point) -> (f64, f64) {
        let c = self.element_center(e);
        (2.0 * (p.x - c.x) / self.hx, 2.0 * (p.y - c.y) / self.hy)
    }
    pub fn from_reference(&self, e: usize, xi: f64, eta: f64) -> Point {
        let c = self.element_center(e);
        Point::new(c.x + 0.5 * xi * self.hx, c.y + 0.5 * eta * self.hy)
    }
    /// Element containing `p`, using half-open cells except at the far edges.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.hx;
        let fy = (p.y - self.origin.y) / self.hy;
        let tol = 1e-12;
        if fx < -tol || fy < -tol || fx > self.nex() as f64 + tol || fy > self.ney() as f64 + tol {
            return None;
        }
        let i = (fx.max(0.0).floor() as usize).min(self.nex() - 1);
        let j = (fy.max(0.0).floor() as usize).min(self.ney() - 1);
        Some(self.element_id(i, j))
    }
    /// Elements sharing node `n` (1 to 4).
    pub fn node_elements(&self, n: usize) -> Vec<usize> {
        let (i, j) = self.node_ij(n);
        let mut out = Vec::with_capacity(4);
        for dj in [1usize, 0] {
            for di in [1usize, 0] {
                if i >= di && j >= dj && i - di < self.nex() && j - dj < self.ney() {
                    out.push(self.element_id(i - di, j - dj));
                }
            }
        }
        out.sort_unstable();
        out
    }
    pub fn is_boundary_node(&self, n: usize) -> bool {
        let (i, j) = self.node_ij(n);
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.origin.x - tol
            && p.y >= self.origin.y - tol
            && p.x <= self.origin.x + self.lx + tol
            && p.y <= self.origin.y + self.ly + tol
    }
    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.contains(p, tol)
            && ((p.x - self.origin.x).abs() <= tol
                || (p.y - self.origin.y).abs() <= tol
                || (p.x - self.origin.x - self.lx).abs() <= tol
                || (p.y - self.origin.y - self.ly).abs() <= tol)
    }
}

/// Which end of a polyline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrackEnd {
    Start,
    End,
}

/// A crack whose endpoint terminates on another crack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Junction {
    pub host: usize,
    pub end: CrackEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crack {
    pub vertices: Vec<Point>,
    pub tip_start: bool,
    pub tip_end: bool,
    pub junction: Option<Junction>,
}

impl Crack {
    /// Crack with tips at both ends.
    pub fn interior(vertices: Vec<Point>) -> Crack {
        Crack {
            vertices,
            tip_start: true,
            tip_end: true,
            junction: None,
        }
    }
    /// Crack opening at its first vertex (on the boundary), tip at the last.
    pub fn edge(vertices: Vec<Point>) -> Crack {
        Crack {
            vertices,
            tip_start: false,
            tip_end: true,
            junction: None,
        }
    }
    pub fn num_segments(&self) -> usize {
        self.vertices.len() - 1
    }
    pub fn segment(&self, s: usize) -> (Point, Point) {
        (self.vertices[s], self.vertices[s + 1])
    }
    fn segment_normal(&self, s: usize) -> Point {
        let (a, b) = self.segment(s);
        (b - a).normalized().perp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tip {
    pub crack: usize,
    pub end: CrackEnd,
    pub position: Point,
    /// Unit tangent of the final segment, pointing toward the tip.
    pub tangent: Point,
}

impl Tip {
    pub fn angle(&self) -> f64 {
        self.tangent.y.atan2(self.tangent.x)
    }
}

/// Nearest point of a polyline to a query point.
#[derive(Clone, Copy, Debug)]
pub struct Nearest {
    pub point: Point,
    pub segment: usize,
    pub t: f64,
    pub dist: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
    OnCrack,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus | Side::OnCrack => 1.0,
            Side::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CrackSet {
    pub cracks: Vec<Crack>,
    pub tips: Vec<Tip>,
}

impl CrackSet {
    pub fn new(cracks: Vec<Crack>) -> Result<CrackSet> {
        let mut tips = Vec::new();
        for (c, crack) in cracks.iter().enumerate() {
            if crack.vertices.len() < 2 {
                return Err(Error::InvalidGeometry(format!(
                    "crack {c} has fewer than 2 vertices"
                )));
            }
            for s in 0..crack.num_segments() {
                let (a, b) = crack.segment(s);
                if !(a.x.is_finite() && a.y.is_finite() && b.x.is_finite() && b.y.is_finite()) {
                    return Err(Error::InvalidGeometry(format!("crack {c} has non-finite vertex")));
                }
                if a.dist(b) == 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "crack {c} has a zero-length segment"
                    )));
                }
            }
            if let Some(j) = crack.junction {
                if j.host >= cracks.len() || j.host == c {
                    return Err(Error::InvalidGeometry(format!(
                        "crack {c} joins an invalid host {}",
                        j.host
                    )));
                }
            }
            let v = &crack.vertices;
            let n = v.len();
            if crack.tip_start && crack.junction.map(|j| j.end) != Some(CrackEnd::Start) {
                tips.push(Tip {
                    crack: c,
                    end: CrackEnd::Start,
                    position: v[0],
                    tangent: (v[0] - v[1]).normalized(),
                });
            }
            if crack.tip_end && crack.junction.map(|j| j.end) != Some(CrackEnd::End) {
                tips.push(Tip {
                    crack: c,
                    end: CrackEnd::End,
                    position: v[n - 1],
                    tangent: (v[n - 1] - v[n - 2]).normalized(),
                });
            }
        }
        Ok(CrackSet { cracks, tips })
    }

    pub fn empty() -> CrackSet {
        CrackSet::default()
    }

    pub fn nearest(&self, c: usize, x: Point) -> Nearest {
        let crack = &self.cracks[c];
        let mut best = Nearest {
            point: crack.vertices[0],
            segment: 0,
            t: 0.0,
            dist: f64::INFINITY,
        };
        for s in 0..crack.num_segments() {
            let (a, b) = crack.segment(s);
            let d = b - a;
            let t = ((x - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            let p = a + d * t;
            let dist = x.dist(p);
            if dist < best.dist {
                best = Nearest {
                    point: p,
                    segment: s,
                    t,
                    dist,
                };
            }
        }
        best
    }

    /// Normal of the negative face at the nearest point (averaged at
    /// interior polyline vertices).
    fn side_normal(&self, c: usize, near: &Nearest) -> Point {
        let crack = &self.cracks[c];
        let ns = crack.num_segments();
        let s = near.segment;
        if near.t >= 1.0 && s + 1 < ns {
            (crack.segment_normal(s) + crack.segment_normal(s + 1)).normalized()
        } else if near.t <= 0.0 && s > 0 {
            (crack.segment_normal(s - 1) + crack.segment_normal(s)).normalized()
        } else {
            crack.segment_normal(s)
        }
    }

    /// Side of `x` relative to crack `c`; `tol` is the on-crack distance.
    pub fn crack_side(&self, c: usize, x: Point, tol: f64) -> Side {
        let near = self.nearest(c, x);
        if near.dist <= tol {
            return Side::OnCrack;
        }
        let n = self.side_normal(c, &near);
        if (x - near.point).dot(n) >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    /// Unit normal of the negative face at the point of crack `c` nearest to `x`.
    pub fn face_normal(&self, c: usize, x: Point) -> Point {
        let near = self.nearest(c, x);
        self.side_normal(c, &near)
    }

    /// Sign-only Heaviside value in {+1, -1}.
    pub fn sign(&self, c: usize, x: Point) -> f64 {
        self.crack_side(c, x, 0.0).sign()
    }

    /// Heaviside enrichment value of crack `c` at `x`. A branch crack is
    /// switched off (value 0) on the far side of its host.
    pub fn heaviside(&self, c: usize, x: Point) -> f64 {
        let crack = &self.cracks[c];
        if let Some(j) = crack.junction {
            let inner = match j.end {
                CrackEnd::Start => crack.vertices[1],
                CrackEnd::End => crack.vertices[crack.vertices.len() - 2],
            };
            let branch_side = self.sign(j.host, inner);
            if self.sign(j.host, x) != branch_side {
                return 0.0;
            }
        }
        self.sign(c, x)
    }

    /// Polar coordinates in the local tip frame, theta in (-pi, pi].
    pub fn tip_polar(&self, t: usize, x: Point) -> (f64, f64) {
        tip_polar(&self.tips[t], x)
    }
}

/// Polar coordinates of `x` in the frame of `tip`; the origin maps to (0, 0).
pub fn tip_polar(tip: &Tip, x: Point) -> (f64, f64) {
    let d = x - tip.position;
    let r = d.norm();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let lx = d.dot(tip.tangent);
    let ly = d.dot(tip.tangent.perp());
    let mut th = ly.atan2(lx);
    if th <= -std::f64::consts::PI {
        th = std::f64::consts::PI;
    }
    (r, th)
}

/// Clip segment [a,b] against the axis-aligned box; returns the parameter range.
pub fn clip_segment(a: Point, b: Point, lo: Point, hi: Point) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x - lo.x),
        (d.x, hi.x - a.x),
        (-d.y, a.y - lo.y),
        (d.y, hi.y - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 <= t1 {
        Some((t0, t1))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnrichmentMode {
    Geometrical { r_tip: f64 },
    Topological { layers: usize },
}

/// Tip-related element class; the Heaviside flag is stored separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementClass {
    /// No tip-enriched node.
    U,
    /// All nodes tip-enriched.
    T,
    /// Some but not all nodes tip-enriched.
    B,
}

#[derive(Clone, Debug)]
pub struct EnrichmentMap {
    pub mode: EnrichmentMode,
    pub class: Vec<ElementClass>,
    /// Cracks cutting each element (sorted).
    pub cut_by: Vec<Vec<usize>>,
    /// Tip contained in each element, if any.
    pub tip_in: Vec<Option<usize>>,
    /// Element containing each tip.
    pub tip_elements: Vec<usize>,
    /// Heaviside-enriched nodes per crack (sorted).
    pub heaviside_nodes: Vec<Vec<usize>>,
    /// Tip-enriched nodes per tip (sorted).
    pub tip_nodes: Vec<Vec<usize>>,
}

impl EnrichmentMap {
    pub fn is_heaviside_node(&self, c: usize, n: usize) -> bool {
        self.heaviside_nodes[c].binary_search(&n).is_ok()
    }
    pub fn is_tip_node(&self, t: usize, n: usize) -> bool {
        self.tip_nodes[t].binary_search(&n).is_ok()
    }
    pub fn is_cut(&self, e: usize) -> bool {
        !self.cut_by[e].is_empty()
    }
    /// Heaviside flag: element has at least one Heaviside-enriched node.
    pub fn has_heaviside(&self, mesh: &Mesh, e: usize) -> bool {
        let nodes = mesh.element_nodes(e);
        (0..self.heaviside_nodes.len())
            .any(|c| nodes.iter().any(|&n| self.is_heaviside_node(c, n)))
    }
    /// Tips with at least one enriched node in element `e`.
    pub fn element_tips(&self, mesh: &Mesh, e: usize) -> Vec<usize> {
        let nodes = mesh.element_nodes(e);
        (0..self.tip_nodes.len())
            .filter(|&t| nodes.iter().any(|&n| self.is_tip_node(t, n)))
            .collect()
    }
    /// Elements with at least one node tip-enriched for `t`.
    pub fn tip_region_elements(&self, mesh: &Mesh, t: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &n in &self.tip_nodes[t] {
            out.extend(mesh.node_elements(n));
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// True if a segment crosses the open interior of the box with positive length.
fn segment_cuts_box(a: Point, b: Point, lo: Point, hi: Point, tol: f64) -> bool {
    let Some((t0, t1)) = clip_segment(a, b, lo, hi) else {
        return false;
    };
    let len = (b - a).norm() * (t1 - t0);
    if len <= tol {
        return false;
    }
    let m = a + (b - a) * (0.5 * (t0 + t1));
    m.x > lo.x + tol && m.x < hi.x - tol && m.y > lo.y + tol && m.y < hi.y - tol
}

pub fn classify(mesh: &Mesh, cracks: &CrackSet, mode: EnrichmentMode) -> Result<EnrichmentMap> {
    let ne = mesh.num_elements();
    let h = mesh.h();
    let tol = 1e-12 * h;
    for (c, crack) in cracks.cracks.iter().enumerate() {
        for v in &crack.vertices {
            if !mesh.contains(*v, tol) {
                return Err(Error::InvalidGeometry(format!(
                    "crack {c} vertex ({}, {}) lies outside the domain",
                    v.x, v.y
                )));
            }
        }
    }
    let mut cut_by = vec![Vec::new(); ne];
    for (c, crack) in cracks.cracks.iter().enumerate() {
        for s in 0..crack.num_segments() {
            let (a, b) = crack.segment(s);
            let lo = Point::new(a.x.min(b.x), a.y.min(b.y));
            let hi = Point::new(a.x.max(b.x), a.y.max(b.y));
            let i0 = (((lo.x - mesh.origin.x) / mesh.hx).floor().max(0.0) as usize).min(mesh.nex() - 1);
            let i1 = (((hi.x - mesh.origin.x) / mesh.hx).floor().max(0.0) as usize).min(mesh.nex() - 1);
            let j0 = (((lo.y - mesh.origin.y) / mesh.hy).floor().max(0.0) as usize).min(mesh.ney() - 1);
            let j1 = (((hi.y - mesh.origin.y) / mesh.hy).floor().max(0.0) as usize).min(mesh.ney() - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let e = mesh.element_id(i, j);
                    let emin = mesh.element_min(e);
                    let emax = emin + Point::new(mesh.hx, mesh.hy);
                    if segment_cuts_box(a, b, emin, emax, tol) && !cut_by[e].contains(&c) {
                        cut_by[e].push(c);
                    }
                }
            }
        }
    }
    for v in cut_by.iter_mut() {
        v.sort_unstable();
    }

    let mut tip_in = vec![None; ne];
    let mut tip_elements = Vec::with_capacity(cracks.tips.len());
    for (t, tip) in cracks.tips.iter().enumerate() {
        let e = mesh.locate(tip.position).ok_or_else(|| {
            Error::InvalidGeometry(format!("tip {t} lies outside the domain"))
        })?;
        tip_in[e] = Some(t);
        tip_elements.push(e);
    }

    let mut tip_nodes = Vec::with_capacity(cracks.tips.len());
    for (t, tip) in cracks.tips.iter().enumerate() {
        let mut nodes = match mode {
            EnrichmentMode::Geometrical { r_tip } => {
                if !(r_tip >= 0.0) {
                    return Err(Error::InvalidConfiguration(format!(
                        "r_tip must be non-negative, got {r_tip}"
                    )));
                }
                let (ci, cj) = mesh.element_ij(tip_elements[t]);
                let ri = (r_tip / mesh.hx).ceil() as isize + 1;
                let rj = (r_tip / mesh.hy).ceil() as isize + 1;
                let mut v = Vec::new();
                for j in (cj as isize - rj).max(0)..=(cj as isize + rj + 1).min(mesh.ny as isize - 1) {
                    for i in (ci as isize - ri).max(0)..=(ci as isize + ri + 1).min(mesh.nx as isize - 1) {
                        let n = mesh.node_id(i as usize, j as usize);
                        if mesh.node_coord(n).dist(tip.position) <= r_tip {
                            v.push(n);
                        }
                    }
                }
                v
            }
            EnrichmentMode::Topological { layers } => {
                let (ci, cj) = mesh.element_ij(tip_elements[t]);
                let l = layers as isize;
                let mut v = Vec::new();
                for j in (cj as isize - l).max(0)..=(cj as isize + l + 1).min(mesh.ny as isize - 1) {
                    for i in (ci as isize - l).max(0)..=(ci as isize + l + 1).min(mesh.nx as isize - 1) {
                        v.push(mesh.node_id(i as usize, j as usize));
                    }
                }
                v
            }
        };
        nodes.sort_unstable();
        nodes.dedup();
        // Enrichment disk must not be crossed by a crack mouth on the boundary.
        let radius = nodes
            .iter()
            .map(|&n| mesh.node_coord(n).dist(tip.position))
            .fold(0.0, f64::max);
        for (c, crack) in cracks.cracks.iter().enumerate() {
            let n = crack.vertices.len();
            for (end, v) in [(crack.tip_start, crack.vertices[0]), (crack.tip_end, crack.vertices[n - 1])] {
                let is_tip = end && crack.junction.is_none();
                if !is_tip && mesh.on_boundary(v, tol) && v.dist(tip.position) <= radius {
                    return Err(Error::InvalidConfiguration(format!(
                        "crack {c} leaves the domain inside the enrichment disk of tip {t}; reduce r_tip"
                    )));
                }
            }
        }
        tip_nodes.push(nodes);
    }

    let mut tip_element_nodes: Vec<usize> = tip_elements
        .iter()
        .flat_map(|&e| mesh.element_nodes(e))
        .collect();
    tip_element_nodes.sort_unstable();
    tip_element_nodes.dedup();

    let mut heaviside_nodes = vec![Vec::new(); cracks.cracks.len()];
    for e in 0..ne {
        if tip_in[e].is_some() {
            continue;
        }
        for &c in &cut_by[e] {
            heaviside_nodes[c].extend(mesh.element_nodes(e));
        }
    }
    for v in heaviside_nodes.iter_mut() {
        v.sort_unstable();
        v.dedup();
        v.retain(|n| tip_element_nodes.binary_search(n).is_err());
    }

    let mut all_tip: Vec<usize> = tip_nodes.iter().flatten().copied().collect();
    all_tip.sort_unstable();
    all_tip.dedup();
    let class = (0..ne)
        .map(|e| {
            let k = mesh
                .element_nodes(e)
                .iter()
                .filter(|n| all_tip.binary_search(n).is_ok())
                .count();
            match k {
                0 => ElementClass::U,
                4 => ElementClass::T,
                _ => ElementClass::B,
            }
        })
        .collect();

    Ok(EnrichmentMap {
        mode,
        class,
        cut_by,
        tip_in,
        tip_elements,
        heaviside_nodes,
        tip_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_mesh(n: usize) -> Mesh {
        Mesh::new(n, n, Point::new(0.0, 0.0), 1.0, 1.0).unwrap()
    }

    #[test]
    fn mesh_counts() {
        let m = Mesh::new(26, 26, Point::default(), 2.0, 2.0).unwrap();
        assert_eq!(m.num_nodes(), 676);
        assert_eq!(m.num_elements(), 625);
        assert_eq!(2 * m.num_nodes(), 1352);
        let m = unit_mesh(2);
        assert_eq!((m.num_nodes(), m.num_elements()), (4, 1));
        assert!(Mesh::new(1, 3, Point::default(), 1.0, 1.0).is_err());
        assert!(Mesh::new(3, 3, Point::default(), 0.0, 1.0).is_err());
    }

    #[test]
    fn element_node_order() {
        let m = unit_mesh(3);
        assert_eq!(m.element_nodes(0), [0, 1, 4, 3]);
        assert_eq!(m.element_nodes(3), [4, 5, 8, 7]);
        assert_eq!(m.node_elements(4), vec![0, 1, 2, 3]);
        assert_eq!(m.node_elements(0), vec![0]);
        assert_eq!(m.locate(Point::new(0.75, 0.25)), Some(1));
        assert_eq!(m.locate(Point::new(1.0, 1.0)), Some(3));
    }

    #[test]
    fn crack_side_straight() {
        let cs = CrackSet::new(vec![Crack::interior(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
        ])])
        .unwrap();
        assert_eq!(cs.crack_side(0, Point::new(0.5, 0.3), 1e-12), Side::Plus);
        assert_eq!(cs.crack_side(0, Point::new(0.5, -0.3), 1e-12), Side::Minus);
        assert_eq!(cs.crack_side(0, Point::new(0.5, 0.0), 1e-12), Side::OnCrack);
    }

    #[test]
    fn crack_side_kinked_matches_brute_force() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.5),
            Point::new(2.0, 0.2),
        ];
        let cs = CrackSet::new(vec![Crack::interior(v.clone())]).unwrap();
        // above first segment, nearest point inside segment 0
        let p = Point::new(0.4, 0.6);
        let d = v[1] - v[0];
        let t = ((p - v[0]).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        let q = v[0] + d * t;
        let expect = if (p - q).dot(d.perp()) >= 0.0 { Side::Plus } else { Side::Minus };
        assert_eq!(cs.crack_side(0, p, 1e-12), expect);
        assert_eq!(expect, Side::Plus);
        // near the kink vertex from above and below
        assert_eq!(cs.crack_side(0, Point::new(1.0, 0.9), 1e-12), Side::Plus);
        assert_eq!(cs.crack_side(0, Point::new(1.0, 0.1), 1e-12), Side::Minus);
    }

    #[test]
    fn tip_polar_examples() {
        let tip = Tip {
            crack: 0,
            end: CrackEnd::End,
            position: Point::new(0.0, 0.0),
            tangent: Point::new(1.0, 0.0),
        };
        let (r, th) = tip_polar(&tip, Point::new(1.0, 0.0));
        assert_eq!((r, th), (1.0, 0.0));
        let (r, th) = tip_polar(&tip, Point::new(0.0, 1.0));
        assert!((r - 1.0).abs() < 1e-15 && (th - PI / 2.0).abs() < 1e-15);
        let (_, th) = tip_polar(&tip, Point::new(-1.0, 0.0));
        assert_eq!(th, PI);
        let rot = Tip {
            tangent: Point::new(0.0, 1.0),
            ..tip
        };
        let (r, th) = tip_polar(&rot, Point::new(1.0, 0.0));
        // oracle: subtract the frame angle and wrap
        let expect = (0.0f64).atan2(1.0) - PI / 2.0;
        assert!((r - 1.0).abs() < 1e-15 && (th - expect).abs() < 1e-15);
        assert_eq!(tip_polar(&tip, tip.position), (0.0, 0.0));
    }

    #[test]
    fn tips_and_tangents() {
        let cs = CrackSet::new(vec![Crack::edge(vec![
            Point::new(0.0, 0.5),
            Point::new(0.5, 0.5),
        ])])
        .unwrap();
        assert_eq!(cs.tips.len(), 1);
        assert_eq!(cs.tips[0].tangent, Point::new(1.0, 0.0));
        assert!(CrackSet::new(vec![Crack::interior(vec![Point::new(0.0, 0.0)])]).is_err());
    }

    #[test]
    fn no_cracks_all_unenriched() {
        let m = unit_mesh(5);
        let map = classify(&m, &CrackSet::empty(), EnrichmentMode::Geometrical { r_tip: 0.3 }).unwrap();
        assert!(map.class.iter().all(|c| *c == ElementClass::U));
        assert!(map.cut_by.iter().all(|c| c.is_empty()));
        assert!(map.heaviside_nodes.is_empty() && map.tip_nodes.is_empty());
    }

    #[test]
    fn appendix_patch_counts() {
        let m = Mesh::new(11, 11, Point::default(), 1.0, 1.0).unwrap();
        let cs = CrackSet::new(vec![Crack::edge(vec![
            Point::new(0.0, 0.55),
            Point::new(0.55, 0.55),
        ])])
        .unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.185 }).unwrap();
        assert_eq!(map.tip_nodes[0].len(), 12);
        let region = map.tip_region_elements(&m, 0);
        assert_eq!(region.len(), 21);
        let mut nodes: Vec<usize> = region.iter().flat_map(|&e| m.element_nodes(e)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        assert_eq!(nodes.len(), 32);
        // heaviside nodes exclude tip element nodes
        let te = m.element_nodes(map.tip_elements[0]);
        assert!(te.iter().all(|n| !map.is_heaviside_node(0, *n)));
    }

    #[test]
    fn cut_elements_match_oracle() {
        let m = unit_mesh(9);
        let y = 0.43;
        let cs = CrackSet::new(vec![Crack::edge(vec![Point::new(0.0, y), Point::new(0.61, y)])]).unwrap();
        let map = classify(&m, &cs, EnrichmentMode::Topological { layers: 1 }).unwrap();
        for e in 0..m.num_elements() {
            let lo = m.element_min(e);
            let hi = lo + Point::new(m.hx, m.hy);
            let oracle = lo.y < y && y < hi.y && lo.x < 0.61;
            assert_eq!(map.is_cut(e), oracle, "element {e}");
        }
        // cut elements away from the tip carry Heaviside nodes on all four corners
        let e = m.element_id(0, 3);
        assert!(m.element_nodes(e).iter().all(|&n| map.is_heaviside_node(0, n)));
    }

    #[test]
    fn mouth_inside_disk_rejected() {
        let m = unit_mesh(11);
        let cs = CrackSet::new(vec![Crack::edge(vec![Point::new(0.0, 0.55), Point::new(0.15, 0.55)])]).unwrap();
        assert!(classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.3 }).is_err());
    }

    #[test]
    fn tip_node_count_scales_like_inverse_h_squared() {
        let cs = CrackSet::new(vec![Crack::edge(vec![Point::new(0.0, 0.5), Point::new(0.5, 0.5)])]).unwrap();
        let counts: Vec<f64> = [21usize, 41, 81]
            .iter()
            .map(|&n| {
                let m = unit_mesh(n);
                classify(&m, &cs, EnrichmentMode::Geometrical { r_tip: 0.2 }).unwrap().tip_nodes[0].len() as f64
            })
            .collect();
        for w in counts.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio > 4.0 / 1.5 && ratio < 4.0 * 1.5, "{counts:?}");
        }
    }

    #[test]
    fn branch_heaviside_switched_off_beyond_host() {
        let host = Crack::interior(vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0)]);
        let branch = Crack {
            vertices: vec![Point::new(1.0, 0.0), Point::new(1.0, 1.0)],
            tip_start: false,
            tip_end: true,
            junction: Some(Junction { host: 0, end: CrackEnd::Start }),
        };
        let cs = CrackSet::new(vec![host, branch]).unwrap();
        assert_eq!(cs.tips.len(), 3);
        assert_eq!(cs.heaviside(1, Point::new(1.5, -0.5)), 0.0);
        assert_ne!(cs.heaviside(1, Point::new(1.5, 0.5)), 0.0);
        assert_eq!(
            cs.heaviside(1, Point::new(1.5, 0.5)),
            -cs.heaviside(1, Point::new(0.5, 0.5))
        );
    }
}
