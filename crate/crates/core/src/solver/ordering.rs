//! Fill-reducing and bandwidth-reducing symmetric orderings.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Natural,
    Rcm,
    NestedDissection,
}

impl FromStr for Ordering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "natural" => Ok(Ordering::Natural),
            "rcm" => Ok(Ordering::Rcm),
            "nd" | "nested_dissection" => Ok(Ordering::NestedDissection),
            _ => Err(Error::Unsupported(format!("ordering {s}"))),
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordering::Natural => "natural",
            Ordering::Rcm => "rcm",
            Ordering::NestedDissection => "nd",
        })
    }
}

/// New-to-old permutation: position i of the result holds old index perm[i].
pub fn reorder(a: &CsrMatrix, method: Ordering) -> Vec<usize> {
    match method {
        Ordering::Natural => (0..a.n).collect(),
        Ordering::Rcm => rcm(a),
        Ordering::NestedDissection => nested_dissection(a),
    }
}

fn degree(a: &CsrMatrix, i: usize) -> usize {
    a.row(i).0.iter().filter(|&&j| j as usize != i).count()
}

/// BFS level structure restricted to `active` vertices.
fn bfs_levels(a: &CsrMatrix, start: usize, active: &[bool], level: &mut [usize]) -> (Vec<usize>, usize) {
    let mut order = vec![start];
    level[start] = 0;
    let mut head = 0;
    let mut depth = 0;
    while head < order.len() {
        let i = order[head];
        head += 1;
        for &j in a.row(i).0 {
            let j = j as usize;
            if active[j] && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                depth = depth.max(level[j]);
                order.push(j);
            }
        }
    }
    (order, depth)
}

/// Pseudo-peripheral vertex of the component containing `start`.
fn pseudo_peripheral(a: &CsrMatrix, start: usize, active: &[bool], level: &mut [usize]) -> usize {
    let mut v = start;
    let mut last_depth = 0;
    loop {
        let (order, depth) = bfs_levels(a, v, active, level);
        let far = order
            .iter()
            .copied()
            .filter(|&i| level[i] == depth)
            .min_by_key(|&i| (degree(a, i), i))
            .unwrap();
        for &i in &order {
            level[i] = usize::MAX;
        }
        if depth <= last_depth && last_depth > 0 {
            return v;
        }
        last_depth = depth;
        if far == v {
            return v;
        }
        v = far;
    }
}

/// Reverse Cuthill-McKee, applied per connected component.
pub fn rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let active = vec![true; n];
    let mut level = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut nbrs = Vec::new();
    for s in 0..n {
        if visited[s] {
            continue;
        }
        let root = pseudo_peripheral(a, s, &active, &mut level);
        let mut q = VecDeque::from([root]);
        visited[root] = true;
        while let Some(i) = q.pop_front() {
            perm.push(i);
            nbrs.clear();
            for &j in a.row(i).0 {
                let j = j as usize;
                if !visited[j] {
                    visited[j] = true;
                    nbrs.push(j);
                }
            }
            nbrs.sort_by_key(|&j| (degree(a, j), j));
            q.extend(nbrs.iter().copied());
        }
    }
    perm.reverse();
    perm
}

/// Recursive nested dissection using BFS level-set separators; small
/// pieces are ordered by RCM.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut level = vec![usize::MAX; n];
    let mut active = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut stack: Vec<Vec<usize>> = Vec::new();
    // components first
    let mut seen = vec![false; n];
    let all = vec![true; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let (comp, _) = bfs_levels(a, s, &all, &mut level);
        for &i in &comp {
            seen[i] = true;
            level[i] = usize::MAX;
        }
        stack.push(comp);
    }
    // post-order: process a part, emit children before separator
    let mut emitted: Vec<Vec<usize>> = Vec::new();
    dissect_all(a, stack, &mut active, &mut level, &mut emitted);
    for part in emitted {
        out.extend(part);
    }
    out
}

const ND_LEAF: usize = 64;

fn dissect_all(a: &CsrMatrix, roots: Vec<Vec<usize>>, active: &mut [bool], level: &mut [usize], out: &mut Vec<Vec<usize>>) {
    for r in roots {
        dissect(a, r, active, level, out);
    }
}

fn dissect(a: &CsrMatrix, verts: Vec<usize>, active: &mut [bool], level: &mut [usize], out: &mut Vec<Vec<usize>>) {
    if verts.len() <= ND_LEAF {
        out.push(local_rcm(a, &verts, active, level));
        return;
    }
    for &v in &verts {
        active[v] = true;
    }
    let root = pseudo_peripheral(a, verts[0], active, level);
    let (order, depth) = bfs_levels(a, root, active, level);
    let disconnected = order.len() < verts.len();
    if disconnected || depth < 2 {
        // split off the reached component, or stop on shallow pieces
        let reached = order;
        for &i in &reached {
            level[i] = usize::MAX;
        }
        for &v in &verts {
            active[v] = false;
        }
        if disconnected {
            let set: std::collections::HashSet<usize> = reached.iter().copied().collect();
            let rest: Vec<usize> = verts.iter().copied().filter(|v| !set.contains(v)).collect();
            dissect(a, reached, active, level, out);
            dissect(a, rest, active, level, out);
        } else {
            out.push(local_rcm(a, &verts, active, level));
        }
        return;
    }
    // middle level as separator
    let mid = {
        let mut count = vec![0usize; depth + 1];
        for &i in &order {
            count[level[i]] += 1;
        }
        let half = order.len() / 2;
        let mut acc = 0;
        let mut m = 1;
        for (l, &c) in count.iter().enumerate() {
            acc += c;
            if acc >= half {
                m = l.clamp(1, depth - 1);
                break;
            }
        }
        m
    };
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &i in &order {
        match level[i].cmp(&mid) {
            std::cmp::Ordering::Less => left.push(i),
            std::cmp::Ordering::Equal => sep.push(i),
            std::cmp::Ordering::Greater => right.push(i),
        }
    }
    for &i in &order {
        level[i] = usize::MAX;
    }
    for &v in &verts {
        active[v] = false;
    }
    dissect(a, left, active, level, out);
    dissect(a, right, active, level, out);
    out.push(sep);
}

fn local_rcm(a: &CsrMatrix, verts: &[usize], active: &mut [bool], level: &mut [usize]) -> Vec<usize> {
    for &v in verts {
        active[v] = true;
    }
    let mut out = Vec::with_capacity(verts.len());
    let mut visited = std::collections::HashSet::new();
    for &s in verts {
        if visited.contains(&s) {
            continue;
        }
        let root = pseudo_peripheral(a, s, active, level);
        let mut q = VecDeque::from([root]);
        visited.insert(root);
        let mut comp = Vec::new();
        while let Some(i) = q.pop_front() {
            comp.push(i);
            let mut nb: Vec<usize> = a
                .row(i)
                .0
                .iter()
                .map(|&j| j as usize)
                .filter(|&j| active[j] && !visited.contains(&j))
                .collect();
            nb.sort_by_key(|&j| (degree(a, j), j));
            for j in nb {
                visited.insert(j);
                q.push_back(j);
            }
        }
        comp.reverse();
        out.extend(comp);
    }
    for &v in verts {
        active[v] = false;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn is_perm(p: &[usize], n: usize) -> bool {
        let mut s = p.to_vec();
        s.sort_unstable();
        s == (0..n).collect::<Vec<_>>()
    }

    #[test]
    fn natural_is_identity() {
        let a = CsrMatrix::identity(5);
        assert_eq!(reorder(&a, Ordering::Natural), vec![0, 1, 2, 3, 4]);
        assert!(is_perm(&reorder(&a, Ordering::Rcm), 5));
    }

    #[test]
    fn shuffled_path_gets_unit_bandwidth() {
        let n = 200;
        let mut labels: Vec<usize> = (0..n).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let mut t = Vec::new();
        for k in 0..n {
            t.push((labels[k], labels[k], 2.0));
            if k + 1 < n {
                t.push((labels[k], labels[k + 1], -1.0));
                t.push((labels[k + 1], labels[k], -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let p = rcm(&a);
        assert!(is_perm(&p, n));
        assert_eq!(a.permute(&p).bandwidth(), 1);
    }

    #[test]
    fn rcm_not_worse_on_tridiagonal_plus_corner() {
        let n = 30;
        let mut t = Vec::new();
        for k in 0..n {
            t.push((k, k, 4.0));
            if k + 1 < n {
                t.push((k, k + 1, -1.0));
                t.push((k + 1, k, -1.0));
            }
        }
        t.push((0, n - 1, -1.0));
        t.push((n - 1, 0, -1.0));
        let a = CsrMatrix::from_triplets(n, &t);
        assert!(a.permute(&rcm(&a)).bandwidth() <= a.bandwidth());
    }

    #[test]
    fn disconnected_and_nd_permutations() {
        let mut t = Vec::new();
        let g = 20;
        for j in 0..g {
            for i in 0..g {
                let k = j * g + i;
                t.push((k, k, 4.0));
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
        // isolated extra vertices
        let n = g * g + 3;
        for k in g * g..n {
            t.push((k, k, 1.0));
        }
        let a = CsrMatrix::from_triplets(n, &t);
        assert!(is_perm(&rcm(&a), n));
        assert!(is_perm(&nested_dissection(&a), n));
    }
}
