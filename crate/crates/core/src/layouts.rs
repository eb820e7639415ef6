//! Built-in crack layouts.
//!
//! Coordinates are stored normalized to the unit square and scaled onto the
//! configured domain, so a layout can be reused on any rectangle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Crack, CrackEnd, Junction, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Edge crack from the middle of the left side to the domain centre.
    #[serde(rename = "edge")]
    Edge,
    /// Y-shaped crack with three tips, left of centre.
    #[serde(rename = "branch3")]
    Branch3,
    /// 4x4 grid of disjoint slanted cracks.
    #[serde(rename = "grid16")]
    Grid16,
    /// Small edge-crack patch used for the linear dependency scan.
    #[serde(rename = "appendixA")]
    AppendixA,
}

pub const ALL_LAYOUTS: [Layout; 4] = [Layout::Edge, Layout::Branch3, Layout::Grid16, Layout::AppendixA];

impl FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Layout::Edge),
            "branch3" => Ok(Layout::Branch3),
            "grid16" => Ok(Layout::Grid16),
            "appendixA" | "appendix_a" | "appendixa" => Ok(Layout::AppendixA),
            _ => Err(Error::Unsupported(format!("layout {s}"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Edge => "edge",
            Layout::Branch3 => "branch3",
            Layout::Grid16 => "grid16",
            Layout::AppendixA => "appendixA",
        })
    }
}

/// Main branch3 polyline A -> J -> C and the branch J -> B.
const BRANCH_MAIN: [[f64; 2]; 3] = [[0.2641, 0.3887], [0.4137, 0.5123], [0.6123, 0.5261]];
const BRANCH_ARM: [[f64; 2]; 2] = [[0.4137, 0.5123], [0.2719, 0.6542]];

impl Layout {
    /// Default (origin, extent) of the domain.
    pub fn domain(self) -> ([f64; 2], [f64; 2]) {
        match self {
            Layout::Edge => ([0.0, 0.0], [2.0, 2.0]),
            Layout::Branch3 | Layout::Grid16 => ([0.0, 0.0], [10.0, 10.0]),
            Layout::AppendixA => ([0.0, 0.0], [1.0, 1.0]),
        }
    }

    /// Default tip enrichment radius as a fraction of the shorter side.
    pub fn r_tip_fraction(self) -> f64 {
        match self {
            Layout::Edge => 0.2,
            Layout::Branch3 => 0.03,
            Layout::Grid16 => 0.03,
            Layout::AppendixA => 0.185,
        }
    }

    /// True for layouts whose reference solution is the analytical mode-I
    /// field of the first tip.
    pub fn is_mode_i_benchmark(self) -> bool {
        matches!(self, Layout::Edge | Layout::AppendixA)
    }

    pub fn cracks(self, origin: [f64; 2], extent: [f64; 2]) -> Vec<Crack> {
        let map = |p: [f64; 2]| Point::new(origin[0] + p[0] * extent[0], origin[1] + p[1] * extent[1]);
        match self {
            Layout::Edge => vec![Crack::edge(vec![map([0.0, 0.5]), map([0.5, 0.5])])],
            Layout::AppendixA => vec![Crack::edge(vec![map([0.0, 0.55]), map([0.55, 0.55])])],
            Layout::Branch3 => {
                let main = Crack::interior(BRANCH_MAIN.iter().map(|&p| map(p)).collect());
                let arm = Crack {
                    vertices: BRANCH_ARM.iter().map(|&p| map(p)).collect(),
                    tip_start: false,
                    tip_end: true,
                    junction: Some(Junction { host: 0, end: CrackEnd::Start }),
                };
                vec![main, arm]
            }
            Layout::Grid16 => {
                let mut out = Vec::with_capacity(16);
                for j in 0..4 {
                    for i in 0..4 {
                        let c = [(i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0];
                        // alternate the slant so neighbouring cracks are not parallel
                        let deg: f64 = if (i + j) % 2 == 0 { 30.0 } else { -20.0 };
                        let (s, co) = deg.to_radians().sin_cos();
                        let half = 0.06;
                        out.push(Crack::interior(vec![
                            map([c[0] - half * co, c[1] - half * s]),
                            map([c[0] + half * co, c[1] + half * s]),
                        ]));
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CrackSet;

    #[test]
    fn layouts_build_valid_crack_sets() {
        let tips = [1, 3, 32, 1];
        for (l, nt) in ALL_LAYOUTS.into_iter().zip(tips) {
            let (o, e) = l.domain();
            let cs = CrackSet::new(l.cracks(o, e)).unwrap();
            assert_eq!(cs.tips.len(), nt, "{l}");
            assert_eq!(l.to_string().parse::<Layout>().unwrap(), l);
        }
    }

    #[test]
    fn scales_to_domain() {
        let c = Layout::Edge.cracks([1.0, 2.0], [4.0, 2.0]);
        assert_eq!(c[0].vertices, vec![Point::new(1.0, 3.0), Point::new(3.0, 3.0)]);
    }
}
