//! Triangulated vertex stars: the local polyhedral approximation at a net vertex.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::CurvatureLineNet;
use crate::surface::{Family, PrincipalFrame, SurfaceBounds, Vec3};

const MIN_EDGE: f64 = 1e-12;
const MIN_SINE: f64 = 1e-10;

/// Straight edge vector from the star center to the far end of a curved edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarEdge {
    pub edge: usize,
    pub family: Family,
    pub vector: Vec3,
    /// Intrinsic length of the curved edge.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexStar {
    pub vertex: usize,
    pub position: Vec3,
    pub frame: PrincipalFrame,
    /// Edges in counterclockwise order about `frame.n`.
    pub edges: Vec<StarEdge>,
    /// `fan[i]` is true when edges `i` and `i + 1` (cyclically) span a triangle.
    pub fan: Vec<bool>,
    pub boundary: bool,
}

/// Local metrics of a star: largest intrinsic edge length and shape regularity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarMetrics {
    pub vertex: usize,
    pub epsilon: f64,
    pub rho: f64,
    /// `ε ≤ 1/(16 K ρ²)`.
    pub sampling_ok: bool,
    pub angle_defect: f64,
}

/// Edge vector in Darboux coordinates with its tangential deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FramedEdge {
    pub edge: usize,
    pub family: Family,
    pub x: f64,
    pub y: f64,
    pub n: f64,
    /// `|y|` for family 1, `|x|` for family 2.
    pub deviation: f64,
}

impl VertexStar {
    /// Assembles a star from edges already in cyclic order and validates it.
    pub fn from_parts(
        vertex: usize,
        position: Vec3,
        frame: PrincipalFrame,
        edges: Vec<StarEdge>,
        fan: Vec<bool>,
        boundary: bool,
    ) -> Result<Self> {
        if fan.len() != edges.len() {
            return Err(Error::InvalidArgument(
                "fan flags must match the number of edges".into(),
            ));
        }
        let star = Self {
            vertex,
            position,
            frame,
            edges,
            fan,
            boundary,
        };
        star.validate()?;
        Ok(star)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::DegenerateStar {
            vertex: self.vertex,
            reason,
        };
        for e in &self.edges {
            if e.vector.norm() < MIN_EDGE {
                return Err(bad(format!("edge {} has zero length", e.edge)));
            }
        }
        for i in self.fan_pairs() {
            let (e, f) = (self.edges[i].vector, self.next(i).vector);
            let c = e.cross(&f);
            if c.norm() < MIN_SINE * e.norm() * f.norm() {
                return Err(bad(format!("edges {} and {} are collinear", self.edges[i].edge, self.next(i).edge)));
            }
            if self.frame.n.dot(&c) <= 0.0 {
                return Err(bad(format!(
                    "fan triangle ({}, {}) is not counterclockwise about the normal",
                    self.edges[i].edge,
                    self.next(i).edge
                )));
            }
        }
        Ok(())
    }

    pub fn valence(&self) -> usize {
        self.edges.len()
    }

    pub fn is_umbilic(&self) -> bool {
        self.frame.umbilic
    }

    /// Counterclockwise neighbor of edge slot `i`.
    pub fn next(&self, i: usize) -> &StarEdge {
        &self.edges[(i + 1) % self.edges.len()]
    }

    /// Clockwise neighbor of edge slot `i`.
    pub fn prev(&self, i: usize) -> &StarEdge {
        let k = self.edges.len();
        &self.edges[(i + k - 1) % k]
    }

    /// Slots `i` whose pair `(i, i + 1)` is a fan triangle.
    pub fn fan_pairs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&i| self.fan[i])
    }

    /// Whether edge slot `i` has fan triangles on both sides.
    pub fn is_hinge(&self, i: usize) -> bool {
        let k = self.edges.len();
        self.fan[i] && self.fan[(i + k - 1) % k]
    }

    /// Largest intrinsic length among the emanating curved edges.
    pub fn epsilon(&self) -> f64 {
        self.edges.iter().fold(0.0, |m, e| m.max(e.length))
    }

    /// Smallest `ρ ≥ 1` with `ε/ρ ≤ ‖e‖` and `‖e‖‖f‖/‖e×f‖ ≤ ρ` over fan pairs.
    pub fn shape_regularity(&self, epsilon: f64) -> f64 {
        let mut rho = 1.0_f64;
        for e in &self.edges {
            rho = rho.max(epsilon / e.vector.norm());
        }
        for i in self.fan_pairs() {
            let (e, f) = (self.edges[i].vector, self.next(i).vector);
            rho = rho.max(e.norm() * f.norm() / e.cross(&f).norm());
        }
        rho
    }

    /// Sum of the fan triangle angles at the center.
    pub fn tip_angle_sum(&self) -> f64 {
        self.fan_pairs()
            .map(|i| {
                let (e, f) = (self.edges[i].vector, self.next(i).vector);
                e.cross(&f).norm().atan2(e.dot(&f))
            })
            .sum()
    }

    /// `2π` minus the tip angle sum.
    pub fn angle_defect(&self) -> f64 {
        TAU - self.tip_angle_sum()
    }

    pub fn metrics(&self, bounds: &SurfaceBounds) -> StarMetrics {
        let epsilon = self.epsilon();
        let rho = self.shape_regularity(epsilon);
        StarMetrics {
            vertex: self.vertex,
            epsilon,
            rho,
            sampling_ok: 16.0 * bounds.k * rho * rho * epsilon <= 1.0,
            angle_defect: self.angle_defect(),
        }
    }

    pub fn framed_edges(&self) -> Vec<FramedEdge> {
        self.edges
            .iter()
            .map(|e| {
                let c = self.frame.coordinates(&e.vector);
                FramedEdge {
                    edge: e.edge,
                    family: e.family,
                    x: c.x,
                    y: c.y,
                    n: c.z,
                    deviation: match e.family {
                        Family::One => c.y.abs(),
                        Family::Two => c.x.abs(),
                    },
                }
            })
            .collect()
    }

    /// OBJ of the fan triangles for inspection.
    pub fn write_obj<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let p = self.position;
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
        for e in &self.edges {
            let q = p + e.vector;
            writeln!(w, "v {} {} {}", q.x, q.y, q.z)?;
        }
        let k = self.edges.len();
        for i in self.fan_pairs() {
            writeln!(w, "f 1 {} {}", i + 2, (i + 1) % k + 2)?;
        }
        Ok(())
    }
}

/// Builds the star at vertex `v`, ordering chords counterclockwise in the tangent plane.
pub fn build_star(net: &CurvatureLineNet, v: usize) -> Result<VertexStar> {
    let vertex = &net.vertices[v];
    let frame = vertex.point.frame;
    let mut edges: Vec<(f64, StarEdge)> = net.incident[v]
        .iter()
        .map(|&id| {
            let edge = &net.edges[id];
            let vector = net.far_position(id, v) - vertex.position;
            let angle = vector.dot(&frame.v2).atan2(vector.dot(&frame.v1));
            (
                angle,
                StarEdge {
                    edge: id,
                    family: edge.family,
                    vector,
                    length: edge.length,
                },
            )
        })
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.edge.cmp(&b.1.edge)));
    let edges: Vec<StarEdge> = edges.into_iter().map(|(_, e)| e).collect();
    let k = edges.len();
    let fan: Vec<bool> = (0..k)
        .map(|i| {
            let (a, b) = (edges[i].edge, edges[(i + 1) % k].edge);
            k > 1 && net.corners[v].contains(&(a.min(b), a.max(b)))
        })
        .collect();
    let boundary = net.is_boundary(v);
    if !boundary && fan.iter().any(|f| !f) {
        return Err(Error::DegenerateStar {
            vertex: v,
            reason: "projected chord order disagrees with the cells of the net".into(),
        });
    }
    VertexStar::from_parts(v, vertex.position, frame, edges, fan, boundary)
}
