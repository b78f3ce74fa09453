//! Discrete curvatures on a vertex star.
//!
//! Each hinge `(g, e, f)` (an edge with its clockwise and counterclockwise fan
//! neighbors) yields a signed dihedral angle, the integrated edge curvature in
//! three Steiner-type variants, the curvature vector, and the circumcentric area
//! split into its contributions from the two adjacent triangles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::star::VertexStar;
use crate::surface::{Family, Vec3};

/// Integrated edge curvature variants: `θ‖e‖`, `2 sin(θ/2)‖e‖`, `2 tan(θ/2)‖e‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Angle,
    #[default]
    Sin,
    Tan,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Angle, Variant::Sin, Variant::Tan];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Angle => "angle",
            Variant::Sin => "sin",
            Variant::Tan => "tan",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Closest approach to `±π` accepted by the tan variant.
pub const TAN_LIMIT: f64 = 1e-6;

pub fn integrated_edge_curvature(theta: f64, chord: f64, variant: Variant) -> Result<f64> {
    match variant {
        Variant::Angle => Ok(theta * chord),
        Variant::Sin => Ok(2.0 * (0.5 * theta).sin() * chord),
        Variant::Tan => {
            if theta.abs() >= PI - TAN_LIMIT {
                Err(Error::VariantOverflow { theta })
            } else {
                Ok(2.0 * (0.5 * theta).tan() * chord)
            }
        }
    }
}

/// Signed angle between the normals of the triangles `(e, f)` and `(g, e)`;
/// positive when the hinge bends toward the side the triangle normals point to.
pub fn dihedral_from_hinge(e: &Vec3, f: &Vec3, g: &Vec3) -> f64 {
    let n1 = e.cross(f).normalize();
    let n2 = g.cross(e).normalize();
    let axis = e.normalize();
    n2.cross(&n1).dot(&axis).atan2(n1.dot(&n2))
}

/// `J_f e`: `e` rotated by π/2 in the plane of the triangle `(e, f)` toward `f`.
pub fn rotate_in_triangle(e: &Vec3, f: &Vec3) -> Vec3 {
    (e.norm_squared() * f - f.dot(e) * e) / e.cross(f).norm()
}

/// Cotangent of the angle opposite `e` in the triangle spanned by `e` and `f`.
pub fn cot_opposite(e: &Vec3, f: &Vec3) -> f64 {
    f.dot(&(f - e)) / e.cross(f).norm()
}

fn angle_opposite(e: &Vec3, f: &Vec3) -> f64 {
    e.cross(f).norm().atan2(f.dot(&(f - e)))
}

/// All discrete quantities attached to one hinge of a star.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurvature {
    pub edge: usize,
    pub family: Family,
    pub chord: f64,
    pub theta: f64,
    pub k_angle: f64,
    pub k_sin: f64,
    /// `None` when `|θ|` is too close to π.
    pub k_tan: Option<f64>,
    pub vector: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub area: f64,
    pub area_f: f64,
    pub area_g: f64,
    pub sign: i8,
}

impl EdgeCurvature {
    pub fn k(&self, variant: Variant) -> Result<f64> {
        match variant {
            Variant::Angle => Ok(self.k_angle),
            Variant::Sin => Ok(self.k_sin),
            Variant::Tan => self.k_tan.ok_or(Error::VariantOverflow { theta: self.theta }),
        }
    }

    pub fn mean(&self, variant: Variant) -> Result<f64> {
        Ok(0.5 * self.k(variant)?)
    }

    pub fn curvature_vector(&self) -> Vec3 {
        Vec3::from(self.vector)
    }
}

/// Straight vectors `(e, f, g)` of the hinge at slot `i`.
pub fn hinge(star: &VertexStar, i: usize) -> Result<(Vec3, Vec3, Vec3)> {
    if !star.is_hinge(i) {
        return Err(Error::NoSecondFace {
            vertex: star.vertex,
            edge: star.edges[i].edge,
        });
    }
    Ok((
        star.edges[i].vector,
        star.next(i).vector,
        star.prev(i).vector,
    ))
}

pub fn dihedral_angle(star: &VertexStar, i: usize) -> Result<f64> {
    let (e, f, g) = hinge(star, i)?;
    Ok(dihedral_from_hinge(&e, &f, &g))
}

pub fn curvature_vector(star: &VertexStar, i: usize) -> Result<Vec3> {
    let (e, f, g) = hinge(star, i)?;
    check_triangles(star, &e, &f, &g)?;
    Ok(rotate_in_triangle(&e, &f) + rotate_in_triangle(&e, &g))
}

fn check_triangles(star: &VertexStar, e: &Vec3, f: &Vec3, g: &Vec3) -> Result<()> {
    let ok = |a: &Vec3, b: &Vec3| a.cross(b).norm() > 1e-10 * a.norm() * b.norm();
    if ok(e, f) && ok(e, g) {
        Ok(())
    } else {
        Err(Error::DegenerateTriangle {
            vertex: star.vertex,
        })
    }
}

/// Circumcentric area of a hinge and its pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircumcentricArea {
    pub area: f64,
    pub area_f: f64,
    pub area_g: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sign: i8,
}

/// `A_e = ¼(cot α + cot β)‖e‖²` with `A_ef = f·(f−e)‖e‖²/(4‖e×f‖)` and likewise for `g`.
pub fn hinge_area(e: &Vec3, f: &Vec3, g: &Vec3) -> CircumcentricArea {
    let e2 = e.norm_squared();
    let area_f = 0.25 * cot_opposite(e, f) * e2;
    let area_g = 0.25 * cot_opposite(e, g) * e2;
    let area = area_f + area_g;
    let sign = if area > 0.0 {
        1
    } else if area < 0.0 {
        -1
    } else {
        0
    };
    CircumcentricArea {
        area,
        area_f,
        area_g,
        alpha: angle_opposite(e, f),
        beta: angle_opposite(e, g),
        sign,
    }
}

pub fn circumcentric_area(star: &VertexStar, i: usize) -> Result<CircumcentricArea> {
    let (e, f, g) = hinge(star, i)?;
    check_triangles(star, &e, &f, &g)?;
    Ok(hinge_area(&e, &f, &g))
}

pub fn edge_curvature(star: &VertexStar, i: usize) -> Result<EdgeCurvature> {
    let (e, f, g) = hinge(star, i)?;
    check_triangles(star, &e, &f, &g)?;
    let theta = dihedral_from_hinge(&e, &f, &g);
    let chord = e.norm();
    let k = rotate_in_triangle(&e, &f) + rotate_in_triangle(&e, &g);
    let a = hinge_area(&e, &f, &g);
    Ok(EdgeCurvature {
        edge: star.edges[i].edge,
        family: star.edges[i].family,
        chord,
        theta,
        k_angle: integrated_edge_curvature(theta, chord, Variant::Angle)?,
        k_sin: integrated_edge_curvature(theta, chord, Variant::Sin)?,
        k_tan: integrated_edge_curvature(theta, chord, Variant::Tan).ok(),
        vector: [k.x, k.y, k.z],
        alpha: a.alpha,
        beta: a.beta,
        area: a.area,
        area_f: a.area_f,
        area_g: a.area_g,
        sign: a.sign,
    })
}

/// Edge curvatures of every slot, in star order.
pub fn star_curvatures(star: &VertexStar) -> Result<Vec<EdgeCurvature>> {
    (0..star.valence()).map(|i| edge_curvature(star, i)).collect()
}

pub fn angle_defect(star: &VertexStar) -> f64 {
    star.angle_defect()
}

/// `A_p = ½ Σ A_e` and `H_p = ½ Σ k_e/2`.
pub fn vertex_area_and_mean(curvatures: &[EdgeCurvature], variant: Variant) -> Result<(f64, f64)> {
    let mut area = 0.0;
    let mut mean = 0.0;
    for c in curvatures {
        area += c.area;
        mean += c.mean(variant)?;
    }
    Ok((0.5 * area, 0.5 * mean))
}

/// Indices (into the curvature list) of the area-maximizing edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Families {
        family1: Option<usize>,
        family2: Option<usize>,
    },
    Umbilic(usize),
}

const TIE_TOLERANCE: f64 = 1e-12;

fn argmax<'a>(items: impl Iterator<Item = (usize, &'a EdgeCurvature)>) -> Option<usize> {
    let mut best: Option<(usize, &EdgeCurvature)> = None;
    for (i, c) in items {
        best = match best {
            None => Some((i, c)),
            Some((j, b)) => {
                let tol = TIE_TOLERANCE * b.area.abs().max(c.area.abs());
                if c.area > b.area + tol || ((c.area - b.area).abs() <= tol && c.edge < b.edge) {
                    Some((i, c))
                } else {
                    Some((j, b))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}

pub fn select_area_maximizing(curvatures: &[EdgeCurvature], umbilic: bool) -> Selection {
    if umbilic {
        return Selection::Umbilic(
            argmax(curvatures.iter().enumerate()).expect("star has edges"),
        );
    }
    let pick = |fam: Family| argmax(curvatures.iter().enumerate().filter(|(_, c)| c.family == fam));
    Selection::Families {
        family1: pick(Family::One),
        family2: pick(Family::Two),
    }
}

/// Pointwise discrete curvatures at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexCurvature {
    pub vertex: usize,
    pub k1: f64,
    pub k2: f64,
    /// Edge whose estimate gives `k₁` (a family-2 edge, or the umbilic choice).
    pub edge_for_k1: usize,
    /// Edge whose estimate gives `k₂` (a family-1 edge, or the umbilic choice).
    pub edge_for_k2: usize,
    pub area: f64,
    pub mean: f64,
    pub angle_defect: f64,
    pub variant: Variant,
}

fn estimate(star: &VertexStar, c: &EdgeCurvature, variant: Variant) -> Result<f64> {
    if c.area <= 0.0 {
        return Err(Error::AreaPositivity {
            vertex: star.vertex,
            edge: c.edge,
            area: c.area,
        });
    }
    Ok(c.k(variant)? / (2.0 * c.area))
}

/// `k = k_e / (2 A_e)` on the area-maximizing edges. The family-1 edge measures
/// curvature across it and so estimates `κ₂`; the family-2 edge estimates `κ₁`.
pub fn principal_estimates_from(
    star: &VertexStar,
    curvatures: &[EdgeCurvature],
    variant: Variant,
) -> Result<VertexCurvature> {
    let (area, mean) = vertex_area_and_mean(curvatures, variant)?;
    let (i1, i2) = match select_area_maximizing(curvatures, star.is_umbilic()) {
        Selection::Umbilic(i) => (i, i),
        Selection::Families {
            family1: Some(a),
            family2: Some(b),
        } => (b, a),
        Selection::Families { .. } => {
            return Err(Error::InvalidArgument(format!(
                "vertex {} lacks an edge of one principal family",
                star.vertex
            )))
        }
    };
    let (c1, c2) = (&curvatures[i1], &curvatures[i2]);
    Ok(VertexCurvature {
        vertex: star.vertex,
        k1: estimate(star, c1, variant)?,
        k2: estimate(star, c2, variant)?,
        edge_for_k1: c1.edge,
        edge_for_k2: c2.edge,
        area,
        mean,
        angle_defect: star.angle_defect(),
        variant,
    })
}

pub fn principal_estimates(star: &VertexStar, variant: Variant) -> Result<VertexCurvature> {
    let curvatures = star_curvatures(star)?;
    principal_estimates_from(star, &curvatures, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn variants_at_right_angle() {
        let half = std::f64::consts::FRAC_PI_2;
        assert_abs_diff_eq!(integrated_edge_curvature(half, 1.0, Variant::Angle).unwrap(), half);
        assert_abs_diff_eq!(
            integrated_edge_curvature(half, 1.0, Variant::Sin).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            integrated_edge_curvature(half, 1.0, Variant::Tan).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        for v in Variant::ALL {
            assert_eq!(integrated_edge_curvature(0.0, 3.0, v).unwrap(), 0.0);
        }
        assert!(matches!(
            integrated_edge_curvature(PI - 1e-7, 1.0, Variant::Tan),
            Err(Error::VariantOverflow { .. })
        ));
    }

    #[test]
    fn rotation_of_orthogonal_pair() {
        let j = rotate_in_triangle(&Vec3::x(), &Vec3::y());
        assert_abs_diff_eq!(j, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn square_and_equilateral_areas() {
        let e = Vec3::x();
        let a = hinge_area(&e, &Vec3::y(), &-Vec3::y());
        assert_abs_diff_eq!(a.area, 0.5, epsilon = 1e-15);
        assert_eq!(a.sign, 1);
        let s = 0.7;
        let h = s * 3f64.sqrt() / 2.0;
        let e = Vec3::new(s, 0.0, 0.0);
        let a = hinge_area(&e, &Vec3::new(s / 2.0, h, 0.0), &Vec3::new(s / 2.0, -h, 0.0));
        assert_abs_diff_eq!(a.area, s * s / (2.0 * 3f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn obtuse_hinge_has_negative_area() {
        let e = Vec3::x();
        let a = hinge_area(&e, &Vec3::new(0.5, 0.1, 0.0), &Vec3::new(0.5, -0.1, 0.0));
        assert!(a.area < 0.0);
        assert!(a.alpha + a.beta > PI);
        assert_eq!(a.sign, -1);
    }

    #[test]
    fn variant_parse() {
        assert_eq!("tan".parse::<Variant>().unwrap(), Variant::Tan);
        assert!("cot".parse::<Variant>().is_err());
        assert_eq!(Variant::default(), Variant::Sin);
    }
}
