//! Analytic surface charts and their exact differential geometry.
//!
//! Every chart is a parameterization `(u, v) -> E³` with analytic derivatives up
//! to second order. The shape operator, principal curvatures and Darboux frames
//! are computed from the first and second fundamental forms. Quantities that
//! involve third derivatives (geodesic curvature of principal lines, the bound
//! `K'` on the covariant derivative of the shape operator) are obtained by
//! central finite differences of the analytic second-order machinery.
//!
//! Orientation convention: the unit normal `n` is chosen so that the second
//! fundamental form is `II_ij = X_ij · n`. Spheres, ellipsoids, tori and
//! cylinders therefore carry the normal pointing into the enclosed region and
//! have positive principal curvatures where they are convex. With this choice
//! the height of a nearby surface point above the tangent plane agrees with
//! the osculating paraboloid `(κ₁/2)x² + (κ₂/2)y²`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Uv = Vector2<f64>;

/// Relative gap `|κ₂ − κ₁| / max|κᵢ|` below which a point counts as umbilic.
pub const UMBILIC_TOLERANCE: f64 = 1e-8;

/// Multiplier applied to grid maxima in [`SurfaceChart::estimate_bounds`].
pub const BOUNDS_SAFETY_FACTOR: f64 = 1.05;

/// Intrinsic step used for all finite-difference derivatives.
pub const FD_STEP: f64 = 1e-4;

/// Default latitude half-width of the band covered on charts with poles.
pub const DEFAULT_BAND: f64 = 1.2;

/// Principal direction family. Family one carries the smaller curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    One,
    Two,
}

impl Family {
    pub fn index(self) -> u8 {
        match self {
            Family::One => 1,
            Family::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Family::One),
            2 => Some(Family::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Family::One => Family::Two,
            Family::Two => Family::One,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Meridian profile of a surface of revolution `(r(t) cos u, r(t) sin u, z(t))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// Tube of radius `minor` around a circle of radius `major`; `t` is the tube angle.
    Torus { major: f64, minor: f64 },
    /// Ellipsoid of revolution with equatorial radius `equatorial` and polar half-axis `polar`.
    Spheroid { equatorial: f64, polar: f64 },
}

/// Monge patch `z = (κ/2)(x² + y²) + c30 x³ + c21 x²y + c12 xy² + c03 y³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MongeCubic {
    pub kappa: f64,
    pub c30: f64,
    pub c21: f64,
    pub c12: f64,
    pub c03: f64,
}

impl MongeCubic {
    fn height_jet(&self, x: f64, y: f64) -> [f64; 6] {
        let MongeCubic {
            kappa,
            c30,
            c21,
            c12,
            c03,
        } = *self;
        let h = 0.5 * kappa * (x * x + y * y)
            + c30 * x * x * x
            + c21 * x * x * y
            + c12 * x * y * y
            + c03 * y * y * y;
        let hx = kappa * x + 3.0 * c30 * x * x + 2.0 * c21 * x * y + c12 * y * y;
        let hy = kappa * y + c21 * x * x + 2.0 * c12 * x * y + 3.0 * c03 * y * y;
        let hxx = kappa + 6.0 * c30 * x + 2.0 * c21 * y;
        let hxy = 2.0 * c21 * x + 2.0 * c12 * y;
        let hyy = kappa + 2.0 * c12 * x + 6.0 * c03 * y;
        [h, hx, hy, hxx, hxy, hyy]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceKind {
    Sphere { radius: f64 },
    Plane,
    Cylinder { radius: f64 },
    Revolution(Profile),
    TriaxialEllipsoid { a: f64, b: f64, c: f64 },
    MongePatch(MongeCubic),
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Sphere { .. } => "sphere",
            SurfaceKind::Plane => "plane",
            SurfaceKind::Cylinder { .. } => "cylinder",
            SurfaceKind::Revolution(Profile::Torus { .. }) => "torus",
            SurfaceKind::Revolution(Profile::Spheroid { .. }) => "spheroid",
            SurfaceKind::TriaxialEllipsoid { .. } => "triaxial-ellipsoid",
            SurfaceKind::MongePatch(_) => "monge-patch",
        }
    }
}

/// Parameter-domain rectangle. Periodic axes wrap with period `max − min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub periodic_u: bool,
    pub periodic_v: bool,
}

impl Domain {
    pub fn contains(&self, uv: Uv) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64), periodic: bool| {
            periodic || (x >= lo - 1e-12 && x <= hi + 1e-12)
        };
        inside(uv.x, self.u, self.periodic_u) && inside(uv.y, self.v, self.periodic_v)
    }

    pub fn width_u(&self) -> f64 {
        self.u.1 - self.u.0
    }

    pub fn width_v(&self) -> f64 {
        self.v.1 - self.v.0
    }
}

/// Similarity placing the chart in space: `x ↦ scale · R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }
}

/// Position and parameter derivatives up to second order.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub p: Vec3,
    pub du: Vec3,
    pub dv: Vec3,
    pub duu: Vec3,
    pub duv: Vec3,
    pub dvv: Vec3,
}

/// An analytic parametric surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceChart {
    pub kind: SurfaceKind,
    pub domain: Domain,
    pub placement: Placement,
}

/// Principal curvatures with the adapted orthonormal frame `(v₁, v₂, n)`, `n = v₁ × v₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrincipalFrame {
    pub kappa1: f64,
    pub kappa2: f64,
    pub v1: Vec3,
    pub v2: Vec3,
    pub n: Vec3,
    pub umbilic: bool,
}

impl PrincipalFrame {
    pub fn direction(&self, family: Family) -> Vec3 {
        match family {
            Family::One => self.v1,
            Family::Two => self.v2,
        }
    }

    pub fn kappa(&self, family: Family) -> f64 {
        match family {
            Family::One => self.kappa1,
            Family::Two => self.kappa2,
        }
    }

    pub fn delta_kappa(&self) -> f64 {
        self.kappa2 - self.kappa1
    }

    /// Components of `w` in the frame.
    pub fn coordinates(&self, w: &Vec3) -> Vec3 {
        Vec3::new(w.dot(&self.v1), w.dot(&self.v2), w.dot(&self.n))
    }
}

/// Full pointwise geometry at a parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePointData {
    pub uv: Uv,
    pub position: Vec3,
    pub frame: PrincipalFrame,
    /// Geodesic curvatures of the principal lines along `v₁` and `v₂`;
    /// `None` close to umbilics where the line field is not differentiable.
    pub geodesic: Option<(f64, f64)>,
}

impl SurfacePointData {
    pub fn kappa1(&self) -> f64 {
        self.frame.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.frame.kappa2
    }

    pub fn delta_kappa(&self) -> f64 {
        self.frame.delta_kappa()
    }

    pub fn umbilic(&self) -> bool {
        self.frame.umbilic
    }
}

/// Osculating paraboloid height `(κ₁/2)x² + (κ₂/2)y²` in the Darboux frame of `point`.
pub fn osculating_height(point: &SurfacePointData, x: f64, y: f64) -> f64 {
    0.5 * point.frame.kappa1 * x * x + 0.5 * point.frame.kappa2 * y * y
}

/// Global curvature bounds over a chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceBounds {
    /// Bound on the operator norm of the shape operator.
    pub k: f64,
    /// Bound on the operator norm of its covariant derivative along unit vectors.
    pub k_prime: f64,
    pub density: usize,
}

/// Shape operator in the orthonormal tangent basis `(t1, t2)` with `t1 ∥ X_u`.
#[derive(Clone, Copy, Debug)]
pub struct ShapeOperator {
    pub t1: Vec3,
    pub t2: Vec3,
    pub n: Vec3,
    pub matrix: Matrix2<f64>,
}

impl ShapeOperator {
    /// The operator extended by zero on the normal line, as a symmetric 3×3 matrix.
    pub fn ambient(&self) -> Matrix3<f64> {
        let basis = [self.t1, self.t2];
        let mut m = Matrix3::zeros();
        for a in 0..2 {
            for b in 0..2 {
                m += self.matrix[(a, b)] * basis[a] * basis[b].transpose();
            }
        }
        m
    }
}

struct Local {
    jet: Jet,
    n: Vec3,
    ginv: Matrix2<f64>,
    shape: ShapeOperator,
}

fn profile_jet(kind: &SurfaceKind, t: f64) -> Option<[f64; 6]> {
    let (s, c) = t.sin_cos();
    match *kind {
        SurfaceKind::Sphere { radius } => Some(ellipse_profile(radius, radius, s, c)),
        SurfaceKind::Cylinder { radius } => Some([radius, 0.0, 0.0, t, 1.0, 0.0]),
        SurfaceKind::Revolution(Profile::Spheroid { equatorial, polar }) => {
            Some(ellipse_profile(equatorial, polar, s, c))
        }
        SurfaceKind::Revolution(Profile::Torus { major, minor }) => Some([
            major + minor * c,
            -minor * s,
            -minor * c,
            minor * s,
            minor * c,
            -minor * s,
        ]),
        _ => None,
    }
}

fn ellipse_profile(a: f64, c_axis: f64, s: f64, c: f64) -> [f64; 6] {
    [a * c, -a * s, -a * c, c_axis * s, c_axis * c, -c_axis * s]
}

impl SurfaceChart {
    fn new(kind: SurfaceKind, domain: Domain) -> Self {
        Self {
            kind,
            domain,
            placement: Placement::default(),
        }
    }

    fn band_domain(band: f64) -> Domain {
        Domain {
            u: (0.0, TAU),
            v: (-band, band),
            periodic_u: true,
            periodic_v: false,
        }
    }

    /// Sphere of radius `radius`, latitude band `|v| ≤ DEFAULT_BAND`.
    pub fn sphere(radius: f64) -> Self {
        Self::new(SurfaceKind::Sphere { radius }, Self::band_domain(DEFAULT_BAND))
    }

    /// Plane `z = 0` over `[-half_width, half_width]²`.
    pub fn plane(half_width: f64) -> Self {
        Self::new(
            SurfaceKind::Plane,
            Domain {
                u: (-half_width, half_width),
                v: (-half_width, half_width),
                periodic_u: false,
                periodic_v: false,
            },
        )
    }

    /// Cylinder around the z axis, `0 ≤ z ≤ height`.
    pub fn cylinder(radius: f64, height: f64) -> Self {
        Self::new(
            SurfaceKind::Cylinder { radius },
            Domain {
                u: (0.0, TAU),
                v: (0.0, height),
                periodic_u: true,
                periodic_v: false,
            },
        )
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self::new(
            SurfaceKind::Revolution(Profile::Torus { major, minor }),
            Domain {
                u: (0.0, TAU),
                v: (0.0, TAU),
                periodic_u: true,
                periodic_v: true,
            },
        )
    }

    pub fn spheroid(equatorial: f64, polar: f64) -> Self {
        Self::new(
            SurfaceKind::Revolution(Profile::Spheroid { equatorial, polar }),
            Self::band_domain(DEFAULT_BAND),
        )
    }

    /// Ellipsoid with half-axes `a, b, c` along x, y, z, parameterized as
    /// `(a sin v, b cos v cos u, c cos v sin u)` so the parameter poles sit on the x axis.
    pub fn triaxial_ellipsoid(a: f64, b: f64, c: f64) -> Self {
        Self::new(
            SurfaceKind::TriaxialEllipsoid { a, b, c },
            Domain {
                u: (0.0, TAU),
                v: (-1.4, 1.4),
                periodic_u: true,
                periodic_v: false,
            },
        )
    }

    pub fn monge(cubic: MongeCubic, half_width: f64) -> Self {
        Self::new(
            SurfaceKind::MongePatch(cubic),
            Domain {
                u: (-half_width, half_width),
                v: (-half_width, half_width),
                periodic_u: false,
                periodic_v: false,
            },
        )
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Restricts the non-periodic `v` range of a banded chart to `|v| ≤ band`.
    pub fn with_band(mut self, band: f64) -> Self {
        self.domain.v = (-band, band);
        self
    }

    /// Composes the chart with a rigid motion `x ↦ R x + t` (applied after the current placement).
    pub fn moved(mut self, rotation: Matrix3<f64>, translation: Vec3) -> Self {
        let p = self.placement;
        self.placement = Placement {
            rotation: rotation * p.rotation,
            translation: rotation * p.translation + translation,
            scale: p.scale,
        };
        self
    }

    /// Scales the embedded surface by `lambda > 0` about the origin.
    pub fn scaled(mut self, lambda: f64) -> Self {
        self.placement.scale *= lambda;
        self.placement.translation *= lambda;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// True when parameter lines are curvature lines (meridians and parallels).
    pub fn is_revolution(&self) -> bool {
        profile_jet(&self.kind, 0.0).is_some()
    }

    fn orientation(&self) -> f64 {
        match self.kind {
            SurfaceKind::Plane | SurfaceKind::MongePatch(_) => 1.0,
            _ => -1.0,
        }
    }

    /// Known isolated umbilics inside the parameter domain.
    pub fn known_umbilics(&self) -> Vec<Uv> {
        match self.kind {
            SurfaceKind::MongePatch(_) => vec![Uv::zeros()],
            SurfaceKind::TriaxialEllipsoid { a, b, c } if a > b && b > c => {
                let t0 = (((a * a - b * b) / (a * a - c * c)).sqrt()).asin();
                let mut out = Vec::new();
                for t in [t0, -t0] {
                    for u in [FRAC_PI_2, 3.0 * FRAC_PI_2] {
                        out.push(Uv::new(u, t));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    fn raw_jet(&self, uv: Uv) -> Jet {
        let (u, v) = (uv.x, uv.y);
        if let Some([r, r1, r2, z, z1, z2]) = profile_jet(&self.kind, v) {
            let (s, c) = u.sin_cos();
            return Jet {
                p: Vec3::new(r * c, r * s, z),
                du: Vec3::new(-r * s, r * c, 0.0),
                dv: Vec3::new(r1 * c, r1 * s, z1),
                duu: Vec3::new(-r * c, -r * s, 0.0),
                duv: Vec3::new(-r1 * s, r1 * c, 0.0),
                dvv: Vec3::new(r2 * c, r2 * s, z2),
            };
        }
        match self.kind {
            SurfaceKind::Plane => Jet {
                p: Vec3::new(u, v, 0.0),
                du: Vec3::x(),
                dv: Vec3::y(),
                duu: Vec3::zeros(),
                duv: Vec3::zeros(),
                dvv: Vec3::zeros(),
            },
            SurfaceKind::MongePatch(cubic) => {
                let [h, hx, hy, hxx, hxy, hyy] = cubic.height_jet(u, v);
                Jet {
                    p: Vec3::new(u, v, h),
                    du: Vec3::new(1.0, 0.0, hx),
                    dv: Vec3::new(0.0, 1.0, hy),
                    duu: Vec3::new(0.0, 0.0, hxx),
                    duv: Vec3::new(0.0, 0.0, hxy),
                    dvv: Vec3::new(0.0, 0.0, hyy),
                }
            }
            SurfaceKind::TriaxialEllipsoid { a, b, c } => {
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                Jet {
                    p: Vec3::new(a * sv, b * cv * cu, c * cv * su),
                    du: Vec3::new(0.0, -b * cv * su, c * cv * cu),
                    dv: Vec3::new(a * cv, -b * sv * cu, -c * sv * su),
                    duu: Vec3::new(0.0, -b * cv * cu, -c * cv * su),
                    duv: Vec3::new(0.0, b * sv * su, -c * sv * cu),
                    dvv: Vec3::new(-a * sv, -b * cv * cu, -c * cv * su),
                }
            }
            _ => unreachable!("revolution kinds handled above"),
        }
    }

    /// Position and derivatives in space (placement applied).
    pub fn jet(&self, uv: Uv) -> Jet {
        let j = self.raw_jet(uv);
        let Placement {
            rotation,
            translation,
            scale,
        } = self.placement;
        let lin = |w: Vec3| scale * (rotation * w);
        Jet {
            p: lin(j.p) + translation,
            du: lin(j.du),
            dv: lin(j.dv),
            duu: lin(j.duu),
            duv: lin(j.duv),
            dvv: lin(j.dvv),
        }
    }

    pub fn position(&self, uv: Uv) -> Vec3 {
        self.jet(uv).p
    }

    fn local(&self, uv: Uv) -> Result<Local> {
        let jet = self.jet(uv);
        let cross = jet.du.cross(&jet.dv);
        let area = cross.norm();
        let scale = jet.du.norm().max(jet.dv.norm()).powi(2);
        if !area.is_finite() || area <= 1e-12 * scale {
            return Err(Error::Immersion { u: uv.x, v: uv.y });
        }
        let n = cross * (self.orientation() / area);
        let g = Matrix2::new(
            jet.du.dot(&jet.du),
            jet.du.dot(&jet.dv),
            jet.du.dot(&jet.dv),
            jet.dv.dot(&jet.dv),
        );
        let ginv = g
            .try_inverse()
            .ok_or(Error::Immersion { u: uv.x, v: uv.y })?;
        let h = Matrix2::new(
            jet.duu.dot(&n),
            jet.duv.dot(&n),
            jet.duv.dot(&n),
            jet.dvv.dot(&n),
        );
        let t1 = jet.du.normalize();
        let t2 = n.cross(&t1);
        let coords = |t: &Vec3| ginv * Vector2::new(jet.du.dot(t), jet.dv.dot(t));
        let c1 = coords(&t1);
        let c2 = coords(&t2);
        let s11 = c1.dot(&(h * c1));
        let s12 = c1.dot(&(h * c2));
        let s22 = c2.dot(&(h * c2));
        Ok(Local {
            jet,
            n,
            ginv,
            shape: ShapeOperator {
                t1,
                t2,
                n,
                matrix: Matrix2::new(s11, s12, s12, s22),
            },
        })
    }

    pub fn normal(&self, uv: Uv) -> Result<Vec3> {
        Ok(self.local(uv)?.n)
    }

    pub fn shape_operator(&self, uv: Uv) -> Result<ShapeOperator> {
        Ok(self.local(uv)?.shape)
    }

    /// Parameter-space coordinates of a tangent vector `w` (normal part ignored).
    pub fn tangent_coords(&self, uv: Uv, w: &Vec3) -> Result<Uv> {
        let local = self.local(uv)?;
        Ok(local.ginv * Vector2::new(local.jet.du.dot(w), local.jet.dv.dot(w)))
    }

    /// Principal curvatures (`κ₁ ≤ κ₂`) and Darboux frame.
    pub fn principal_frame(&self, uv: Uv) -> Result<PrincipalFrame> {
        let local = self.local(uv)?;
        let ShapeOperator { t1, t2, n, matrix } = local.shape;
        let (a, b, c) = (matrix[(0, 0)], matrix[(0, 1)], matrix[(1, 1)]);
        let mean = 0.5 * (a + c);
        let half_diff = 0.5 * (a - c);
        let radius = half_diff.hypot(b);
        let kappa1 = mean - radius;
        let kappa2 = mean + radius;
        let scale = kappa1.abs().max(kappa2.abs());
        let umbilic = 2.0 * radius <= UMBILIC_TOLERANCE * scale;
        let mut v1 = if umbilic {
            t1
        } else {
            let psi = 0.5 * b.atan2(half_diff);
            let (s, co) = psi.sin_cos();
            -s * t1 + co * t2
        };
        let du_hat = local.jet.du.normalize();
        let dv_hat = local.jet.dv.normalize();
        let along_u = v1.dot(&du_hat);
        if along_u < -1e-9 || (along_u.abs() <= 1e-9 && v1.dot(&dv_hat) < 0.0) {
            v1 = -v1;
        }
        let v2 = n.cross(&v1);
        Ok(PrincipalFrame {
            kappa1,
            kappa2,
            v1,
            v2,
            n,
            umbilic,
        })
    }

    /// Full pointwise geometry including geodesic curvatures of the principal lines.
    pub fn eval_point(&self, uv: Uv) -> Result<SurfacePointData> {
        let frame = self.principal_frame(uv)?;
        let position = self.position(uv);
        let geodesic = self.geodesic_curvatures(uv, &frame)?;
        Ok(SurfacePointData {
            uv,
            position,
            frame,
            geodesic,
        })
    }

    /// Principal direction of `family` at `uv`, sign-aligned with `previous` when given.
    pub fn principal_direction_field(
        &self,
        uv: Uv,
        family: Family,
        previous: Option<&Vec3>,
    ) -> Result<Vec3> {
        let frame = self.principal_frame(uv)?;
        if frame.umbilic && previous.is_none() {
            return Err(Error::UmbilicAmbiguity { u: uv.x, v: uv.y });
        }
        let d = frame.direction(family);
        Ok(match previous {
            Some(prev) if d.dot(prev) < 0.0 => -d,
            _ => d,
        })
    }

    /// Ambient derivative of the unit principal direction of `family` along itself.
    fn direction_derivative(&self, uv: Uv, frame: &PrincipalFrame, family: Family) -> Result<Vec3> {
        let dir = frame.direction(family);
        let c = self.tangent_coords(uv, &dir)?;
        let plus = self.principal_direction_field(uv + FD_STEP * c, family, Some(&dir))?;
        let minus = self.principal_direction_field(uv - FD_STEP * c, family, Some(&dir))?;
        Ok((plus - minus) / (2.0 * FD_STEP))
    }

    fn geodesic_curvatures(&self, uv: Uv, frame: &PrincipalFrame) -> Result<Option<(f64, f64)>> {
        let scale = frame.kappa1.abs().max(frame.kappa2.abs());
        if frame.delta_kappa().abs() <= 1e-6 * scale || scale == 0.0 {
            return Ok(None);
        }
        // Frenet: ∇_{v₁}v₁ = κᵍ₁ v₂ and ∇_{v₂}v₂ = −κᵍ₂ v₁.
        let d1 = self.direction_derivative(uv, frame, Family::One)?;
        let d2 = self.direction_derivative(uv, frame, Family::Two)?;
        Ok(Some((d1.dot(&frame.v2), -d2.dot(&frame.v1))))
    }

    /// Directional derivatives `(∇_w κ₁, ∇_w κ₂)` along the unit tangent `w`, by central differences.
    pub fn kappa_gradient(&self, uv: Uv, w: &Vec3) -> Result<(f64, f64)> {
        let c = self.tangent_coords(uv, w)?;
        let plus = self.principal_frame(uv + FD_STEP * c)?;
        let minus = self.principal_frame(uv - FD_STEP * c)?;
        let h2 = 2.0 * FD_STEP;
        Ok((
            (plus.kappa1 - minus.kappa1) / h2,
            (plus.kappa2 - minus.kappa2) / h2,
        ))
    }

    /// Operator norm of `∇_w S` for a unit tangent `w`.
    pub fn shape_derivative_norm(&self, uv: Uv, w: &Vec3) -> Result<f64> {
        let local = self.local(uv)?;
        let c = local.ginv * Vector2::new(local.jet.du.dot(w), local.jet.dv.dot(w));
        let plus = self.shape_operator(uv + FD_STEP * c)?.ambient();
        let minus = self.shape_operator(uv - FD_STEP * c)?.ambient();
        let d = (plus - minus) / (2.0 * FD_STEP);
        let proj = Matrix3::identity() - local.n * local.n.transpose();
        let m = proj * d * proj;
        let sym = 0.5 * (m + m.transpose());
        let eig = SymmetricEigen::new(sym);
        Ok(eig.eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
    }

    /// Cell-centred sample grid over the parameter domain, `density` points per axis.
    pub fn sample_grid(&self, density: usize) -> Vec<Uv> {
        let d = self.domain;
        let mut out = Vec::with_capacity(density * density);
        for j in 0..density {
            let v = d.v.0 + d.width_v() * (j as f64 + 0.5) / density as f64;
            for i in 0..density {
                let u = d.u.0 + d.width_u() * (i as f64 + 0.5) / density as f64;
                out.push(Uv::new(u, v));
            }
        }
        out
    }

    /// Grid estimate of `K = max ‖S‖` and `K' = max ‖∇_w S‖` with a 1.05 safety factor.
    pub fn estimate_bounds(&self, density: usize) -> Result<SurfaceBounds> {
        if density < 32 {
            return Err(Error::InvalidArgument(format!(
                "bounds grid density must be at least 32, got {density}"
            )));
        }
        const DIRECTIONS: usize = 8;
        let grid = self.sample_grid(density);
        let (k, k_prime) = grid
            .par_iter()
            .map(|&uv| -> Result<(f64, f64)> {
                let shape = self.shape_operator(uv)?;
                let frame = self.principal_frame(uv)?;
                let k = frame.kappa1.abs().max(frame.kappa2.abs());
                let mut kp = 0.0_f64;
                for i in 0..DIRECTIONS {
                    let a = std::f64::consts::PI * i as f64 / DIRECTIONS as f64;
                    let w = a.cos() * shape.t1 + a.sin() * shape.t2;
                    kp = kp.max(self.shape_derivative_norm(uv, &w)?);
                }
                Ok((k, kp))
            })
            .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
        Ok(SurfaceBounds {
            k: k * BOUNDS_SAFETY_FACTOR,
            k_prime: k_prime * BOUNDS_SAFETY_FACTOR,
            density,
        })
    }

    /// Length of the parameter segment `from → to` measured on the surface.
    pub fn segment_length(&self, from: Uv, to: Uv) -> f64 {
        let delta = to - from;
        let speed = |t: f64| {
            let j = self.jet(from + t * delta);
            (j.du * delta.x + j.dv * delta.y).norm()
        };
        adaptive_simpson(&speed, 0.0, 1.0, 1e-14)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sphere_is_totally_umbilic() {
        let chart = SurfaceChart::sphere(2.0);
        let p = chart.eval_point(Uv::new(0.3, 0.4)).unwrap();
        assert_abs_diff_eq!(p.kappa1(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.kappa2(), 0.5, epsilon = 1e-12);
        assert!(p.umbilic());
        assert!(p.geodesic.is_none());
    }

    #[test]
    fn cylinder_curvatures_and_frame() {
        let chart = SurfaceChart::cylinder(1.0, 1.0);
        let uv = Uv::new(0.0, 0.5);
        let f = chart.principal_frame(uv).unwrap();
        assert_abs_diff_eq!(f.kappa1, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.kappa2, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.v1.z.abs(), 1.0, epsilon = 1e-14);
        // normal points toward the axis
        assert_abs_diff_eq!(f.n.x, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn ellipsoid_pole_curvatures() {
        // pole (0, 0, c) sits at u = π/2, v = 0
        let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
        let uv = Uv::new(FRAC_PI_2, 0.0);
        let p = chart.eval_point(uv).unwrap();
        assert_abs_diff_eq!(p.position, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(p.kappa1(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.kappa2(), 1.0 / 2.25, epsilon = 1e-12);
    }

    #[test]
    fn ellipsoid_pole_matches_finite_difference_hessian() {
        // Oracle: the height over the tangent plane at the pole is z = c√(1 − x²/a² − y²/b²);
        // its Hessian at the origin, by central differences, gives the principal curvatures.
        let (a, b, c) = (2.0_f64, 1.5_f64, 1.0_f64);
        let depth = |x: f64, y: f64| c - c * (1.0 - x * x / (a * a) - y * y / (b * b)).sqrt();
        let h = 1e-4;
        let dxx = (depth(h, 0.0) - 2.0 * depth(0.0, 0.0) + depth(-h, 0.0)) / (h * h);
        let dyy = (depth(0.0, h) - 2.0 * depth(0.0, 0.0) + depth(0.0, -h)) / (h * h);
        let f = SurfaceChart::triaxial_ellipsoid(a, b, c)
            .principal_frame(Uv::new(FRAC_PI_2, 0.0))
            .unwrap();
        assert_abs_diff_eq!(f.kappa1, dxx, epsilon = 1e-6);
        assert_abs_diff_eq!(f.kappa2, dyy, epsilon = 1e-6);
    }

    #[test]
    fn osculating_height_examples() {
        let mut p = SurfaceChart::plane(1.0).eval_point(Uv::zeros()).unwrap();
        assert_eq!(osculating_height(&p, 0.3, -2.0), 0.0);
        p.frame.kappa1 = 1.0;
        p.frame.kappa2 = 2.0;
        assert_abs_diff_eq!(osculating_height(&p, 1.0, 1.0), 1.5, epsilon = 1e-15);
        let s = SurfaceChart::sphere(2.0).eval_point(Uv::new(0.1, 0.2)).unwrap();
        assert_abs_diff_eq!(osculating_height(&s, 0.1, 0.0), 0.0025, epsilon = 1e-15);
    }

    #[test]
    fn bounds_for_constant_curvature_charts() {
        let b = SurfaceChart::sphere(1.0).estimate_bounds(32).unwrap();
        assert_abs_diff_eq!(b.k, 1.05, epsilon = 1e-9);
        assert!(b.k_prime < 1e-6);
        let b = SurfaceChart::cylinder(0.5, 1.0).estimate_bounds(32).unwrap();
        assert_abs_diff_eq!(b.k, 2.1, epsilon = 1e-9);
        assert!(SurfaceChart::plane(1.0).estimate_bounds(8).is_err());
    }

    #[test]
    fn torus_bound_matches_grid_maximum() {
        // Oracle: maximize the closed-form torus curvatures 1/r and cos t/(R + r cos t)
        // over the same cell-centred tube-angle samples.
        let (big, small) = (2.0_f64, 0.5_f64);
        let density = 64;
        let mut k_max = 0.0_f64;
        for j in 0..density {
            let t = TAU * (j as f64 + 0.5) / density as f64;
            let parallel = t.cos() / (big + small * t.cos());
            k_max = k_max.max((1.0 / small).max(parallel.abs()));
        }
        let b = SurfaceChart::torus(big, small).estimate_bounds(density).unwrap();
        assert_abs_diff_eq!(b.k, k_max * 1.05, epsilon = 1e-9);
        assert_abs_diff_eq!(b.k, 2.1, epsilon = 1e-9);
    }

    #[test]
    fn direction_field_sign_continuity() {
        let chart = SurfaceChart::cylinder(1.0, 1.0);
        let uv = Uv::new(0.4, 0.5);
        let up = chart
            .principal_direction_field(uv, Family::One, Some(&Vec3::z()))
            .unwrap();
        assert_abs_diff_eq!(up, Vec3::z(), epsilon = 1e-14);
        let down = chart
            .principal_direction_field(uv, Family::One, Some(&-Vec3::z()))
            .unwrap();
        assert_abs_diff_eq!(down, -Vec3::z(), epsilon = 1e-14);
    }

    #[test]
    fn direction_field_without_previous_is_min_eigenvector() {
        let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
        let uv = Uv::new(0.7, 0.3);
        let d = chart.principal_direction_field(uv, Family::One, None).unwrap();
        let again = chart.principal_direction_field(uv, Family::One, None).unwrap();
        assert_eq!(d, again);
        // eigen-decomposition oracle on the ambient shape operator
        let s = chart.shape_operator(uv).unwrap();
        let eig = SymmetricEigen::new(s.ambient());
        let f = chart.principal_frame(uv).unwrap();
        let mut best = None;
        for i in 0..3 {
            let vec: Vec3 = eig.eigenvectors.column(i).into();
            if vec.dot(&s.n).abs() < 0.5 && (eig.eigenvalues[i] - f.kappa1).abs() < 1e-10 {
                best = Some(vec);
            }
        }
        let oracle = best.expect("eigenvector for kappa1");
        assert_abs_diff_eq!(d.dot(&oracle).abs(), 1.0, epsilon = 1e-10);
        assert!(d.dot(&chart.jet(uv).du) > 0.0);
    }

    #[test]
    fn umbilic_direction_needs_previous() {
        let chart = SurfaceChart::sphere(1.0);
        assert!(matches!(
            chart.principal_direction_field(Uv::new(0.1, 0.1), Family::One, None),
            Err(Error::UmbilicAmbiguity { .. })
        ));
        assert!(chart
            .principal_direction_field(Uv::new(0.1, 0.1), Family::One, Some(&Vec3::z()))
            .is_ok());
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        // the sphere's parameter pole
        let chart = SurfaceChart::sphere(1.0);
        assert!(matches!(
            chart.principal_frame(Uv::new(0.0, FRAC_PI_2)),
            Err(Error::Immersion { .. })
        ));
    }

    #[test]
    fn torus_parallel_geodesic_curvature() {
        // parallel at tube angle t: circle of radius ρ = R + r cos t, geodesic curvature
        // ±sin t / ρ (oracle: curvature 1/ρ projected on the in-surface conormal).
        let (big, small) = (2.0, 0.5);
        let chart = SurfaceChart::torus(big, small);
        let t = std::f64::consts::FRAC_PI_3;
        let p = chart.eval_point(Uv::new(0.2, t)).unwrap();
        let (g1, g2) = p.geodesic.unwrap();
        let rho = big + small * t.cos();
        assert_abs_diff_eq!(g1.abs(), t.sin() / rho, epsilon = 1e-7);
        // meridians are geodesics
        assert_abs_diff_eq!(g2, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn segment_length_of_parallel() {
        let chart = SurfaceChart::cylinder(1.0, 1.0);
        let l = chart.segment_length(Uv::new(0.0, 0.3), Uv::new(TAU / 36.0, 0.3));
        assert_abs_diff_eq!(l, TAU / 36.0, epsilon = 1e-13);
    }
}
