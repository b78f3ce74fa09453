//! Per-vertex checks of the quantitative bounds for discrete curvatures.
//!
//! Every inequality is a [`Check`] that passes when `lhs ≤ rhs·(1 + 1e-9)`.
//! Lower bounds are stored with the sides swapped. Estimates whose constants
//! are not explicit are recorded as ratios, and their boundedness across a
//! refinement sequence is judged by [`ratios_bounded`].

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::curvature::{select_area_maximizing, EdgeCurvature, Selection};
use crate::error::Result;
use crate::star::{StarMetrics, VertexStar};
use crate::surface::{osculating_height, Family, SurfaceBounds, SurfaceChart, Uv, Vec3};

/// Relative slack on every inequality.
pub const SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    /// `lhs ≤ rhs`.
    pub fn le(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            pass: lhs <= rhs + SLACK * rhs.abs(),
        }
    }

    /// `value ≥ bound`, stored as `bound ≤ value`.
    pub fn ge(name: &'static str, value: f64, bound: f64) -> Self {
        Self::le(name, bound, value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkipReason {
    Boundary,
    SamplingViolated,
    UmbilicProximity,
    NotValenceFour,
}

impl SkipReason {
    pub fn name(self) -> &'static str {
        match self {
            SkipReason::Boundary => "boundary",
            SkipReason::SamplingViolated => "sampling-violated",
            SkipReason::UmbilicProximity => "umbilic-proximity",
            SkipReason::NotValenceFour => "not-valence-four",
        }
    }
}

/// Inputs shared by the checks at one vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckInputs {
    pub epsilon: f64,
    pub rho: f64,
    pub k: f64,
    pub k_prime: f64,
    /// Largest angle between the vertex normal and a fan-triangle normal.
    pub phi: f64,
    /// `1/(2ρ²)`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub vertex: usize,
    pub inputs: CheckInputs,
    pub checks: Vec<Check>,
    pub skipped: Vec<(&'static str, SkipReason)>,
    pub ratios: Vec<(&'static str, f64)>,
}

impl BoundReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

pub const AREA_CHECKS: [&str; 5] = [
    "area-upper",
    "area-lower-max",
    "area-three-edges",
    "chosen-area-lower",
    "chosen-area-upper",
];
pub const DELAUNAY_CHECKS: [&str; 2] = ["delaunay-count", "delaunay-defect"];
pub const NORMAL_CHECKS: [&str; 3] = ["normal-angle", "normal-angle-cap", "projection-injective"];
pub const GAUSS_CHECK: &str = "gauss-bound";
pub const HEIGHT_CHECK: &str = "height";
pub const TANGENTIAL_CHECK: &str = "tangential-component";
pub const DEVIATION_CHECK: &str = "tangent-deviation";

pub const PARABOLOID_RATIO: &str = "paraboloid-remainder";
pub const COROLLARY_RATIO: &str = "corollary-remainder";
pub const EDGE_RATIO: &str = "edge-estimate";
pub const EDGE_CUBIC_RATIO: &str = "edge-estimate-cubic";

/// Every check name, in report order.
pub fn all_check_names() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = AREA_CHECKS.to_vec();
    v.extend(DELAUNAY_CHECKS);
    v.extend(NORMAL_CHECKS);
    v.extend([GAUSS_CHECK, HEIGHT_CHECK, TANGENTIAL_CHECK, DEVIATION_CHECK]);
    v
}

/// Largest angle between `n` and the unit normals of the fan triangles.
pub fn normal_angle(star: &VertexStar) -> f64 {
    star.fan_pairs()
        .map(|i| {
            let m = star.edges[i].vector.cross(&star.next(i).vector).normalize();
            m.cross(&star.frame.n).norm().atan2(m.dot(&star.frame.n))
        })
        .fold(0.0, f64::max)
}

pub fn inputs(star: &VertexStar, metrics: &StarMetrics, bounds: &SurfaceBounds) -> CheckInputs {
    CheckInputs {
        epsilon: metrics.epsilon,
        rho: metrics.rho,
        k: bounds.k,
        k_prime: bounds.k_prime,
        phi: normal_angle(star),
        delta: 0.5 / (metrics.rho * metrics.rho),
    }
}

/// Upper and lower bounds on circumcentric areas.
pub fn check_area_bounds(
    star: &VertexStar,
    curvatures: &[EdgeCurvature],
    inp: &CheckInputs,
) -> Vec<Check> {
    let (eps2, rho) = (inp.epsilon * inp.epsilon, inp.rho);
    let max_area = curvatures.iter().map(|c| c.area).fold(f64::MIN, f64::max);
    let mut checks = vec![
        Check::le(AREA_CHECKS[0], max_area, rho.powi(4) * eps2),
        Check::ge(AREA_CHECKS[1], max_area, eps2 / (4.0 * rho.powi(3))),
    ];
    if star.valence() == 4 {
        let lower = eps2 / (16.0 * rho.powi(4));
        let count = curvatures.iter().filter(|c| c.area >= lower * (1.0 - SLACK)).count();
        checks.push(Check::ge(AREA_CHECKS[2], count as f64, 3.0));
    }
    let chosen: Vec<f64> = match select_area_maximizing(curvatures, star.is_umbilic()) {
        Selection::Umbilic(i) => vec![curvatures[i].area],
        Selection::Families { family1, family2 } => [family1, family2]
            .into_iter()
            .flatten()
            .map(|i| curvatures[i].area)
            .collect(),
    };
    let c = 16.0 * rho.powi(4);
    let lo = chosen.iter().copied().fold(f64::MAX, f64::min);
    let hi = chosen.iter().copied().fold(f64::MIN, f64::max);
    checks.push(Check::ge(AREA_CHECKS[3], lo, eps2 / c));
    checks.push(Check::le(AREA_CHECKS[4], hi, c * eps2));
    checks
}

/// δ-Delaunay classification with `δ = 1/(2ρ²)` on valence-four stars.
pub fn check_delaunay(curvatures: &[EdgeCurvature], inp: &CheckInputs, angle_defect: f64) -> Vec<Check> {
    let d = inp.delta;
    let count = curvatures
        .iter()
        .filter(|c| c.alpha >= d && c.beta >= d && c.alpha + c.beta <= PI - d)
        .count();
    vec![
        Check::ge(DELAUNAY_CHECKS[0], count as f64, 3.0),
        Check::le(DELAUNAY_CHECKS[1], angle_defect, 2.0 * d),
    ]
}

/// Normal-angle bounds and injectivity of the projection to the tangent plane.
pub fn check_normal_angle(star: &VertexStar, inp: &CheckInputs) -> Vec<Check> {
    let s = inp.phi.sin();
    let n = star.frame.n;
    let project = |v: &Vec3| v - v.dot(&n) * n;
    let mut folds = 0usize;
    let mut turn = 0.0;
    for i in star.fan_pairs() {
        let (a, b) = (project(&star.edges[i].vector), project(&star.next(i).vector));
        let c = a.cross(&b).dot(&n);
        if c <= 0.0 {
            folds += 1;
        }
        turn += c.atan2(a.dot(&b));
    }
    if !star.boundary && (turn - TAU).abs() > 1e-9 {
        folds += 1;
    }
    vec![
        Check::le(
            NORMAL_CHECKS[0],
            s,
            (4.0 * inp.rho + 2.0) * inp.k * inp.epsilon,
        ),
        Check::le(NORMAL_CHECKS[1], s, 0.375),
        Check::le(NORMAL_CHECKS[2], folds as f64, 0.0),
    ]
}

/// `K_p ≤ 2π(1 − cos φ)`.
pub fn check_gauss_bound(angle_defect: f64, phi: f64) -> Check {
    Check::le(GAUSS_CHECK, angle_defect, TAU * (1.0 - phi.cos()))
}

/// `|e_n| ≤ K‖e‖²`, plus the paraboloid and corollary remainders over `ε³`.
pub fn check_height_and_paraboloid(
    star: &VertexStar,
    inp: &CheckInputs,
    point: &crate::surface::SurfacePointData,
) -> (Check, Vec<(&'static str, f64)>) {
    let eps3 = inp.epsilon.powi(3);
    let mut worst = 0.0_f64;
    let mut para = 0.0_f64;
    let mut coro = 0.0_f64;
    let (k1, dk) = (point.kappa1(), point.delta_kappa());
    for fe in star.framed_edges() {
        let e2 = fe.x * fe.x + fe.y * fe.y + fe.n * fe.n;
        worst = worst.max(fe.n.abs() / e2);
        para = para.max((fe.n - osculating_height(point, fe.x, fe.y)).abs() / eps3);
        coro = coro.max((fe.n - 0.5 * k1 * e2 - 0.5 * dk * fe.y * fe.y).abs() / eps3);
    }
    (
        Check::le(HEIGHT_CHECK, worst, inp.k),
        vec![(PARABOLOID_RATIO, para), (COROLLARY_RATIO, coro)],
    )
}

/// `‖(k)_t‖ ≤ 10 K² ρ² ε³` for the curvature vector of every hinge.
pub fn check_tangential_component(
    star: &VertexStar,
    curvatures: &[EdgeCurvature],
    inp: &CheckInputs,
) -> Check {
    let n = star.frame.n;
    let worst = curvatures
        .iter()
        .map(|c| {
            let k = c.curvature_vector();
            (k - k.dot(&n) * n).norm()
        })
        .fold(0.0, f64::max);
    Check::le(
        TANGENTIAL_CHECK,
        worst,
        10.0 * inp.k * inp.k * inp.rho * inp.rho * inp.epsilon.powi(3),
    )
}

/// `|δκ · e_d| ≤ (K² + 4K') ε²` for every emanating edge.
pub fn check_tangent_deviation_product(
    star: &VertexStar,
    inp: &CheckInputs,
    delta_kappa: f64,
) -> Check {
    let worst = star
        .framed_edges()
        .iter()
        .map(|fe| (delta_kappa * fe.deviation).abs())
        .fold(0.0, f64::max);
    Check::le(
        DEVIATION_CHECK,
        worst,
        (inp.k * inp.k + 4.0 * inp.k_prime) * inp.epsilon * inp.epsilon,
    )
}

/// Ratios `|k_e − 2A_e κ⊥| / (|δκ|(e_d + f_d + g_d) ε + ε³)` and `|k_e − 2A_e κ⊥| / ε³`,
/// where `κ⊥` is the principal curvature across the edge (κ₂ for family 1).
pub fn edge_estimate_ratios(
    star: &VertexStar,
    curvatures: &[EdgeCurvature],
    inp: &CheckInputs,
    point: &crate::surface::SurfacePointData,
) -> Vec<(&'static str, f64)> {
    let framed = star.framed_edges();
    let k = framed.len();
    let eps = inp.epsilon;
    let dk = point.delta_kappa().abs();
    let mut general = 0.0_f64;
    let mut cubic = 0.0_f64;
    for (i, c) in curvatures.iter().enumerate() {
        let across = match c.family {
            Family::One => point.kappa2(),
            Family::Two => point.kappa1(),
        };
        let residual = (c.k_sin - 2.0 * c.area * across).abs();
        let dev = framed[i].deviation + framed[(i + 1) % k].deviation + framed[(i + k - 1) % k].deviation;
        general = general.max(residual / (dk * dev * eps + eps.powi(3)));
        cubic = cubic.max(residual / eps.powi(3));
    }
    vec![(EDGE_RATIO, general), (EDGE_CUBIC_RATIO, cubic)]
}

/// Runs every applicable check at an interior vertex.
pub fn evaluate_vertex(
    star: &VertexStar,
    curvatures: &[EdgeCurvature],
    metrics: &StarMetrics,
    bounds: &SurfaceBounds,
    point: &crate::surface::SurfacePointData,
) -> BoundReport {
    let inp = inputs(star, metrics, bounds);
    let mut report = BoundReport {
        vertex: star.vertex,
        inputs: inp,
        checks: Vec::new(),
        skipped: Vec::new(),
        ratios: Vec::new(),
    };
    let gate = if star.boundary {
        Some(SkipReason::Boundary)
    } else if !metrics.sampling_ok {
        Some(SkipReason::SamplingViolated)
    } else {
        None
    };
    if let Some(reason) = gate {
        report.skipped = all_check_names().into_iter().map(|n| (n, reason)).collect();
        return report;
    }
    report.checks.extend(check_area_bounds(star, curvatures, &inp));
    if star.valence() == 4 {
        report
            .checks
            .extend(check_delaunay(curvatures, &inp, metrics.angle_defect));
    } else {
        report.skipped.push((AREA_CHECKS[2], SkipReason::NotValenceFour));
        report
            .skipped
            .extend(DELAUNAY_CHECKS.map(|n| (n, SkipReason::NotValenceFour)));
    }
    report.checks.extend(check_normal_angle(star, &inp));
    report
        .checks
        .push(check_gauss_bound(metrics.angle_defect, inp.phi));
    let (height, ratios) = check_height_and_paraboloid(star, &inp, point);
    report.checks.push(height);
    report.ratios.extend(ratios);
    report
        .checks
        .push(check_tangential_component(star, curvatures, &inp));
    if star.is_umbilic() {
        report
            .skipped
            .push((DEVIATION_CHECK, SkipReason::UmbilicProximity));
    } else {
        report.checks.push(check_tangent_deviation_product(
            star,
            &inp,
            point.delta_kappa(),
        ));
        report
            .ratios
            .extend(edge_estimate_ratios(star, curvatures, &inp, point));
    }
    report
}

/// Outcome of the geodesic-curvature identity at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicCheck {
    pub uv: [f64; 2],
    pub geodesic: f64,
    pub quotient: f64,
    pub relative_error: Check,
    pub bound: Check,
}

/// Compares `κᵍ₁` with `∇_{v₂}κ₁ / (κ₁ − κ₂)`; `None` close to umbilics.
pub fn check_geodesic_identity(
    chart: &SurfaceChart,
    uv: Uv,
    bounds: &SurfaceBounds,
) -> Result<Option<GeodesicCheck>> {
    let point = chart.eval_point(uv)?;
    let dk = point.kappa1() - point.kappa2();
    let geodesic = match point.geodesic {
        Some((g1, _)) if dk.abs() > 1e-6 * bounds.k => g1,
        _ => return Ok(None),
    };
    let (grad, _) = chart.kappa_gradient(uv, &point.frame.v2)?;
    let quotient = grad / dk;
    let rel = (geodesic - quotient).abs() / geodesic.abs().max(1e-6);
    Ok(Some(GeodesicCheck {
        uv: [uv.x, uv.y],
        geodesic,
        quotient,
        relative_error: Check::le("geodesic-identity", rel, 1e-3),
        bound: Check::le(
            "geodesic-bound",
            geodesic.abs(),
            bounds.k_prime / dk.abs() * (1.0 + 1e-3),
        ),
    }))
}

/// Pass/fail/skip counts per check and worst ratios; merging is order independent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub counts: BTreeMap<String, Tally>,
    pub worst_ratios: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
}

impl Summary {
    pub fn add(&mut self, report: &BoundReport) {
        for c in &report.checks {
            let t = self.counts.entry(c.name.to_string()).or_default();
            if c.pass {
                t.pass += 1;
            } else {
                t.fail += 1;
            }
        }
        for (name, _) in &report.skipped {
            self.counts.entry(name.to_string()).or_default().skip += 1;
        }
        for (name, r) in &report.ratios {
            let w = self.worst_ratios.entry(name.to_string()).or_insert(0.0);
            *w = w.max(*r);
        }
    }

    pub fn merge(mut self, other: Summary) -> Summary {
        for (k, t) in other.counts {
            let e = self.counts.entry(k).or_default();
            e.pass += t.pass;
            e.fail += t.fail;
            e.skip += t.skip;
        }
        for (k, r) in other.worst_ratios {
            let w = self.worst_ratios.entry(k).or_insert(0.0);
            *w = w.max(r);
        }
        self
    }

    pub fn violations(&self) -> usize {
        self.counts.values().map(|t| t.fail).sum()
    }

    pub fn violation_counts(&self) -> BTreeMap<String, usize> {
        all_check_names()
            .into_iter()
            .map(|n| (n.to_string(), self.counts.get(n).map_or(0, |t| t.fail)))
            .collect()
    }

    /// Plain-text table of counts and worst ratios.
    pub fn to_text(&self) -> String {
        let mut s = String::from("check pass fail skip\n");
        for (k, t) in &self.counts {
            s.push_str(&format!("{k} {} {} {}\n", t.pass, t.fail, t.skip));
        }
        s.push_str("ratio worst\n");
        for (k, r) in &self.worst_ratios {
            s.push_str(&format!("{k} {r:e}\n"));
        }
        s
    }
}

/// Growth factor allowed between consecutive maxima of a ratio sequence.
pub const RATIO_GROWTH: f64 = 1.5;

/// A ratio sequence is bounded when every level stays within `1.5×` the
/// previous level or within `1.5×` the coarsest level.
pub fn ratios_bounded(maxima: &[f64]) -> bool {
    let Some(&first) = maxima.first() else {
        return true;
    };
    let cap = RATIO_GROWTH * first;
    maxima
        .windows(2)
        .all(|w| w[1] <= RATIO_GROWTH * w[0] || w[1] <= cap)
}
