//! Refinement sweeps, global error measurement and rate fitting.
//!
//! A level builds a net, evaluates the discrete curvatures and bound checks at
//! every interior vertex, and measures the sup error of the nearest-vertex
//! extension of the estimates over a jittered dense parameter sample.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{principal_estimates_from, star_curvatures, Variant, VertexCurvature};
use crate::error::{Error, Result};
use crate::netgen::{
    conformal_rows, parameter_grid_net, revolution_net, revolution_net_rows, traced_net,
    umbilic_net, CurvatureLineNet, SeedGrid, TraceConfig, UmbilicPattern,
};
use crate::star::{build_star, StarMetrics};
use crate::surface::{MongeCubic, SurfaceBounds, SurfaceChart, SurfacePointData, Uv, Vec3};
use crate::verify::{evaluate_vertex, ratios_bounded, BoundReport, Summary};

/// Environment variable that overrides the output directory of an experiment.
pub const OUTPUT_ENV: &str = "CURVENET_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetStrategy {
    /// Meridians and uniformly spaced parallels; level = number of meridians.
    Revolution,
    /// Meridians and parallels spaced for square cells; level = number of meridians.
    Conformal,
    /// Parameter-line grid on a plane; level = lines per axis.
    Grid,
    /// Traced principal lines; level = seed lines on each side of the origin.
    Traced,
    /// Local net around a Monge-patch umbilic; level = number of rings.
    Umbilic,
}

fn default_dense_factor() -> usize {
    4
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_bounds_density() -> usize {
    64
}

fn default_sectors() -> usize {
    6
}

fn default_trace_extent() -> f64 {
    0.4
}

/// One experiment, read from a flat TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// sphere | plane | cylinder | torus | spheroid | triaxial-ellipsoid | monge
    pub surface: String,
    pub radius: Option<f64>,
    pub height: Option<f64>,
    pub half_width: Option<f64>,
    pub major_radius: Option<f64>,
    pub minor_radius: Option<f64>,
    pub equatorial_radius: Option<f64>,
    pub polar_radius: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub kappa: Option<f64>,
    pub c30: Option<f64>,
    pub c21: Option<f64>,
    pub c12: Option<f64>,
    pub c03: Option<f64>,
    /// Half-width of the latitude band on spheres and spheroids.
    pub band: Option<f64>,
    pub net: NetStrategy,
    pub pattern: Option<UmbilicPattern>,
    #[serde(default = "default_sectors")]
    pub sectors: usize,
    pub origin_u: Option<f64>,
    pub origin_v: Option<f64>,
    /// Arc-length half-extent of traced nets.
    #[serde(default = "default_trace_extent")]
    pub trace_extent: f64,
    pub levels: Vec<usize>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_dense_factor")]
    pub dense_factor: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_bounds_density")]
    pub bounds_density: usize,
}

fn need(value: Option<f64>, key: &str, surface: &str) -> Result<f64> {
    match value {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(Error::Config(format!("`{key}` must be positive, got {v}"))),
        None => Err(Error::Config(format!("surface `{surface}` needs `{key}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(Error::Config("at least two refinement levels are required".into()));
        }
        if self.dense_factor < 4 {
            return Err(Error::Config("`dense_factor` must be at least 4".into()));
        }
        if self.net == NetStrategy::Umbilic && self.pattern.is_none() {
            return Err(Error::Config("umbilic nets need `pattern`".into()));
        }
        self.chart()?;
        Ok(())
    }

    pub fn chart(&self) -> Result<SurfaceChart> {
        let s = self.surface.as_str();
        let chart = match s {
            "sphere" => SurfaceChart::sphere(need(self.radius, "radius", s)?),
            "plane" => SurfaceChart::plane(self.half_width.unwrap_or(1.0)),
            "cylinder" => SurfaceChart::cylinder(
                need(self.radius, "radius", s)?,
                self.height.unwrap_or(1.0),
            ),
            "torus" => SurfaceChart::torus(
                need(self.major_radius, "major_radius", s)?,
                need(self.minor_radius, "minor_radius", s)?,
            ),
            "spheroid" => SurfaceChart::spheroid(
                need(self.equatorial_radius, "equatorial_radius", s)?,
                need(self.polar_radius, "polar_radius", s)?,
            ),
            "triaxial-ellipsoid" => SurfaceChart::triaxial_ellipsoid(
                need(self.a, "a", s)?,
                need(self.b, "b", s)?,
                need(self.c, "c", s)?,
            ),
            "monge" => match self.pattern {
                Some(p) if self.kappa.is_none() => p.chart(),
                _ => SurfaceChart::monge(
                    MongeCubic {
                        kappa: self.kappa.unwrap_or(1.0),
                        c30: self.c30.unwrap_or(0.0),
                        c21: self.c21.unwrap_or(0.0),
                        c12: self.c12.unwrap_or(0.0),
                        c03: self.c03.unwrap_or(0.0),
                    },
                    self.half_width.unwrap_or(crate::netgen::UMBILIC_PATCH_HALF_WIDTH),
                ),
            },
            other => return Err(Error::Config(format!("unknown surface `{other}`"))),
        };
        Ok(match self.band {
            Some(b) if matches!(s, "sphere" | "spheroid") => chart.with_band(b),
            _ => chart,
        })
    }

    /// Output directory: the environment override wins over the config entry.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out.clone())
    }

    pub fn build_net(&self, chart: &SurfaceChart, level: usize) -> Result<CurvatureLineNet> {
        match self.net {
            NetStrategy::Revolution => {
                let d = chart.domain;
                let mut rows = (level as f64 * d.width_v() / d.width_u()).round() as usize;
                if !d.periodic_v {
                    rows += 1;
                }
                revolution_net(chart, level, rows.max(2))
            }
            NetStrategy::Conformal => {
                let rows = conformal_rows(chart, level)?;
                revolution_net_rows(chart, level, &rows)
            }
            NetStrategy::Grid => {
                let d = chart.domain;
                let axis = |r: (f64, f64)| -> Vec<f64> {
                    (0..level)
                        .map(|i| r.0 + (r.1 - r.0) * i as f64 / (level - 1) as f64)
                        .collect()
                };
                parameter_grid_net(chart, &axis(d.u), &axis(d.v))
            }
            NetStrategy::Traced => {
                let origin = Uv::new(self.origin_u.unwrap_or(0.3), self.origin_v.unwrap_or(0.2));
                let spacing = self.trace_extent / level as f64;
                let cfg = TraceConfig {
                    step: (spacing / 16.0).min(2e-3),
                    sample_spacing: spacing / 4.0,
                    ..TraceConfig::default()
                };
                traced_net(chart, &SeedGrid::uniform(origin, spacing, level), &cfg)
            }
            NetStrategy::Umbilic => {
                let pattern = self
                    .pattern
                    .ok_or_else(|| Error::Config("umbilic nets need `pattern`".into()))?;
                umbilic_net(chart, pattern, level, self.sectors)
            }
        }
    }
}

/// Discrete and exact curvature data at one interior vertex.
#[derive(Clone, Debug)]
pub struct VertexResult {
    pub vertex: usize,
    pub uv: Uv,
    pub position: Vec3,
    pub point: SurfacePointData,
    pub metrics: StarMetrics,
    /// Estimates in the order of [`Variant::ALL`]; `None` when the estimate failed.
    pub estimates: [Option<VertexCurvature>; 3],
    pub failure: Option<String>,
    pub report: BoundReport,
}

impl VertexResult {
    pub fn estimate(&self, variant: Variant) -> Option<&VertexCurvature> {
        self.estimates[variant_slot(variant)].as_ref()
    }

    pub fn has_all_estimates(&self) -> bool {
        self.estimates.iter().all(Option::is_some)
    }

    /// `(|k₁ − κ₁|, |k₂ − κ₂|)` at the vertex.
    pub fn errors(&self, variant: Variant) -> Option<(f64, f64)> {
        self.estimate(variant).map(|e| {
            (
                (e.k1 - self.point.kappa1()).abs(),
                (e.k2 - self.point.kappa2()).abs(),
            )
        })
    }
}

fn variant_slot(variant: Variant) -> usize {
    Variant::ALL.iter().position(|v| *v == variant).unwrap()
}

/// Evaluates stars, estimates and checks at all interior vertices.
pub fn analyze_net(net: &CurvatureLineNet, bounds: &SurfaceBounds) -> (Vec<VertexResult>, usize) {
    let results: Vec<Option<VertexResult>> = net
        .interior_vertices()
        .par_iter()
        .map(|&v| {
            let star = build_star(net, v).ok()?;
            let metrics = star.metrics(bounds);
            let vertex = &net.vertices[v];
            let curvatures = star_curvatures(&star).ok()?;
            let mut failure = None;
            let estimates = Variant::ALL.map(|variant| {
                match principal_estimates_from(&star, &curvatures, variant) {
                    Ok(e) => Some(e),
                    Err(err) => {
                        failure = Some(err.to_string());
                        None
                    }
                }
            });
            let report = evaluate_vertex(&star, &curvatures, &metrics, bounds, &vertex.point);
            Some(VertexResult {
                vertex: v,
                uv: vertex.uv,
                position: vertex.position,
                point: vertex.point,
                metrics,
                estimates,
                failure,
                report,
            })
        })
        .collect();
    let degenerate = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), degenerate)
}

/// Uniform hash grid over vertex positions for nearest-vertex queries.
struct SpatialHash {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Vec3>,
}

impl SpatialHash {
    fn new(points: Vec<Vec3>, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            cell,
            buckets,
            points,
        }
    }

    fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn brute_nearest(&self, q: &Vec3) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm()))
            .fold((0, f64::MAX), |best, c| if c.1 < best.1 { c } else { best })
    }

    /// Nearest point index and distance, searching at most `max_shell` cell shells.
    fn nearest(&self, q: &Vec3, max_shell: i64) -> Option<(usize, f64)> {
        let (cx, cy, cz) = Self::key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        for r in 0..=max_shell {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        if let Some(list) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in list {
                                let d = (self.points[i] - q).norm();
                                if best.is_none_or(|(j, b)| d < b || (d == b && i < j)) {
                                    best = Some((i, d));
                                }
                            }
                        }
                    }
                }
            }
            if let Some((_, d)) = best {
                if d <= r as f64 * self.cell {
                    break;
                }
            }
        }
        best
    }
}

/// Sup errors of the nearest-vertex extension, per variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupErrors {
    pub k1: [f64; 3],
    pub k2: [f64; 3],
    pub samples: usize,
    /// Largest ambient distance from a sample to its nearest vertex.
    pub max_distance: f64,
}

/// Stratified jittered samples, `factor²` per quad cell whose corners all carry estimates.
/// Corners are unwrapped across periodic seams before bilinear interpolation.
pub fn dense_samples(
    chart: &SurfaceChart,
    net: &CurvatureLineNet,
    results: &[VertexResult],
    factor: usize,
    seed: u64,
) -> Vec<Uv> {
    let d = chart.domain;
    let mut usable = vec![false; net.vertices.len()];
    for r in results.iter().filter(|r| r.has_all_estimates()) {
        usable[r.vertex] = true;
    }
    let unwrap = |x: f64, reference: f64, periodic: bool, width: f64| {
        if periodic {
            x - ((x - reference) / width).round() * width
        } else {
            x
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for cell in &net.cells {
        if cell.vertices.len() != 4 || cell.vertices.iter().any(|&v| !usable[v]) {
            continue;
        }
        let p0 = net.vertices[cell.vertices[0]].uv;
        let c: Vec<Uv> = cell
            .vertices
            .iter()
            .map(|&v| {
                let q = net.vertices[v].uv;
                Uv::new(
                    unwrap(q.x, p0.x, d.periodic_u, d.width_u()),
                    unwrap(q.y, p0.y, d.periodic_v, d.width_v()),
                )
            })
            .collect();
        for j in 0..factor {
            for i in 0..factor {
                let s = (i as f64 + rng.gen::<f64>()) / factor as f64;
                let t = (j as f64 + rng.gen::<f64>()) / factor as f64;
                out.push(
                    c[0] * ((1.0 - s) * (1.0 - t))
                        + c[1] * (s * (1.0 - t))
                        + c[2] * (s * t)
                        + c[3] * ((1.0 - s) * t),
                );
            }
        }
    }
    out
}

pub fn sup_errors(
    chart: &SurfaceChart,
    results: &[VertexResult],
    samples: &[Uv],
    eps_max: f64,
) -> Result<SupErrors> {
    let usable: Vec<&VertexResult> = results.iter().filter(|r| r.has_all_estimates()).collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("no vertex carries estimates".into()));
    }
    let hash = SpatialHash::new(usable.iter().map(|r| r.position).collect(), eps_max);
    let per_sample = samples
        .par_iter()
        .map(|&uv| -> Result<([f64; 3], [f64; 3], f64)> {
            let frame = chart.principal_frame(uv)?;
            let q = chart.position(uv);
            let (i, dist) = hash.nearest(&q, 8).unwrap_or_else(|| hash.brute_nearest(&q));
            let r = usable[i];
            let mut e1 = [0.0; 3];
            let mut e2 = [0.0; 3];
            for (s, variant) in Variant::ALL.iter().enumerate() {
                let est = r.estimate(*variant).unwrap();
                e1[s] = (est.k1 - frame.kappa1).abs();
                e2[s] = (est.k2 - frame.kappa2).abs();
            }
            Ok((e1, e2, dist))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SupErrors {
        samples: samples.len(),
        ..SupErrors::default()
    };
    for (e1, e2, dist) in per_sample {
        for s in 0..3 {
            out.k1[s] = out.k1[s].max(e1[s]);
            out.k2[s] = out.k2[s].max(e2[s]);
        }
        out.max_distance = out.max_distance.max(dist);
    }
    Ok(out)
}

/// One refinement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub vertices: usize,
    pub eps_max: f64,
    pub rho_max: f64,
    pub sampling_fraction: f64,
    pub sup_k1_angle: f64,
    pub sup_k1_sin: f64,
    pub sup_k1_tan: f64,
    pub sup_k2_angle: f64,
    pub sup_k2_sin: f64,
    pub sup_k2_tan: f64,
    /// Largest vertex error `max(|k₁−κ₁|, |k₂−κ₂|)` with the configured variant.
    pub vertex_error: f64,
    /// Largest pairwise difference of the variants at a vertex over `ε²` there.
    pub variant_spread: f64,
    pub coverage_ok: bool,
    pub degenerate_stars: usize,
    pub estimate_failures: usize,
    pub violations: usize,
    pub valid: bool,
    #[serde(skip)]
    pub violation_counts: BTreeMap<String, usize>,
    #[serde(skip)]
    pub worst_ratios: BTreeMap<String, f64>,
    #[serde(skip)]
    pub seconds: f64,
}

impl ConvergenceRecord {
    pub fn sup_k1(&self, variant: Variant) -> f64 {
        [self.sup_k1_angle, self.sup_k1_sin, self.sup_k1_tan][variant_slot(variant)]
    }

    pub fn sup_k2(&self, variant: Variant) -> f64 {
        [self.sup_k2_angle, self.sup_k2_sin, self.sup_k2_tan][variant_slot(variant)]
    }
}

/// Result of one level with the per-vertex data kept for exports.
pub struct LevelOutcome {
    pub record: ConvergenceRecord,
    pub net: CurvatureLineNet,
    pub results: Vec<VertexResult>,
    pub summary: Summary,
}

fn variant_spread(r: &VertexResult) -> f64 {
    let mut worst = 0.0_f64;
    for a in 0..3 {
        for b in a + 1..3 {
            if let (Some(x), Some(y)) = (&r.estimates[a], &r.estimates[b]) {
                worst = worst.max((x.k1 - y.k1).abs()).max((x.k2 - y.k2).abs());
            }
        }
    }
    worst / (r.metrics.epsilon * r.metrics.epsilon)
}

pub fn run_level(
    config: &ExperimentConfig,
    chart: &SurfaceChart,
    bounds: &SurfaceBounds,
    level: usize,
    dense: bool,
) -> Result<LevelOutcome> {
    let start = Instant::now();
    let net = config.build_net(chart, level)?;
    let (results, degenerate) = analyze_net(&net, bounds);
    if results.is_empty() {
        return Err(Error::NetConstruction(format!(
            "level {level} has no interior vertex with a valid star"
        )));
    }
    let mut summary = Summary::default();
    for r in &results {
        summary.add(&r.report);
    }
    let eps_max = results.iter().map(|r| r.metrics.epsilon).fold(0.0, f64::max);
    let rho_max = results.iter().map(|r| r.metrics.rho).fold(0.0, f64::max);
    let sampling = results.iter().filter(|r| r.metrics.sampling_ok).count();
    let failures: Vec<&VertexResult> = results.iter().filter(|r| r.failure.is_some()).collect();
    let sampled_failures = failures.iter().filter(|r| r.metrics.sampling_ok).count();
    let vertex_error = results
        .iter()
        .filter_map(|r| r.errors(config.variant))
        .map(|(a, b)| a.max(b))
        .fold(0.0, f64::max);
    let spread = results
        .iter()
        .filter(|r| r.has_all_estimates())
        .map(variant_spread)
        .fold(0.0, f64::max);
    let sup = if dense {
        let samples = dense_samples(chart, &net, &results, config.dense_factor, config.seed ^ level as u64);
        if samples.is_empty() {
            return Err(Error::NetConstruction(format!(
                "level {level} has no cell with estimates at every corner"
            )));
        }
        sup_errors(chart, &results, &samples, eps_max)?
    } else {
        SupErrors::default()
    };
    let coverage_ok = !dense || sup.max_distance <= eps_max;
    let violations = summary.violations();
    let record = ConvergenceRecord {
        level,
        vertices: results.len(),
        eps_max,
        rho_max,
        sampling_fraction: sampling as f64 / results.len() as f64,
        sup_k1_angle: sup.k1[0],
        sup_k1_sin: sup.k1[1],
        sup_k1_tan: sup.k1[2],
        sup_k2_angle: sup.k2[0],
        sup_k2_sin: sup.k2[1],
        sup_k2_tan: sup.k2[2],
        vertex_error,
        variant_spread: spread,
        coverage_ok,
        degenerate_stars: degenerate,
        estimate_failures: failures.len(),
        violations,
        valid: violations == 0 && sampled_failures == 0 && degenerate == 0 && coverage_ok,
        violation_counts: summary.violation_counts(),
        worst_ratios: summary.worst_ratios.clone(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(LevelOutcome {
        record,
        net,
        results,
        summary,
    })
}

/// Runs every level of the config. Failing levels are logged and skipped.
pub fn run_refinement(config: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let chart = config.chart()?;
    let bounds = chart.estimate_bounds(config.bounds_density)?;
    let mut records = Vec::new();
    for &level in &config.levels {
        match run_level(config, &chart, &bounds, level, true) {
            Ok(outcome) => records.push(outcome.record),
            Err(e) => warn!("level {level} failed: {e}"),
        }
    }
    Ok(records)
}

/// Least-squares fit of `log(error) = slope · log(ε) + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(errors)
        .filter_map(|(&e, &err)| {
            if err > 0.0 && e > 0.0 {
                Some((e.ln(), err.ln()))
            } else {
                if err == 0.0 {
                    warn!("excluding exact zero error at eps = {e} from the rate fit");
                }
                None
            }
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::FitUnavailable(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::FitUnavailable(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        points: pts.len(),
    })
}

/// Rate fit over the valid records for `k₁` or `k₂` and a variant.
pub fn fit_records(records: &[ConvergenceRecord], variant: Variant, second: bool) -> Result<RateFit> {
    let valid: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.valid).collect();
    let eps: Vec<f64> = valid.iter().map(|r| r.eps_max).collect();
    let err: Vec<f64> = valid
        .iter()
        .map(|r| if second { r.sup_k2(variant) } else { r.sup_k1(variant) })
        .collect();
    fit_rate(&eps, &err)
}

/// One level of an umbilic sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmbilicRecord {
    pub rings: usize,
    pub eps_max: f64,
    pub rho_max: f64,
    /// Largest error over the umbilic vertex and the first two rings.
    pub near_error: f64,
    /// Error at the umbilic vertex itself.
    pub umbilic_error: f64,
    pub near_vertices: usize,
    pub estimate_failures: usize,
}

/// Relative decrease of `ρ_max` between levels still counted as non-decreasing.
/// Self-similar umbilic nets have a scale-invariant `ρ_max` that settles from above.
pub const RHO_DRIFT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmbilicOutcome {
    pub pattern: UmbilicPattern,
    pub records: Vec<UmbilicRecord>,
    pub fit: RateFit,
    pub rho_non_decreasing: bool,
}

pub fn umbilic_experiment(
    pattern: UmbilicPattern,
    levels: &[usize],
    sectors: usize,
    variant: Variant,
) -> Result<UmbilicOutcome> {
    let chart = pattern.chart();
    let bounds = chart.estimate_bounds(default_bounds_density())?;
    let center = chart.known_umbilics()[0];
    let mut records = Vec::new();
    for &rings in levels {
        let net = umbilic_net(&chart, pattern, rings, sectors)?;
        let (results, _) = analyze_net(&net, &bounds);
        let eps = crate::netgen::UMBILIC_NET_RADIUS / rings as f64;
        let near: Vec<&VertexResult> = results
            .iter()
            .filter(|r| (r.uv - center).norm() <= 2.5 * eps)
            .collect();
        let errors: Vec<f64> = near
            .iter()
            .filter_map(|r| r.errors(variant))
            .map(|(a, b)| a.max(b))
            .collect();
        let umbilic_error = results
            .iter()
            .find(|r| r.vertex == 0)
            .and_then(|r| r.errors(variant))
            .map_or(f64::NAN, |(a, b)| a.max(b));
        records.push(UmbilicRecord {
            rings,
            eps_max: results.iter().map(|r| r.metrics.epsilon).fold(0.0, f64::max),
            rho_max: results.iter().map(|r| r.metrics.rho).fold(0.0, f64::max),
            near_error: errors.iter().copied().fold(0.0, f64::max),
            umbilic_error,
            near_vertices: errors.len(),
            estimate_failures: near.len() - errors.len(),
        });
    }
    let fit = fit_rate(
        &records.iter().map(|r| r.eps_max).collect::<Vec<_>>(),
        &records.iter().map(|r| r.near_error).collect::<Vec<_>>(),
    )?;
    let rho_non_decreasing = records
        .windows(2)
        .all(|w| w[1].rho_max >= w[0].rho_max * (1.0 - RHO_DRIFT));
    Ok(UmbilicOutcome {
        pattern,
        records,
        fit,
        rho_non_decreasing,
    })
}

/// Whether the variant-spread ratios stay bounded across valid levels.
pub fn variant_spread_bounded(records: &[ConvergenceRecord]) -> bool {
    let spreads: Vec<f64> = records
        .iter()
        .filter(|r| r.valid)
        .map(|r| r.variant_spread)
        .collect();
    ratios_bounded(&spreads)
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(fs::File::create(path)?)
}

/// CSV with one row per level; an empty list yields the header only.
pub fn write_records_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if records.is_empty() {
        w.write_record(RECORD_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RECORD_HEADER: [&str; 18] = [
    "level",
    "vertices",
    "eps_max",
    "rho_max",
    "sampling_fraction",
    "sup_k1_angle",
    "sup_k1_sin",
    "sup_k1_tan",
    "sup_k2_angle",
    "sup_k2_sin",
    "sup_k2_tan",
    "vertex_error",
    "variant_spread",
    "coverage_ok",
    "degenerate_stars",
    "estimate_failures",
    "violations",
    "valid",
];

/// Long-format violation counts: `level,check,violations`.
pub fn write_violations_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["level", "check", "violations"])?;
    for r in records {
        for (name, count) in &r.violation_counts {
            w.write_record([r.level.to_string(), name.clone(), count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Two columns `eps sup_error` (configured variant, max over both curvatures).
pub fn write_plotdata(records: &[ConvergenceRecord], variant: Variant, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# eps sup_error ({variant})")?;
    for r in records {
        writeln!(f, "{} {}", r.eps_max, r.sup_k1(variant).max(r.sup_k2(variant)))?;
    }
    Ok(())
}

/// Per-vertex curvature rows for the configured variant.
pub fn write_vertices_csv(results: &[VertexResult], variant: Variant, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "vertex", "u", "v", "eps", "rho", "angle_defect", "area", "mean", "k1", "k2", "kappa1",
        "kappa2", "err_k1", "err_k2", "edge_k1", "edge_k2", "variant",
    ])?;
    for r in results {
        let m = &r.metrics;
        let base = vec![
            r.vertex.to_string(),
            r.uv.x.to_string(),
            r.uv.y.to_string(),
            m.epsilon.to_string(),
            m.rho.to_string(),
            m.angle_defect.to_string(),
        ];
        let rest = match r.estimate(variant) {
            Some(e) => vec![
                e.area.to_string(),
                e.mean.to_string(),
                e.k1.to_string(),
                e.k2.to_string(),
                r.point.kappa1().to_string(),
                r.point.kappa2().to_string(),
                (e.k1 - r.point.kappa1()).abs().to_string(),
                (e.k2 - r.point.kappa2()).abs().to_string(),
                e.edge_for_k1.to_string(),
                e.edge_for_k2.to_string(),
            ],
            None => {
                let mut v = vec![String::new(); 10];
                v[4] = r.point.kappa1().to_string();
                v[5] = r.point.kappa2().to_string();
                v
            }
        };
        let mut row = base;
        row.extend(rest);
        row.push(variant.name().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per vertex per check: `vertex,check,lhs,rhs,status`.
pub fn write_checks_csv(results: &[VertexResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["vertex", "check", "lhs", "rhs", "status"])?;
    for r in results {
        for c in &r.report.checks {
            w.write_record([
                r.vertex.to_string(),
                c.name.to_string(),
                c.lhs.to_string(),
                c.rhs.to_string(),
                if c.pass { "pass" } else { "fail" }.to_string(),
            ])?;
        }
        for (name, reason) in &r.report.skipped {
            w.write_record([
                r.vertex.to_string(),
                name.to_string(),
                String::new(),
                String::new(),
                format!("skip:{}", reason.name()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_umbilic_csv(outcome: &UmbilicOutcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in &outcome.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock timings, kept apart from the CSVs so those stay reproducible.
pub fn write_timing(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    for r in records {
        writeln!(f, "{} {:.3}", r.level, r.seconds)?;
    }
    Ok(())
}

pub fn write_net(net: &CurvatureLineNet, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => net.write_obj(f),
        _ => net.write_text(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_laws() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let lin: Vec<f64> = eps.iter().map(|e| 3.0 * e).collect();
        assert_abs_diff_eq!(fit_rate(&eps, &lin).unwrap().slope, 1.0, epsilon = 1e-12);
        let quad: Vec<f64> = eps.iter().map(|e| e * e).collect();
        assert_abs_diff_eq!(fit_rate(&eps, &quad).unwrap().slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_needs_two_nonzero_points() {
        assert!(matches!(
            fit_rate(&[0.1, 0.05], &[0.0, 1.0]),
            Err(Error::FitUnavailable(1))
        ));
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
surface = "torus"
major_radius = 2.0
minor_radius = 0.5
net = "conformal"
levels = [32, 64]
variant = "tan"
seed = 7
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.variant, Variant::Tan);
        assert_eq!(cfg.dense_factor, 4);
        assert!(ExperimentConfig::from_toml(&text.replace("[32, 64]", "[32]")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{text}\nbogus = 1")).is_err());
    }

    #[test]
    fn nearest_search_expands_shells() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        let h = SpatialHash::new(pts, 0.5);
        let (i, d) = h.nearest(&Vec3::new(2.2, 0.0, 0.0), 8).unwrap();
        assert_eq!(i, 1);
        assert_abs_diff_eq!(d, 0.8, epsilon = 1e-12);
    }
}
