//! Nets of curvature lines.
//!
//! Three generators are provided: grid nets on surfaces of revolution (parameter
//! lines are curvature lines there), nets assembled from numerically traced
//! principal lines, and local nets around an isolated umbilic of a Monge patch.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::star::StarMetrics;
use crate::surface::{
    adaptive_simpson, Family, MongeCubic, SurfaceBounds, SurfaceChart, SurfacePointData, Uv, Vec3,
};

/// Samples per edge polyline on parameter-line nets (edges are exact parameter segments).
const GRID_EDGE_SAMPLES: usize = 9;

/// Half-width of the parameter square used for umbilic patches.
pub const UMBILIC_PATCH_HALF_WIDTH: f64 = 0.25;

/// Radius of the region covered by umbilic nets.
pub const UMBILIC_NET_RADIUS: f64 = 0.2;

/// Settings for principal-line integration. Lengths are intrinsic arc lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Integrator step.
    pub step: f64,
    /// Target spacing of polyline samples kept on net edges.
    pub sample_spacing: f64,
    /// Traces moving toward a known umbilic stop inside this distance.
    pub umbilic_stop_radius: f64,
    pub max_steps: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            step: 2e-3,
            sample_spacing: 4e-3,
            umbilic_stop_radius: 1e-3,
            max_steps: 200_000,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.sample_spacing > 0.0
            && self.umbilic_stop_radius > 0.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "trace configuration entries must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    TargetLength,
    DomainBoundary,
    UmbilicRadius,
    MaxSteps,
    Failure,
}

/// A principal line sampled at every integration step, parameterized by arc length.
#[derive(Clone, Debug)]
pub struct TracedLine {
    pub family: Family,
    pub samples: Vec<Uv>,
    pub arc: Vec<f64>,
    pub dirs: Vec<Vec3>,
    pub stop: StopReason,
    spacing: f64,
    chart: SurfaceChart,
}

fn rk4_step(
    chart: &SurfaceChart,
    uv: Uv,
    dir: &Vec3,
    family: Family,
    h: f64,
) -> Result<(Uv, Vec3)> {
    let field = |p: Uv, prev: &Vec3| -> Result<(Uv, Vec3)> {
        let d = chart.principal_direction_field(p, family, Some(prev))?;
        Ok((chart.tangent_coords(p, &d)?, d))
    };
    let (k1, d1) = field(uv, dir)?;
    let (k2, d2) = field(uv + 0.5 * h * k1, &d1)?;
    let (k3, d3) = field(uv + 0.5 * h * k2, &d2)?;
    let (k4, _) = field(uv + h * k3, &d3)?;
    let next = uv + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let d = chart.principal_direction_field(next, family, Some(&d1))?;
    Ok((next, d))
}

impl TracedLine {
    fn start(chart: &SurfaceChart, seed: Uv, dir: Vec3, family: Family, spacing: f64) -> Self {
        Self {
            family,
            samples: vec![seed],
            arc: vec![0.0],
            dirs: vec![dir],
            stop: StopReason::TargetLength,
            spacing,
            chart: *chart,
        }
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("line has a seed sample")
    }

    /// Point and unit tangent at arc length `s`, clamped to the traced range.
    pub fn point_at(&self, s: f64) -> Result<(Uv, Vec3)> {
        let s = s.clamp(0.0, self.length());
        let k = self.arc.partition_point(|&a| a <= s).saturating_sub(1);
        let h = s - self.arc[k];
        if h <= 0.0 {
            return Ok((self.samples[k], self.dirs[k]));
        }
        rk4_step(&self.chart, self.samples[k], &self.dirs[k], self.family, h)
    }

    /// Polyline from arc `a` to arc `b` (`a < b`) with interior samples thinned to the spacing.
    pub fn polyline(&self, a: f64, b: f64) -> Result<Vec<Uv>> {
        let mut out = vec![self.point_at(a)?.0];
        let mut last = a;
        let tiny = 1e-12 * (1.0 + b.abs());
        for (k, &s) in self.arc.iter().enumerate() {
            if s > a + tiny && s < b - tiny && s - last >= self.spacing * (1.0 - 1e-9) {
                out.push(self.samples[k]);
                last = s;
            }
        }
        out.push(self.point_at(b)?.0);
        Ok(out)
    }
}

/// Traces the principal line of `family` through `seed` for `target_length`
/// (negative lengths trace against the default orientation of the direction field).
pub fn trace_principal_line(
    chart: &SurfaceChart,
    seed: Uv,
    family: Family,
    target_length: f64,
    cfg: &TraceConfig,
) -> Result<TracedLine> {
    cfg.validate()?;
    let mut heading = chart.principal_direction_field(seed, family, None)?;
    if target_length < 0.0 {
        heading = -heading;
    }
    trace_from(chart, seed, &heading, family, target_length.abs(), cfg)
}

/// Traces from `seed` with the line orientation chosen to agree with `heading`.
pub fn trace_from(
    chart: &SurfaceChart,
    seed: Uv,
    heading: &Vec3,
    family: Family,
    length: f64,
    cfg: &TraceConfig,
) -> Result<TracedLine> {
    cfg.validate()?;
    let dir0 = chart.principal_direction_field(seed, family, Some(heading))?;
    let umbilics: Vec<Vec3> = chart
        .known_umbilics()
        .iter()
        .map(|uv| chart.position(*uv))
        .collect();
    let distance = |uv: Uv| {
        let p = chart.position(uv);
        umbilics
            .iter()
            .map(|q| (p - q).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let cos_limit = (30.0_f64).to_radians().cos();
    let mut line = TracedLine::start(chart, seed, dir0, family, cfg.sample_spacing);
    let mut steps = 0;
    loop {
        let s = line.length();
        let remaining = length - s;
        if remaining <= 1e-13 * length.max(1.0) {
            line.stop = StopReason::TargetLength;
            break;
        }
        if steps >= cfg.max_steps {
            line.stop = StopReason::MaxSteps;
            break;
        }
        let uv = *line.samples.last().unwrap();
        let dir = *line.dirs.last().unwrap();
        let here = distance(uv);
        let mut h = cfg.step.min(remaining);
        if here.is_finite() {
            // resolve the fast rotation of the field close to an umbilic
            h = h.min((0.25 * here).max(1e-4 * cfg.step));
        }
        let fail = |line: &TracedLine, reason: String| {
            let mut partial = line.clone();
            partial.stop = StopReason::Failure;
            Error::TraceFailure {
                reason,
                partial: Box::new(partial),
            }
        };
        let (next, nd) = match rk4_step(chart, uv, &dir, family, h) {
            Ok(v) => v,
            Err(e) => return Err(fail(&line, format!("{e} at arc length {s}"))),
        };
        if nd.dot(&dir) < cos_limit {
            return Err(fail(
                &line,
                format!(
                    "direction field turns by {:.1} degrees within one step at arc length {s}",
                    nd.dot(&dir).clamp(-1.0, 1.0).acos().to_degrees()
                ),
            ));
        }
        if !chart.domain.contains(next) {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match rk4_step(chart, uv, &dir, family, mid) {
                    Ok((p, _)) if chart.domain.contains(p) => lo = mid,
                    _ => hi = mid,
                }
            }
            if lo > 0.0 {
                let (p, d) = rk4_step(chart, uv, &dir, family, lo)?;
                line.samples.push(p);
                line.dirs.push(d);
                line.arc.push(s + lo);
            }
            line.stop = StopReason::DomainBoundary;
            break;
        }
        line.samples.push(next);
        line.dirs.push(nd);
        line.arc.push(s + h);
        steps += 1;
        let there = distance(next);
        if there < cfg.umbilic_stop_radius && there < here {
            line.stop = StopReason::UmbilicRadius;
            break;
        }
    }
    Ok(line)
}

/// A principal line traced in both directions from a seed; arc length is signed.
#[derive(Clone, Debug)]
struct BiLine {
    forward: TracedLine,
    backward: TracedLine,
}

impl BiLine {
    fn trace(
        chart: &SurfaceChart,
        seed: Uv,
        heading: &Vec3,
        family: Family,
        reach: f64,
        cfg: &TraceConfig,
    ) -> Result<Self> {
        Ok(Self {
            forward: trace_from(chart, seed, heading, family, reach, cfg)?,
            backward: trace_from(chart, seed, &-heading, family, reach, cfg)?,
        })
    }

    fn range(&self) -> (f64, f64) {
        (-self.backward.length(), self.forward.length())
    }

    fn point(&self, s: f64) -> Result<(Uv, Vec3)> {
        if s >= 0.0 {
            self.forward.point_at(s)
        } else {
            let (uv, d) = self.backward.point_at(-s)?;
            Ok((uv, -d))
        }
    }

    fn polyline(&self, a: f64, b: f64) -> Result<Vec<Uv>> {
        if a >= 0.0 {
            self.forward.polyline(a, b)
        } else if b <= 0.0 {
            let mut p = self.backward.polyline(-b, -a)?;
            p.reverse();
            Ok(p)
        } else {
            let mut p = self.backward.polyline(0.0, -a)?;
            p.reverse();
            let f = self.forward.polyline(0.0, b)?;
            p.extend_from_slice(&f[1..]);
            Ok(p)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetVertex {
    pub id: usize,
    pub uv: Uv,
    pub position: Vec3,
    pub point: SurfacePointData,
}

/// Curved edge stored as a parameter-domain polyline (unwrapped across periodic seams).
#[derive(Clone, Debug, PartialEq)]
pub struct NetEdge {
    pub id: usize,
    pub v0: usize,
    pub v1: usize,
    pub family: Family,
    pub samples: Vec<Uv>,
    pub length: f64,
}

impl NetEdge {
    pub fn other(&self, v: usize) -> usize {
        if self.v0 == v {
            self.v1
        } else {
            self.v0
        }
    }
}

/// A 2-cell. Quad cells list their boundary cyclically; umbilic-net fan cells
/// list `[tip, center, tip]` with the two spanning edges only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetCell {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CurvatureLineNet {
    pub chart: SurfaceChart,
    pub vertices: Vec<NetVertex>,
    pub edges: Vec<NetEdge>,
    pub cells: Vec<NetCell>,
    /// Incident edges per vertex in counterclockwise order about the normal.
    pub incident: Vec<Vec<usize>>,
    /// Pairs of incident edges spanning a cell corner, stored as `(min, max)`.
    pub corners: Vec<BTreeSet<(usize, usize)>>,
}

struct EdgeSpec {
    v0: usize,
    v1: usize,
    family: Family,
    samples: Vec<Uv>,
    length: f64,
}

fn corner_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn assemble(
    chart: &SurfaceChart,
    uvs: Vec<Uv>,
    specs: Vec<EdgeSpec>,
    cells: Vec<NetCell>,
    corners: Option<Vec<BTreeSet<(usize, usize)>>>,
) -> Result<CurvatureLineNet> {
    let vertices = uvs
        .par_iter()
        .enumerate()
        .map(|(id, &uv)| {
            let point = chart.eval_point(uv)?;
            Ok(NetVertex {
                id,
                uv,
                position: point.position,
                point,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let edges: Vec<NetEdge> = specs
        .into_iter()
        .enumerate()
        .map(|(id, s)| NetEdge {
            id,
            v0: s.v0,
            v1: s.v1,
            family: s.family,
            samples: s.samples,
            length: s.length,
        })
        .collect();
    let mut incident: Vec<Vec<(f64, usize)>> = vec![Vec::new(); vertices.len()];
    for e in &edges {
        let n = e.samples.len();
        for (v, near) in [(e.v0, e.samples[1]), (e.v1, e.samples[n - 2])] {
            let vx = &vertices[v];
            let w = chart.position(near) - vx.position;
            let f = &vx.point.frame;
            incident[v].push((w.dot(&f.v2).atan2(w.dot(&f.v1)), e.id));
        }
    }
    let incident: Vec<Vec<usize>> = incident
        .into_iter()
        .map(|mut list| {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            list.into_iter().map(|(_, id)| id).collect()
        })
        .collect();
    let corners = corners.unwrap_or_else(|| {
        let mut c = vec![BTreeSet::new(); vertices.len()];
        for cell in &cells {
            let k = cell.vertices.len();
            for i in 0..k {
                let v = cell.vertices[(i + 1) % k];
                c[v].insert(corner_key(cell.edges[i], cell.edges[(i + 1) % k]));
            }
        }
        c
    });
    Ok(CurvatureLineNet {
        chart: *chart,
        vertices,
        edges,
        cells,
        incident,
        corners,
    })
}

impl CurvatureLineNet {
    pub fn valence(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    /// A vertex is interior when every cyclically adjacent pair of incident edges spans a cell.
    pub fn is_boundary(&self, v: usize) -> bool {
        let ring = &self.incident[v];
        let k = ring.len();
        k < 3
            || (0..k).any(|i| !self.corners[v].contains(&corner_key(ring[i], ring[(i + 1) % k])))
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| !self.is_boundary(v))
            .collect()
    }

    /// Position of the far end of `edge` seen from vertex `v`.
    pub fn far_position(&self, edge: usize, v: usize) -> Vec3 {
        self.vertices[self.edges[edge].other(v)].position
    }

    /// Checks the structural invariants of a net of curvature lines; returns violations.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for v in 0..self.vertices.len() {
            if self.is_boundary(v) {
                continue;
            }
            let ring = &self.incident[v];
            if self.vertices[v].point.umbilic() {
                if ring.len() <= 2 {
                    problems.push(format!("umbilic vertex {v} has valence {}", ring.len()));
                }
            } else if ring.len() != 4 {
                problems.push(format!("vertex {v} has valence {}", ring.len()));
            } else {
                for i in 0..4 {
                    if self.edges[ring[i]].family == self.edges[ring[(i + 1) % 4]].family {
                        problems.push(format!("vertex {v}: family tags do not alternate"));
                        break;
                    }
                }
            }
        }
        for e in &self.edges {
            let first = self.chart.position(e.samples[0]);
            let last = self.chart.position(*e.samples.last().unwrap());
            if (first - self.vertices[e.v0].position).norm() > 1e-10
                || (last - self.vertices[e.v1].position).norm() > 1e-10
            {
                problems.push(format!("edge {} polyline does not end at its vertices", e.id));
            }
        }
        let mut cells_at: HashMap<usize, Vec<usize>> = HashMap::new();
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in &cell.vertices {
                cells_at.entry(v).or_default().push(c);
            }
        }
        let mut seen = BTreeSet::new();
        for list in cells_at.values() {
            for (i, &a) in list.iter().enumerate() {
                for &b in &list[i + 1..] {
                    if !seen.insert((a.min(b), a.max(b))) {
                        continue;
                    }
                    let va: BTreeSet<_> = self.cells[a].vertices.iter().collect();
                    let shared: Vec<usize> = self.cells[b]
                        .vertices
                        .iter()
                        .filter(|v| va.contains(v))
                        .copied()
                        .collect();
                    let ok = match shared.len() {
                        1 => true,
                        2 => self.cells[a].edges.iter().any(|e| {
                            self.cells[b].edges.contains(e) && {
                                let ed = &self.edges[*e];
                                shared.contains(&ed.v0) && shared.contains(&ed.v1)
                            }
                        }),
                        _ => false,
                    };
                    if !ok {
                        problems.push(format!("cells {a} and {b} intersect improperly"));
                    }
                }
            }
        }
        problems
    }

    /// Writes the plain-text net format (VERTICES, EDGES, CELLS sections).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "VERTICES {}", self.vertices.len())?;
        for v in &self.vertices {
            let p = v.position;
            writeln!(w, "{} {} {} {} {} {}", v.id, v.uv.x, v.uv.y, p.x, p.y, p.z)?;
        }
        writeln!(w, "EDGES {}", self.edges.len())?;
        for e in &self.edges {
            write!(
                w,
                "{} {} {} {} {} {}",
                e.id,
                e.v0,
                e.v1,
                e.family,
                e.length,
                e.samples.len()
            )?;
            for s in &e.samples {
                write!(w, " {} {}", s.x, s.y)?;
            }
            writeln!(w)?;
        }
        writeln!(w, "CELLS {}", self.cells.len())?;
        for (i, c) in self.cells.iter().enumerate() {
            write!(w, "{} {}", i, c.vertices.len())?;
            for v in &c.vertices {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes the straight-edge net as an OBJ with line elements.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# curvature line net: {} ({} vertices, {} edges)", self.chart.name(), self.vertices.len(), self.edges.len())?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.position.x, v.position.y, v.position.z)?;
        }
        for e in &self.edges {
            writeln!(w, "l {} {}", e.v0 + 1, e.v1 + 1)?;
        }
        Ok(())
    }
}

fn period(range: (f64, f64)) -> f64 {
    range.1 - range.0
}

/// Net whose edges are the parameter lines through `us × vs`. Periodic axes wrap.
/// Parameter lines must be curvature lines (surfaces of revolution, planes).
pub fn parameter_grid_net(chart: &SurfaceChart, us: &[f64], vs: &[f64]) -> Result<CurvatureLineNet> {
    if !chart.is_revolution() && !matches!(chart.kind, crate::surface::SurfaceKind::Plane) {
        return Err(Error::UnsupportedChart {
            chart: chart.name().to_string(),
            operation: "parameter grid nets",
        });
    }
    if us.len() < 2 || vs.len() < 2 {
        return Err(Error::InvalidArgument("parameter grid needs two values per axis".into()));
    }
    let d = chart.domain;
    let (nu, nv) = (us.len(), vs.len());
    let id = |i: usize, j: usize| j * nu + i;
    let uvs: Vec<Uv> = (0..nv)
        .flat_map(|j| (0..nu).map(move |i| Uv::new(us[i], vs[j])))
        .collect();
    let steps_u = if d.periodic_u { nu } else { nu - 1 };
    let steps_v = if d.periodic_v { nv } else { nv - 1 };
    let mut raw = Vec::new();
    let mut edge_u = HashMap::new();
    let mut edge_v = HashMap::new();
    for j in 0..nv {
        for i in 0..steps_u {
            let a = Uv::new(us[i], vs[j]);
            let b = if i + 1 == nu {
                Uv::new(us[0] + period(d.u), vs[j])
            } else {
                Uv::new(us[i + 1], vs[j])
            };
            edge_u.insert((i, j), raw.len());
            raw.push((id(i, j), id((i + 1) % nu, j), a, b, true));
        }
    }
    for j in 0..steps_v {
        for i in 0..nu {
            let a = Uv::new(us[i], vs[j]);
            let b = if j + 1 == nv {
                Uv::new(us[i], vs[0] + period(d.v))
            } else {
                Uv::new(us[i], vs[j + 1])
            };
            edge_v.insert((i, j), raw.len());
            raw.push((id(i, j), id(i, (j + 1) % nv), a, b, false));
        }
    }
    let specs = raw
        .par_iter()
        .map(|&(v0, v1, a, b, along_u)| {
            let mid = 0.5 * (a + b);
            let frame = chart.principal_frame(mid)?;
            let jet = chart.jet(mid);
            let t = if along_u { jet.du } else { jet.dv }.normalize();
            let family = if t.dot(&frame.v1).abs() >= t.dot(&frame.v2).abs() {
                Family::One
            } else {
                Family::Two
            };
            let samples = (0..GRID_EDGE_SAMPLES)
                .map(|k| a + (b - a) * (k as f64 / (GRID_EDGE_SAMPLES - 1) as f64))
                .collect();
            Ok(EdgeSpec {
                v0,
                v1,
                family,
                samples,
                length: chart.segment_length(a, b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for j in 0..steps_v {
        for i in 0..steps_u {
            let (i1, j1) = ((i + 1) % nu, (j + 1) % nv);
            cells.push(NetCell {
                vertices: vec![id(i, j), id(i1, j), id(i1, j1), id(i, j1)],
                edges: vec![
                    edge_u[&(i, j)],
                    edge_v[&(i1, j)],
                    edge_u[&(i, j1)],
                    edge_v[&(i, j)],
                ],
            });
        }
    }
    assemble(chart, uvs, specs, cells, None)
}

fn require_revolution(chart: &SurfaceChart) -> Result<()> {
    if chart.is_revolution() {
        Ok(())
    } else {
        Err(Error::UnsupportedChart {
            chart: chart.name().to_string(),
            operation: "revolution nets",
        })
    }
}

fn meridian_angles(chart: &SurfaceChart, n_meridians: usize) -> Vec<f64> {
    let d = chart.domain.u;
    (0..n_meridians)
        .map(|i| d.0 + period(d) * i as f64 / n_meridians as f64)
        .collect()
}

/// Quad net of meridians and parallels with uniformly spaced profile parameter rows.
/// Periodic profiles get `n_parallels` rows per period; otherwise rows span the
/// profile range including both ends.
pub fn revolution_net(
    chart: &SurfaceChart,
    n_meridians: usize,
    n_parallels: usize,
) -> Result<CurvatureLineNet> {
    require_revolution(chart)?;
    if n_meridians < 3 || n_parallels < 2 {
        return Err(Error::InvalidArgument(format!(
            "revolution net needs at least 3 meridians and 2 parallels, got {n_meridians} x {n_parallels}"
        )));
    }
    let d = chart.domain;
    let rows: Vec<f64> = if d.periodic_v {
        (0..n_parallels)
            .map(|j| d.v.0 + period(d.v) * j as f64 / n_parallels as f64)
            .collect()
    } else {
        (0..n_parallels)
            .map(|j| d.v.0 + period(d.v) * j as f64 / (n_parallels - 1) as f64)
            .collect()
    };
    revolution_net_rows(chart, n_meridians, &rows)
}

/// Quad net of meridians and the parallels at the given profile parameters (increasing).
pub fn revolution_net_rows(
    chart: &SurfaceChart,
    n_meridians: usize,
    rows: &[f64],
) -> Result<CurvatureLineNet> {
    require_revolution(chart)?;
    if n_meridians < 3 || rows.len() < 2 || rows.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "revolution net needs at least 3 meridians and 2 increasing rows".into(),
        ));
    }
    parameter_grid_net(chart, &meridian_angles(chart, n_meridians), rows)
}

/// Profile rows making net cells approximately square: consecutive rows are one
/// meridian step apart in the conformal coordinate `ψ(v) = ∫ |X_v| / |X_u| dv`.
pub fn conformal_rows(chart: &SurfaceChart, n_meridians: usize) -> Result<Vec<f64>> {
    require_revolution(chart)?;
    let d = chart.domain;
    let dphi = period(d.u) / n_meridians as f64;
    let rate = |v: f64| {
        let j = chart.jet(Uv::new(d.u.0, v));
        j.dv.norm() / j.du.norm()
    };
    const TABLE: usize = 4096;
    let h = period(d.v) / TABLE as f64;
    let mut table = vec![0.0];
    for k in 0..TABLE {
        let a = d.v.0 + h * k as f64;
        let next = table[k] + adaptive_simpson(&rate, a, a + h, 1e-13);
        table.push(next);
    }
    let total = table[TABLE];
    let invert = |psi: f64| {
        let k = table.partition_point(|&x| x <= psi).clamp(1, TABLE) - 1;
        let mut t = d.v.0 + h * k as f64;
        let mut acc = table[k];
        // Newton on the remaining conformal length inside the table cell
        for _ in 0..20 {
            let r = rate(t);
            let step = (psi - acc) / r;
            if step.abs() < 1e-15 {
                break;
            }
            acc += adaptive_simpson(&rate, t, t + step, 1e-14);
            t += step;
        }
        t
    };
    let rows = if d.periodic_v {
        let n = ((total / dphi).round() as usize).max(3);
        (0..n).map(|k| invert(total * k as f64 / n as f64)).collect()
    } else {
        let n = ((total / dphi).round() as usize).max(1);
        let mut rows: Vec<f64> = (0..=n).map(|k| invert(total * k as f64 / n as f64)).collect();
        rows[0] = d.v.0;
        rows[n] = d.v.1;
        rows
    };
    Ok(rows)
}

/// Seeds for a traced net: arc-length offsets along the family-1 line through
/// `origin` (each seeds a family-2 line) and along the family-2 line through
/// `origin` (each seeds a family-1 line).
#[derive(Clone, Debug, PartialEq)]
pub struct SeedGrid {
    pub origin: Uv,
    pub offsets_1: Vec<f64>,
    pub offsets_2: Vec<f64>,
}

impl SeedGrid {
    pub fn uniform(origin: Uv, spacing: f64, half_count: usize) -> Self {
        let offsets: Vec<f64> = (-(half_count as i64)..=half_count as i64)
            .map(|k| k as f64 * spacing)
            .collect();
        Self {
            origin,
            offsets_1: offsets.clone(),
            offsets_2: offsets,
        }
    }
}

/// Smallest sine of the crossing angle accepted for trace intersections (ρ target 4).
const MIN_CROSSING_SINE: f64 = 1.0 / 16.0;

fn intersect(
    chart: &SurfaceChart,
    a: &BiLine,
    b: &BiLine,
    s0: f64,
    t0: f64,
) -> Option<(f64, f64)> {
    let (mut s, mut t) = (s0, t0);
    let (ra, rb) = (a.range(), b.range());
    for _ in 0..60 {
        let (pa, da) = a.point(s).ok()?;
        let (pb, db) = b.point(t).ok()?;
        let f = pa - pb;
        let ca = chart.tangent_coords(pa, &da).ok()?;
        let cb = chart.tangent_coords(pb, &db).ok()?;
        let jac = nalgebra::Matrix2::new(ca.x, -cb.x, ca.y, -cb.y);
        let delta = jac.try_inverse()? * (-f);
        s += delta.x;
        t += delta.y;
        if s < ra.0 || s > ra.1 || t < rb.0 || t > rb.1 {
            return None;
        }
        if delta.norm() < 1e-13 {
            if da.cross(&db).norm() < MIN_CROSSING_SINE {
                return None;
            }
            return Some((s, t));
        }
    }
    None
}

/// Net assembled from traced principal lines, with vertices at trace intersections.
pub fn traced_net(
    chart: &SurfaceChart,
    seeds: &SeedGrid,
    cfg: &TraceConfig,
) -> Result<CurvatureLineNet> {
    cfg.validate()?;
    let sorted = |o: &[f64]| o.len() >= 2 && o.windows(2).all(|w| w[1] > w[0]);
    if !sorted(&seeds.offsets_1) || !sorted(&seeds.offsets_2) {
        return Err(Error::InvalidArgument(
            "seed offsets must be strictly increasing with at least two entries".into(),
        ));
    }
    let extent = |o: &[f64]| o.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let reach1 = 1.5 * extent(&seeds.offsets_1) + 10.0 * cfg.step;
    let reach2 = 1.5 * extent(&seeds.offsets_2) + 10.0 * cfg.step;
    let frame = chart.principal_frame(seeds.origin)?;
    if frame.umbilic {
        return Err(Error::UmbilicAmbiguity {
            u: seeds.origin.x,
            v: seeds.origin.y,
        });
    }
    let base1 = BiLine::trace(chart, seeds.origin, &frame.v1, Family::One, reach1, cfg)?;
    let base2 = BiLine::trace(chart, seeds.origin, &frame.v2, Family::Two, reach2, cfg)?;
    // family-1 lines seeded along base2 with heading t₂ × n, family-2 lines along base1 with n × t₁
    let lines1 = seeds
        .offsets_2
        .par_iter()
        .map(|&o| {
            let (uv, t2) = base2.point(o)?;
            let n = chart.normal(uv)?;
            BiLine::trace(chart, uv, &t2.cross(&n), Family::One, reach1, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let lines2 = seeds
        .offsets_1
        .par_iter()
        .map(|&o| {
            let (uv, t1) = base1.point(o)?;
            let n = chart.normal(uv)?;
            BiLine::trace(chart, uv, &n.cross(&t1), Family::Two, reach2, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let (n1, n2) = (seeds.offsets_1.len(), seeds.offsets_2.len());
    let id = |i: usize, j: usize| i * n1 + j;
    let params = (0..n2 * n1)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n1, k % n1);
            intersect(
                chart,
                &lines1[i],
                &lines2[j],
                seeds.offsets_1[j],
                seeds.offsets_2[i],
            )
            .ok_or_else(|| {
                Error::NetConstruction(format!(
                    "no transversal intersection for vertex ({i}, {j}) of the seed grid"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 0..n2 {
        for j in 0..n1 {
            let (s, t) = params[id(i, j)];
            let bad_s = j + 1 < n1 && params[id(i, j + 1)].0 <= s;
            let bad_t = i + 1 < n2 && params[id(i + 1, j)].1 <= t;
            if bad_s || bad_t {
                return Err(Error::NetConstruction(format!(
                    "trace intersections out of order at cell ({i}, {j})"
                )));
            }
        }
    }
    let uvs = (0..n2 * n1)
        .map(|k| Ok(lines1[k / n1].point(params[k].0)?.0))
        .collect::<Result<Vec<Uv>>>()?;
    let mut specs = Vec::new();
    let mut e1 = HashMap::new();
    let mut e2 = HashMap::new();
    for i in 0..n2 {
        for j in 0..n1 - 1 {
            let (a, b) = (params[id(i, j)].0, params[id(i, j + 1)].0);
            let mut samples = lines1[i].polyline(a, b)?;
            *samples.first_mut().unwrap() = uvs[id(i, j)];
            *samples.last_mut().unwrap() = uvs[id(i, j + 1)];
            e1.insert((i, j), specs.len());
            specs.push(EdgeSpec {
                v0: id(i, j),
                v1: id(i, j + 1),
                family: Family::One,
                samples,
                length: b - a,
            });
        }
    }
    for j in 0..n1 {
        for i in 0..n2 - 1 {
            let (a, b) = (params[id(i, j)].1, params[id(i + 1, j)].1);
            let mut samples = lines2[j].polyline(a, b)?;
            *samples.first_mut().unwrap() = uvs[id(i, j)];
            *samples.last_mut().unwrap() = uvs[id(i + 1, j)];
            e2.insert((i, j), specs.len());
            specs.push(EdgeSpec {
                v0: id(i, j),
                v1: id(i + 1, j),
                family: Family::Two,
                samples,
                length: b - a,
            });
        }
    }
    let mut cells = Vec::new();
    for i in 0..n2 - 1 {
        for j in 0..n1 - 1 {
            cells.push(NetCell {
                vertices: vec![id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)],
                edges: vec![e1[&(i, j)], e2[&(i, j + 1)], e1[&(i + 1, j)], e2[&(i, j)]],
            });
        }
    }
    assemble(chart, uvs, specs, cells, None)
}

/// Generic curvature-line patterns at an isolated umbilic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UmbilicPattern {
    Lemon,
    Star,
    Monstar,
}

impl UmbilicPattern {
    pub const ALL: [UmbilicPattern; 3] = [Self::Lemon, Self::Star, Self::Monstar];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lemon => "lemon",
            Self::Star => "star",
            Self::Monstar => "monstar",
        }
    }

    /// Representative cubic `z = (x² + y²)/2 + cubic` realizing the pattern.
    pub fn cubic(self) -> MongeCubic {
        let c12 = match self {
            Self::Star => -3.0,
            Self::Lemon => 1.0,
            Self::Monstar => 2.25,
        };
        MongeCubic {
            kappa: 1.0,
            c30: 1.0,
            c21: 0.0,
            c12,
            c03: 0.0,
        }
    }

    pub fn chart(self) -> SurfaceChart {
        SurfaceChart::monge(self.cubic(), UMBILIC_PATCH_HALF_WIDTH)
    }
}

impl std::str::FromStr for UmbilicPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown umbilic pattern `{s}`")))
    }
}

/// Result of an angular scan of the family-1 line field around an umbilic.
#[derive(Clone, Debug, PartialEq)]
pub struct UmbilicScan {
    /// Index of the line field (±1/2 for generic umbilics).
    pub index: f64,
    /// Polar angles in `[0, 2π)` at which the family-1 direction is radial.
    pub separatrices: Vec<f64>,
}

impl UmbilicScan {
    pub fn pattern(&self) -> Option<UmbilicPattern> {
        let count = self.separatrices.len();
        if (self.index + 0.5).abs() < 0.1 && count == 3 {
            Some(UmbilicPattern::Star)
        } else if (self.index - 0.5).abs() < 0.1 && count == 1 {
            Some(UmbilicPattern::Lemon)
        } else if (self.index - 0.5).abs() < 0.1 && count == 3 {
            Some(UmbilicPattern::Monstar)
        } else {
            None
        }
    }

    fn describe(&self) -> String {
        format!(
            "index {:+.2} with {} separatrices",
            self.index,
            self.separatrices.len()
        )
    }
}

/// Wraps an angle difference of a line field into `[-π/2, π/2)`.
fn wrap_line(a: f64) -> f64 {
    (a + 0.5 * PI).rem_euclid(PI) - 0.5 * PI
}

/// Scans the family-1 line field on a parameter circle of `radius` around `center`.
pub fn scan_umbilic(chart: &SurfaceChart, center: Uv, radius: f64) -> Result<UmbilicScan> {
    const SAMPLES: usize = 1440;
    let field_angle = |theta: f64| -> Result<f64> {
        let uv = center + radius * Uv::new(theta.cos(), theta.sin());
        let f = chart.principal_frame(uv)?;
        let c = chart.tangent_coords(uv, &f.v1)?;
        Ok(c.y.atan2(c.x))
    };
    let gap = |theta: f64| -> Result<f64> { Ok(wrap_line(field_angle(theta)? - theta)) };
    let thetas: Vec<f64> = (0..=SAMPLES)
        .map(|k| TAU * (k as f64 + 0.5) / SAMPLES as f64)
        .collect();
    let psi = thetas
        .iter()
        .map(|&t| field_angle(t))
        .collect::<Result<Vec<_>>>()?;
    let index = psi
        .windows(2)
        .map(|w| wrap_line(w[1] - w[0]))
        .sum::<f64>()
        / TAU;
    let mut separatrices = Vec::new();
    for k in 0..SAMPLES {
        let (mut lo, mut hi) = (thetas[k], thetas[k + 1]);
        let (glo, ghi) = (gap(lo)?, gap(hi)?);
        if glo * ghi > 0.0 || (glo - ghi).abs() >= 0.5 * PI {
            continue;
        }
        let sign_lo = glo.signum();
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if gap(mid)?.signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        separatrices.push((0.5 * (lo + hi)).rem_euclid(TAU));
    }
    separatrices.sort_by(f64::total_cmp);
    Ok(UmbilicScan {
        index,
        separatrices,
    })
}

/// Directions of the rays at the umbilic vertex: separatrices plus symmetric fillers
/// until no angular gap exceeds 2π/3. The flag marks separatrices.
fn umbilic_rays(separatrices: &[f64]) -> Vec<(f64, bool)> {
    let mut rays: Vec<(f64, bool)> = separatrices.iter().map(|&a| (a, true)).collect();
    if rays.len() == 1 {
        let a = rays[0].0;
        rays.push(((a + TAU / 3.0).rem_euclid(TAU), false));
        rays.push(((a - TAU / 3.0).rem_euclid(TAU), false));
    }
    loop {
        rays.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = rays.len();
        let (widest, gap) = (0..k)
            .map(|i| {
                let next = if i + 1 == k { rays[0].0 + TAU } else { rays[i + 1].0 };
                (i, next - rays[i].0)
            })
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if gap <= TAU / 3.0 + 1e-9 {
            return rays;
        }
        rays.push(((rays[widest].0 + 0.5 * gap).rem_euclid(TAU), false));
    }
}

/// Local net around the umbilic of a Monge patch.
///
/// The umbilic vertex carries rays along the family-1 separatrices (plus
/// symmetric fillers so every angular gap is at most 2π/3). Around it, `rings`
/// concentric rings of spacing `ε = 0.2 / rings` hold `sectors · j` vertices on
/// ring `j`; each ring vertex gets its own star of four principal-line arms of
/// length `ε`, whose tips are boundary vertices.
pub fn umbilic_net(
    chart: &SurfaceChart,
    pattern: UmbilicPattern,
    rings: usize,
    sectors: usize,
) -> Result<CurvatureLineNet> {
    if rings < 2 || sectors < 3 {
        return Err(Error::InvalidArgument(format!(
            "umbilic net needs rings >= 2 and sectors >= 3, got {rings} and {sectors}"
        )));
    }
    let center = *chart
        .known_umbilics()
        .first()
        .ok_or_else(|| Error::UnsupportedChart {
            chart: chart.name().to_string(),
            operation: "umbilic nets",
        })?;
    let scan = scan_umbilic(chart, center, 0.01)?;
    if scan.pattern() != Some(pattern) {
        return Err(Error::PatternMismatch {
            expected: pattern.name().to_string(),
            found: scan.describe(),
        });
    }
    let eps = UMBILIC_NET_RADIUS / rings as f64;
    let cfg = TraceConfig {
        step: eps / 32.0,
        sample_spacing: eps / 8.0,
        umbilic_stop_radius: eps / 4.0,
        max_steps: 100_000,
    };
    let center_frame = chart.principal_frame(center)?;
    let center_pos = chart.position(center);

    let mut uvs = vec![center];
    let mut specs = Vec::new();
    let mut cells = Vec::new();
    let mut corners = vec![BTreeSet::new()];

    // rays from the umbilic
    let r0 = 1e-3 * eps;
    let rays = umbilic_rays(&scan.separatrices);
    let traced_rays = rays
        .par_iter()
        .map(|&(angle, separatrix)| {
            let start = center + r0 * Uv::new(angle.cos(), angle.sin());
            let outward = (chart.position(start) - center_pos).normalize();
            let family = if separatrix {
                Family::One
            } else {
                let f = chart.principal_frame(start)?;
                if outward.dot(&f.v1).abs() >= outward.dot(&f.v2).abs() {
                    Family::One
                } else {
                    Family::Two
                }
            };
            let lead = (chart.position(start) - center_pos).norm();
            let line = trace_from(chart, start, &outward, family, eps - lead, &cfg)?;
            Ok((line, lead, outward))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ray_edges = Vec::new();
    for (line, lead, outward) in traced_rays {
        let tip = uvs.len();
        let mut samples = vec![center];
        samples.extend(line.polyline(0.0, line.length())?);
        uvs.push(*samples.last().unwrap());
        corners.push(BTreeSet::new());
        let family = if outward.dot(&center_frame.v1).abs() >= outward.dot(&center_frame.v2).abs() {
            Family::One
        } else {
            Family::Two
        };
        ray_edges.push((specs.len(), tip));
        specs.push(EdgeSpec {
            v0: 0,
            v1: tip,
            family,
            samples,
            length: lead + line.length(),
        });
    }
    let k = ray_edges.len();
    for i in 0..k {
        let (ea, ta) = ray_edges[i];
        let (eb, tb) = ray_edges[(i + 1) % k];
        corners[0].insert(corner_key(ea, eb));
        cells.push(NetCell {
            vertices: vec![ta, 0, tb],
            edges: vec![ea, eb],
        });
    }

    // rings of local stars
    let ring_points: Vec<Uv> = (1..=rings)
        .flat_map(|j| {
            let count = sectors * j;
            (0..count).map(move |i| {
                let a = TAU * (i as f64 + 0.5) / count as f64;
                center + (j as f64 * eps) * Uv::new(a.cos(), a.sin())
            })
        })
        .collect();
    let arms = ring_points
        .par_iter()
        .map(|&uv| {
            let f = chart.principal_frame(uv)?;
            let headings = [
                (f.v1, Family::One),
                (f.v2, Family::Two),
                (-f.v1, Family::One),
                (-f.v2, Family::Two),
            ];
            headings
                .iter()
                .map(|(h, fam)| trace_from(chart, uv, h, *fam, eps, &cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for (uv, lines) in ring_points.into_iter().zip(arms) {
        let p = uvs.len();
        uvs.push(uv);
        corners.push(BTreeSet::new());
        let mut arm = Vec::new();
        for line in lines {
            let tip = uvs.len();
            let samples = line.polyline(0.0, line.length())?;
            uvs.push(*samples.last().unwrap());
            corners.push(BTreeSet::new());
            arm.push((specs.len(), tip));
            specs.push(EdgeSpec {
                v0: p,
                v1: tip,
                family: line.family,
                samples,
                length: line.length(),
            });
        }
        for i in 0..4 {
            let (ea, ta) = arm[i];
            let (eb, tb) = arm[(i + 1) % 4];
            corners[p].insert(corner_key(ea, eb));
            cells.push(NetCell {
                vertices: vec![ta, p, tb],
                edges: vec![ea, eb],
            });
        }
    }
    assemble(chart, uvs, specs, cells, Some(corners))
}

/// Sampling-condition status of one vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingStatus {
    pub vertex: usize,
    pub epsilon: f64,
    pub rho: f64,
    /// `ε ≤ 1/(16 K ρ²)`.
    pub strict: bool,
    /// `ε ≤ 1/(2 K ρ)`.
    pub weak_rho: bool,
    /// `ε ≤ 1/(2 K)`.
    pub weak: bool,
}

/// Evaluates the sampling conditions. Written multiplicatively so `K = 0` passes.
pub fn check_sampling(metrics: &[StarMetrics], bounds: &SurfaceBounds) -> Vec<SamplingStatus> {
    let k = bounds.k;
    metrics
        .iter()
        .map(|m| SamplingStatus {
            vertex: m.vertex,
            epsilon: m.epsilon,
            rho: m.rho,
            strict: 16.0 * k * m.rho * m.rho * m.epsilon <= 1.0,
            weak_rho: 2.0 * k * m.rho * m.epsilon <= 1.0,
            weak: 2.0 * k * m.epsilon <= 1.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn line_wrap() {
        assert_abs_diff_eq!(wrap_line(PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_line(0.6 * PI), -0.4 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_line(-0.6 * PI), 0.4 * PI, epsilon = 1e-12);
    }

    #[test]
    fn ray_fill() {
        let lemon = umbilic_rays(&[PI]);
        assert_eq!(lemon.len(), 3);
        assert_eq!(lemon.iter().filter(|r| r.1).count(), 1);
        let monstar = umbilic_rays(&[0.5 * PI, PI, 1.5 * PI]);
        assert_eq!(monstar.len(), 4);
        let star = umbilic_rays(&[PI / 3.0, PI, 5.0 * PI / 3.0]);
        assert_eq!(star.len(), 3);
    }

    #[test]
    fn trace_config_validation() {
        assert!(TraceConfig::default().validate().is_ok());
        let bad = TraceConfig {
            step: 0.0,
            ..TraceConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
