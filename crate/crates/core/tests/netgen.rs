use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use curvenet::netgen::{
    conformal_rows, parameter_grid_net, revolution_net, revolution_net_rows, scan_umbilic,
    trace_from, trace_principal_line, traced_net, umbilic_net, SeedGrid, StopReason, TraceConfig,
    UmbilicPattern,
};
use curvenet::star::build_star;
use curvenet::surface::{Family, MongeCubic, SurfaceChart, Uv, Vec3};

fn euler(net: &curvenet::netgen::CurvatureLineNet) -> i64 {
    net.vertices.len() as i64 - net.edges.len() as i64 + net.cells.len() as i64
}

#[test]
fn revolution_nets_are_valid() {
    for (chart, m, n) in [
        (SurfaceChart::torus(2.0, 0.5), 24, 12),
        (SurfaceChart::sphere(1.0), 16, 9),
        (SurfaceChart::spheroid(1.3, 0.9), 20, 11),
    ] {
        let net = revolution_net(&chart, m, n).unwrap();
        assert!(net.validate().is_empty(), "{:?}", net.validate());
        // torus and latitude band are both Euler characteristic zero
        assert_eq!(euler(&net), 0);
        for v in net.interior_vertices() {
            assert_eq!(net.valence(v), 4);
        }
    }
}

#[test]
fn conformal_rows_give_square_cells() {
    let chart = SurfaceChart::torus(2.0, 0.5);
    let rows = conformal_rows(&chart, 64).unwrap();
    let net = revolution_net_rows(&chart, 64, &rows).unwrap();
    for v in net.interior_vertices().into_iter().step_by(37) {
        let star = build_star(&net, v).unwrap();
        // rounding the row count to an integer leaves cells slightly oblong
        assert!(star.shape_regularity(star.epsilon()) < 1.15);
    }
}

#[test]
fn plane_lattice_is_regular() {
    let chart = SurfaceChart::plane(1.0);
    let axis: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let net = parameter_grid_net(&chart, &axis, &axis).unwrap();
    assert_eq!(net.interior_vertices().len(), 49);
    for v in net.interior_vertices() {
        let star = build_star(&net, v).unwrap();
        assert_abs_diff_eq!(star.epsilon(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(star.shape_regularity(0.25), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(star.angle_defect(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn grid_nets_need_curvature_parameter_lines() {
    let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
    assert!(parameter_grid_net(&chart, &[0.1, 0.2], &[0.1, 0.2]).is_err());
}

/// Family whose direction is the `u` parameter line at `uv`.
fn parallel_family(chart: &SurfaceChart, uv: Uv) -> Family {
    let du = chart.jet(uv).du.normalize();
    let f = chart.principal_frame(uv).unwrap();
    if f.v1.dot(&du).abs() > 0.5 {
        Family::One
    } else {
        Family::Two
    }
}

#[test]
fn traced_lines_follow_parameter_lines_on_revolution_surfaces() {
    let chart = SurfaceChart::spheroid(1.3, 0.9);
    let seed = Uv::new(0.3, 0.2);
    let cfg = TraceConfig::default();
    let along_u = parallel_family(&chart, seed);
    for family in [Family::One, Family::Two] {
        let line = trace_principal_line(&chart, seed, family, 0.5, &cfg).unwrap();
        assert_eq!(line.stop, StopReason::TargetLength);
        for s in &line.samples {
            if family == along_u {
                assert_abs_diff_eq!(s.y, seed.y, epsilon = 1e-6);
            } else {
                assert_abs_diff_eq!(s.x, seed.x, epsilon = 1e-6);
            }
        }
    }
}

#[test]
fn torus_parallel_closes() {
    let chart = SurfaceChart::torus(2.0, 0.5);
    let seed = Uv::new(0.0, 1.0);
    let family = parallel_family(&chart, seed);
    let circumference = 2.0 * PI * (2.0 + 0.5 * 1.0_f64.cos());
    let line = trace_principal_line(&chart, seed, family, circumference, &TraceConfig::default()).unwrap();
    let (end_uv, _) = line.point_at(circumference).unwrap();
    assert_abs_diff_eq!((chart.position(end_uv) - chart.position(seed)).norm(), 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(end_uv.y, seed.y, epsilon = 1e-6);
}

#[test]
fn tracing_stops_at_the_umbilic() {
    let chart = UmbilicPattern::Lemon.chart();
    let seed = Uv::new(0.05, 0.0);
    let cfg = TraceConfig::default();
    let family = if chart.principal_direction_field(seed, Family::One, None).unwrap().x.abs() > 0.9 {
        Family::One
    } else {
        Family::Two
    };
    let line = trace_from(&chart, seed, &Vec3::new(-1.0, 0.0, 0.0), family, 0.1, &cfg).unwrap();
    assert_eq!(line.stop, StopReason::UmbilicRadius);
    let last = line.samples.last().unwrap();
    assert!(last.norm() <= 2.0 * cfg.umbilic_stop_radius, "{last:?}");
    assert!(line.length() < 0.06);
}

#[test]
fn traced_net_on_triaxial_ellipsoid() {
    let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
    let seeds = SeedGrid::uniform(Uv::new(0.4, 0.3), 0.05, 3);
    let cfg = TraceConfig { step: 2e-3, sample_spacing: 1e-2, ..TraceConfig::default() };
    let net = traced_net(&chart, &seeds, &cfg).unwrap();
    assert!(net.validate().is_empty(), "{:?}", net.validate());
    assert_eq!(net.vertices.len(), 49);
    assert_eq!(net.interior_vertices().len(), 25);
    // every edge stays on its principal line
    for e in &net.edges {
        let mid = e.samples[e.samples.len() / 2];
        let t = e.samples[e.samples.len() / 2 + 1] - e.samples[e.samples.len() / 2 - 1];
        let j = chart.jet(mid);
        let tangent = (j.du * t.x + j.dv * t.y).normalize();
        let d = chart.principal_frame(mid).unwrap().direction(e.family);
        assert!(tangent.dot(&d).abs() > 1.0 - 1e-6);
    }
}

#[test]
fn umbilic_nets_have_one_singular_vertex() {
    for p in UmbilicPattern::ALL {
        let net = umbilic_net(&p.chart(), p, 4, 6).unwrap();
        assert!(net.validate().is_empty(), "{p:?}: {:?}", net.validate());
        assert!(net.vertices[0].point.umbilic());
        assert!(net.valence(0) >= 3);
        for v in net.interior_vertices().into_iter().filter(|&v| v != 0) {
            assert_eq!(net.valence(v), 4);
        }
    }
}

#[test]
fn representative_cubics_scan_to_their_pattern() {
    for p in UmbilicPattern::ALL {
        let scan = scan_umbilic(&p.chart(), Uv::zeros(), 0.01).unwrap();
        assert_eq!(scan.pattern(), Some(p));
    }
}

/// Index sign and number of radial principal lines from the cubic alone.
/// With `h = c30 x³ + c21 x²y + c12 xy² + c03 y³`, the traceless Hessian is
/// `(A, B) = (h_xx − h_yy, 2 h_xy)`, linear in the position.
fn oracle(c: &MongeCubic) -> (f64, usize, bool) {
    let (a1, a2) = (6.0 * c.c30 - 2.0 * c.c12, 2.0 * c.c21 - 6.0 * c.c03);
    let (b1, b2) = (4.0 * c.c21, 4.0 * c.c12);
    let det = a1 * b2 - a2 * b1;
    let g = |t: f64| {
        let (a, b) = (a1 * t.cos() + a2 * t.sin(), b1 * t.cos() + b2 * t.sin());
        a * (2.0 * t).sin() - b * (2.0 * t).cos()
    };
    let n = 7200;
    let vals: Vec<f64> = (0..=n).map(|i| g(PI * i as f64 / n as f64)).collect();
    let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let count = |shift: f64| {
        (0..n)
            .filter(|&i| ((vals[i] + shift) > 0.0) != ((vals[i + 1] + shift) > 0.0))
            .count()
    };
    let roots = count(0.0);
    let stable = count(0.05 * scale) == roots && count(-0.05 * scale) == roots;
    (det.signum() * 0.5, roots, stable && det.abs() > 0.5 && vals[0].abs() > 0.05 * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scans_agree_with_the_cubic(c in prop::array::uniform4(-2.0..2.0f64)) {
        let cubic = MongeCubic { kappa: 1.0, c30: c[0], c21: c[1], c12: c[2], c03: c[3] };
        let (index, roots, stable) = oracle(&cubic);
        prop_assume!(stable);
        let scan = scan_umbilic(&SurfaceChart::monge(cubic, 0.25), Uv::zeros(), 0.005).unwrap();
        prop_assert!((scan.index - index).abs() < 0.1, "index {} vs {}", scan.index, index);
        let expected = match (index > 0.0, roots) {
            (false, _) => UmbilicPattern::Star,
            (true, 1) => UmbilicPattern::Lemon,
            _ => UmbilicPattern::Monstar,
        };
        prop_assert_eq!(scan.pattern(), Some(expected));
    }
}
