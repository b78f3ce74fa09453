use approx::assert_abs_diff_eq;
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

use curvenet::surface::{Family, MongeCubic, SurfaceChart, Uv};

fn charts() -> Vec<SurfaceChart> {
    vec![
        SurfaceChart::torus(2.0, 0.5),
        SurfaceChart::spheroid(1.3, 0.9),
        SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0),
        SurfaceChart::monge(
            MongeCubic { kappa: 0.7, c30: 0.4, c21: -0.3, c12: 0.2, c03: 0.5 },
            0.5,
        ),
    ]
}

/// Parameter point strictly inside the domain from unit-square coordinates.
fn inside(chart: &SurfaceChart, s: f64, t: f64) -> Uv {
    let d = chart.domain;
    Uv::new(
        d.u.0 + (0.05 + 0.9 * s) * d.width_u(),
        d.v.0 + (0.05 + 0.9 * t) * d.width_v(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_is_orthonormal_eigenbasis(which in 0usize..4, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let chart = charts()[which];
        let uv = inside(&chart, s, t);
        let f = chart.principal_frame(uv).unwrap();
        prop_assert!(f.kappa1 <= f.kappa2);
        prop_assert!((f.v1.norm() - 1.0).abs() < 1e-12);
        prop_assert!(f.v1.dot(&f.v2).abs() < 1e-12);
        prop_assert!((f.v1.cross(&f.v2) - f.n).norm() < 1e-12);
        let s_op = chart.shape_operator(uv).unwrap().ambient();
        prop_assert!((s_op * f.v1 - f.kappa1 * f.v1).norm() < 1e-9);
        prop_assert!((s_op * f.v2 - f.kappa2 * f.v2).norm() < 1e-9);
    }

    #[test]
    fn curvatures_follow_rigid_motions_and_scaling(
        which in 0usize..4,
        s in 0.0..1.0f64,
        t in 0.0..1.0f64,
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in -3.0..3.0f64,
        lambda in 0.2..5.0f64,
    ) {
        let chart = charts()[which];
        let uv = inside(&chart, s, t);
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 0.1);
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let moved = chart.moved(*r.matrix(), Vector3::new(0.3, -1.0, 2.0)).scaled(lambda);
        let a = chart.principal_frame(uv).unwrap();
        let b = moved.principal_frame(uv).unwrap();
        prop_assert!((b.kappa1 - a.kappa1 / lambda).abs() < 1e-9 * (1.0 + a.kappa1.abs() / lambda));
        prop_assert!((b.kappa2 - a.kappa2 / lambda).abs() < 1e-9 * (1.0 + a.kappa2.abs() / lambda));
        prop_assert!((b.n - r * a.n).norm() < 1e-9);
    }

    #[test]
    fn curvature_gradient_matches_difference_quotient(s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
        let uv = inside(&chart, s, t);
        let f = chart.principal_frame(uv).unwrap();
        prop_assume!(f.delta_kappa() > 1e-2);
        let (g1, g2) = chart.kappa_gradient(uv, &f.v1).unwrap();
        let h = 1e-3;
        let step = chart.tangent_coords(uv, &f.v1).unwrap() * h;
        let plus = chart.principal_frame(uv + step).unwrap();
        let minus = chart.principal_frame(uv - step).unwrap();
        let q1 = (plus.kappa1 - minus.kappa1) / (2.0 * h);
        let q2 = (plus.kappa2 - minus.kappa2) / (2.0 * h);
        prop_assert!((g1 - q1).abs() < 1e-4 * (1.0 + q1.abs()), "{g1} vs {q1}");
        prop_assert!((g2 - q2).abs() < 1e-4 * (1.0 + q2.abs()), "{g2} vs {q2}");
    }
}

#[test]
fn torus_outer_equator() {
    // outer equator of a torus (R, r): normal curvatures 1/(R + r) and 1/r
    let chart = SurfaceChart::torus(2.0, 0.5);
    let f = chart.principal_frame(Uv::new(0.7, 0.0)).unwrap();
    let mut k = [f.kappa1.abs(), f.kappa2.abs()];
    k.sort_by(f64::total_cmp);
    assert_abs_diff_eq!(k[0], 1.0 / 2.5, epsilon = 1e-9);
    assert_abs_diff_eq!(k[1], 2.0, epsilon = 1e-9);
}

#[test]
fn triaxial_pole_values() {
    let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
    // X = (a sin v, b cos v cos u, c cos v sin u); the c-pole is u = π/2, v = 0
    let p = chart.eval_point(Uv::new(std::f64::consts::FRAC_PI_2, 0.0)).unwrap();
    assert_abs_diff_eq!(p.position.z, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p.kappa1().abs(), 0.25, epsilon = 1e-9);
    assert_abs_diff_eq!(p.kappa2().abs(), 1.0 / 2.25, epsilon = 1e-9);
}

#[test]
fn triaxial_umbilics_are_umbilic() {
    let chart = SurfaceChart::triaxial_ellipsoid(2.0, 1.5, 1.0);
    let umbilics = chart.known_umbilics();
    assert_eq!(umbilics.len(), 4);
    for uv in umbilics {
        let f = chart.principal_frame(uv).unwrap();
        assert!(f.umbilic, "{uv:?}: {} {}", f.kappa1, f.kappa2);
    }
}

#[test]
fn direction_field_respects_reference() {
    let chart = SurfaceChart::spheroid(1.3, 0.9);
    let uv = Uv::new(0.4, 0.3);
    for family in [Family::One, Family::Two] {
        let d = chart.principal_direction_field(uv, family, None).unwrap();
        let flipped = chart.principal_direction_field(uv, family, Some(&-d)).unwrap();
        assert_abs_diff_eq!((d + flipped).norm(), 0.0, epsilon = 1e-12);
    }
}

#[test]
fn bounds_dominate_samples() {
    let chart = SurfaceChart::spheroid(1.3, 0.9);
    let b = chart.estimate_bounds(48).unwrap();
    for uv in chart.sample_grid(20) {
        let f = chart.principal_frame(uv).unwrap();
        assert!(f.kappa1.abs().max(f.kappa2.abs()) <= b.k);
    }
}
