use approx::assert_abs_diff_eq;
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

use curvenet::curvature::{
    dihedral_from_hinge, hinge_area, integrated_edge_curvature, principal_estimates,
    rotate_in_triangle, select_area_maximizing, star_curvatures, Selection, Variant,
};
use curvenet::netgen::revolution_net;
use curvenet::star::build_star;
use curvenet::surface::SurfaceChart;
use curvenet::Error;

type V = Vector3<f64>;

fn vec3() -> impl Strategy<Value = V> {
    prop::array::uniform3(-1.0..1.0f64).prop_map(V::from)
}

fn hinge() -> impl Strategy<Value = (V, V, V)> {
    (vec3(), vec3(), vec3()).prop_filter("nondegenerate hinge", |(e, f, g)| {
        let ok = |a: &V, b: &V| a.cross(b).norm() > 0.1 * a.norm() * b.norm();
        e.norm() > 0.1 && f.norm() > 0.1 && g.norm() > 0.1 && ok(e, f) && ok(e, g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn hinge_quantities_are_similarity_invariant(
        (e, f, g) in hinge(),
        axis in vec3(),
        angle in -3.0..3.0f64,
        lambda in 0.1..10.0f64,
    ) {
        prop_assume!(axis.norm() > 0.1);
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let (e2, f2, g2) = (lambda * (r * e), lambda * (r * f), lambda * (r * g));
        let theta = dihedral_from_hinge(&e, &f, &g);
        prop_assert!((dihedral_from_hinge(&e2, &f2, &g2) - theta).abs() < 1e-9);
        let a = hinge_area(&e, &f, &g).area;
        prop_assert!((hinge_area(&e2, &f2, &g2).area - lambda * lambda * a).abs() < 1e-9 * lambda * lambda * (1.0 + a.abs()));
        let k = rotate_in_triangle(&e, &f) + rotate_in_triangle(&e, &g);
        let k2 = rotate_in_triangle(&e2, &f2) + rotate_in_triangle(&e2, &g2);
        prop_assert!((k2 - lambda * (r * k)).norm() < 1e-9 * lambda * (1.0 + k.norm()));
    }

    #[test]
    fn hinge_area_splits_into_triangles((e, f, g) in hinge()) {
        let a = hinge_area(&e, &f, &g);
        prop_assert!((a.area - a.area_f - a.area_g).abs() < 1e-14 * (1.0 + a.area.abs()));
        // each piece is ¼|e|² cot of the opposite angle
        let e2 = e.norm_squared();
        prop_assert!((a.area_f - 0.25 * e2 / a.alpha.tan()).abs() < 1e-9 * (1.0 + a.area_f.abs()));
        prop_assert!((a.area_g - 0.25 * e2 / a.beta.tan()).abs() < 1e-9 * (1.0 + a.area_g.abs()));
        prop_assert_eq!(a.sign as f64, a.area.signum());
    }

    #[test]
    fn reversing_the_hinge_flips_the_angle((e, f, g) in hinge()) {
        // swapping the two faces mirrors the hinge
        let theta = dihedral_from_hinge(&e, &f, &g);
        prop_assert!((dihedral_from_hinge(&e, &g, &f) + theta).abs() < 1e-12);
    }

    #[test]
    fn variants_agree_to_third_order(theta in -1.0..1.0f64, chord in 0.01..2.0f64) {
        let angle = integrated_edge_curvature(theta, chord, Variant::Angle).unwrap();
        let sin = integrated_edge_curvature(theta, chord, Variant::Sin).unwrap();
        let tan = integrated_edge_curvature(theta, chord, Variant::Tan).unwrap();
        let t3 = theta.abs().powi(3) * chord;
        // 2 sin(θ/2) = θ − θ³/24 + …, 2 tan(θ/2) = θ + θ³/12 + …
        prop_assert!((sin - angle).abs() <= t3 / 24.0 + 1e-15);
        prop_assert!((tan - angle).abs() <= t3 / 12.0 * (1.0 + theta * theta) + 1e-15);
        prop_assert!(sin.abs() <= angle.abs() + 1e-15 && angle.abs() <= tan.abs() + 1e-15);
    }
}

#[test]
fn tan_overflows_near_pi() {
    let err = integrated_edge_curvature(std::f64::consts::PI, 1.0, Variant::Tan).unwrap_err();
    assert!(matches!(err, Error::VariantOverflow { .. }));
}

#[test]
fn sphere_estimates_are_close_to_one() {
    let chart = SurfaceChart::sphere(1.0);
    let net = revolution_net(&chart, 64, 25).unwrap();
    let v = net.interior_vertices()[40];
    let star = build_star(&net, v).unwrap();
    for variant in Variant::ALL {
        let est = principal_estimates(&star, variant).unwrap();
        assert_abs_diff_eq!(est.k1, 1.0, epsilon = 2e-2);
        assert_abs_diff_eq!(est.k2, 1.0, epsilon = 2e-2);
        assert!(est.area > 0.0);
    }
}

#[test]
fn area_maximizing_edges_per_family() {
    let chart = SurfaceChart::torus(2.0, 0.5);
    let net = revolution_net(&chart, 48, 24).unwrap();
    let star = build_star(&net, net.interior_vertices()[5]).unwrap();
    let curvs = star_curvatures(&star).unwrap();
    match select_area_maximizing(&curvs, false) {
        Selection::Families { family1, family2 } => {
            let (family1, family2) = (family1.unwrap(), family2.unwrap());
            assert_ne!(curvs[family1].family, curvs[family2].family);
            for c in &curvs {
                let best = if c.family == curvs[family1].family { family1 } else { family2 };
                assert!(c.area <= curvs[best].area * (1.0 + 1e-12));
            }
        }
        Selection::Umbilic(_) => panic!("torus has no umbilics"),
    }
}
