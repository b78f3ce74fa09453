use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use curvenet::netgen::revolution_net;
use curvenet::star::{build_star, StarEdge, VertexStar};
use curvenet::surface::{Family, SurfaceChart, Uv, Vec3};

#[test]
fn revolution_stars() {
    let chart = SurfaceChart::spheroid(1.3, 0.9);
    let net = revolution_net(&chart, 24, 13).unwrap();
    for v in net.interior_vertices() {
        let star = build_star(&net, v).unwrap();
        assert_eq!(star.valence(), 4);
        assert!(star.fan.iter().all(|&f| f));
        assert!(!star.boundary);
        let longest = net.incident[v].iter().map(|&e| net.edges[e].length).fold(0.0, f64::max);
        assert_abs_diff_eq!(star.epsilon(), longest, epsilon = 1e-15);
        // families alternate around a valence-four vertex
        for i in 0..4 {
            assert_ne!(star.edges[i].family, star.next(i).family);
        }
    }
}

#[test]
fn boundary_stars_have_open_fans() {
    let chart = SurfaceChart::sphere(1.0);
    let net = revolution_net(&chart, 16, 7).unwrap();
    let v = (0..net.vertices.len()).find(|&v| net.is_boundary(v)).unwrap();
    let star = build_star(&net, v).unwrap();
    assert!(star.boundary);
    assert!(star.fan.iter().any(|&f| !f));
}

fn planar_star(vectors: &[(f64, f64)], scale: f64) -> VertexStar {
    let frame = SurfaceChart::plane(1.0).principal_frame(Uv::zeros()).unwrap();
    let edges = vectors
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| StarEdge {
            edge: i,
            family: if i % 2 == 0 { Family::One } else { Family::Two },
            vector: Vec3::new(scale * x, scale * y, 0.0),
            length: scale * (x * x + y * y).sqrt(),
        })
        .collect();
    VertexStar::from_parts(0, Vec3::zeros(), frame, edges, vec![true; vectors.len()], false).unwrap()
}

proptest! {
    #[test]
    fn regularity_is_scale_free(
        a in 0.2..2.0f64, b in 0.2..2.0f64, c in 0.2..2.0f64, d in 0.2..2.0f64,
        skew in -0.3..0.3f64, scale in 0.01..100.0f64,
    ) {
        let v = [(a, skew * a), (-skew * b, b), (-c, 0.0), (0.0, -d)];
        let s1 = planar_star(&v, 1.0);
        let s2 = planar_star(&v, scale);
        let r1 = s1.shape_regularity(s1.epsilon());
        prop_assert!(r1 >= 1.0);
        prop_assert!((s2.shape_regularity(s2.epsilon()) - r1).abs() < 1e-9 * r1);
        // the longest edge bounds ρ from below by the length ratio
        let shortest = [a * (1.0 + skew * skew).sqrt(), b * (1.0 + skew * skew).sqrt(), c, d]
            .into_iter()
            .fold(f64::MAX, f64::min);
        prop_assert!(r1 >= s1.epsilon() / shortest - 1e-12);
        prop_assert!(s1.angle_defect().abs() < 1e-12);
    }
}
