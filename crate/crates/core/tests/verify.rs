use curvenet::curvature::star_curvatures;
use curvenet::harness::{analyze_net, ExperimentConfig};
use curvenet::netgen::{conformal_rows, revolution_net, revolution_net_rows};
use curvenet::star::build_star;
use curvenet::surface::{SurfaceChart, Uv};
use curvenet::verify::{
    all_check_names, check_geodesic_identity, evaluate_vertex, ratios_bounded, SkipReason, Summary,
};

#[test]
fn fine_sphere_passes_every_check() {
    let chart = SurfaceChart::sphere(1.0);
    let bounds = chart.estimate_bounds(64).unwrap();
    let net = revolution_net_rows(&chart, 200, &conformal_rows(&chart, 200).unwrap()).unwrap();
    let (results, degenerate) = analyze_net(&net, &bounds);
    assert_eq!(degenerate, 0);
    let mut summary = Summary::default();
    for r in &results {
        assert!(r.metrics.sampling_ok);
        summary.add(&r.report);
    }
    assert_eq!(summary.violations(), 0, "{}", summary.to_text());
    for name in all_check_names() {
        let t = summary.counts[name];
        assert!(t.pass > 0 || t.skip > 0, "{name} never evaluated");
    }
}

#[test]
fn coarse_stars_are_skipped_with_a_reason() {
    let chart = SurfaceChart::torus(2.0, 0.5);
    let bounds = chart.estimate_bounds(64).unwrap();
    let net = revolution_net(&chart, 12, 6).unwrap();
    let v = net.interior_vertices()[0];
    let star = build_star(&net, v).unwrap();
    let metrics = star.metrics(&bounds);
    assert!(!metrics.sampling_ok);
    let report = evaluate_vertex(
        &star,
        &star_curvatures(&star).unwrap(),
        &metrics,
        &bounds,
        &net.vertices[v].point,
    );
    assert!(report.checks.is_empty());
    assert_eq!(report.skipped.len(), all_check_names().len());
    assert!(report.skipped.iter().all(|(_, r)| *r == SkipReason::SamplingViolated));
}

#[test]
fn summary_merge_is_order_independent() {
    let cfg = ExperimentConfig::from_toml(
        "surface = \"spheroid\"\nequatorial_radius = 1.3\npolar_radius = 0.9\nnet = \"conformal\"\nlevels = [320, 320]\n",
    )
    .unwrap();
    let chart = cfg.chart().unwrap();
    let bounds = chart.estimate_bounds(64).unwrap();
    let net = cfg.build_net(&chart, 320).unwrap();
    let (results, _) = analyze_net(&net, &bounds);
    let half = results.len() / 2;
    let part = |rs: &[curvenet::harness::VertexResult]| {
        let mut s = Summary::default();
        for r in rs {
            s.add(&r.report);
        }
        s
    };
    let (a, b) = (part(&results[..half]), part(&results[half..]));
    let ab = a.clone().merge(b.clone());
    let ba = b.merge(a);
    assert_eq!(ab, ba);
    assert_eq!(ab, part(&results));
    assert_eq!(ab.violations(), 0);
}

#[test]
fn geodesic_identity_on_a_spheroid() {
    let chart = SurfaceChart::spheroid(1.3, 0.9);
    let bounds = chart.estimate_bounds(64).unwrap();
    for k in 0..20 {
        let uv = Uv::new(0.3 * k as f64, -1.0 + 0.1 * k as f64);
        let c = check_geodesic_identity(&chart, uv, &bounds).unwrap().unwrap();
        assert!(c.relative_error.pass, "{uv:?}: {} vs {}", c.geodesic, c.quotient);
        assert!(c.bound.pass);
    }
}

#[test]
fn identity_is_undefined_at_umbilics() {
    let chart = SurfaceChart::sphere(1.0);
    let bounds = chart.estimate_bounds(32).unwrap();
    assert!(check_geodesic_identity(&chart, Uv::new(0.1, 0.2), &bounds).unwrap().is_none());
}

#[test]
fn ratio_sequences() {
    assert!(ratios_bounded(&[1.0, 1.4, 1.9, 2.5]));
    assert!(ratios_bounded(&[1.0, 0.2, 0.3, 1.5]));
    assert!(!ratios_bounded(&[1.0, 1.0, 2.0]));
    assert!(ratios_bounded(&[]));
}

#[test]
fn spheroid_ratio_sequences_stay_bounded() {
    let cfg = ExperimentConfig::from_toml(
        "surface = \"spheroid\"\nequatorial_radius = 1.3\npolar_radius = 0.9\nnet = \"conformal\"\nlevels = [320, 400, 480, 560]\n",
    )
    .unwrap();
    let chart = cfg.chart().unwrap();
    let bounds = chart.estimate_bounds(64).unwrap();
    let mut per_ratio: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for &level in &cfg.levels {
        let out = curvenet::harness::run_level(&cfg, &chart, &bounds, level, false).unwrap();
        assert_eq!(out.record.sampling_fraction, 1.0);
        assert_eq!(out.record.violations, 0);
        for (name, r) in out.summary.worst_ratios {
            per_ratio.entry(name).or_default().push(r);
        }
    }
    assert_eq!(per_ratio.len(), 4);
    for (name, seq) in &per_ratio {
        assert_eq!(seq.len(), 4);
        assert!(ratios_bounded(seq), "{name}: {seq:?}");
    }
}
