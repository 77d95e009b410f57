use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use raywave::geometry::Ring;
use raywave::surrogate::{
    edge_time, spawn_diffraction, spawn_reflection, vertex_time, SurrogateFile,
};
use raywave::*;

const T: f64 = 5.0;
const R: f64 = 1.0;

fn psi() -> &'static FreeSpaceGrid {
    static PSI: OnceLock<FreeSpaceGrid> = OnceLock::new();
    PSI.get_or_init(|| solve_radial(&SourceSpec::gaussian(0.2, R), T, 1001, 2000).unwrap())
}

fn wedge(alpha_pi: f64, theta_pi: f64) -> Domain {
    Domain::wedge(
        alpha_pi * PI,
        theta_pi * PI,
        4.0,
        BoundaryCondition::Neumann,
        T + R + 1.0,
    )
    .unwrap()
}

fn build_wedge(alpha_pi: f64, theta_pi: f64) -> Surrogate {
    build(
        &wedge(alpha_pi, theta_pi),
        psi(),
        &SourceSpec::gaussian(0.2, R),
        &BuildConfig::new(T, R),
    )
    .unwrap()
}

fn wedges() -> &'static [Surrogate] {
    static W: OnceLock<Vec<Surrogate>> = OnceLock::new();
    W.get_or_init(|| {
        [(1.5, 0.313), (1.62, 0.192), (0.879, 0.434), (0.879, 1.04)]
            .iter()
            .map(|&(a, t)| build_wedge(a, t))
            .collect()
    })
}

/// Single sound-hard wall `x2 = -depth` below the source.
fn wall(depth: f64, bc: BoundaryCondition) -> Domain {
    let l = T + R + 1.0;
    let ring = Ring {
        points: vec![
            Point2::new(-l, -depth),
            Point2::new(l, -depth),
            Point2::new(l, l),
            Point2::new(-l, l),
        ],
        bcs: vec![bc; 4],
        physical: vec![true, false, false, false],
    };
    Domain::new(ring, vec![], true).unwrap()
}

fn wedge_vertex(d: &Domain) -> &VertexInfo {
    d.vertices
        .iter()
        .find(|v| d.edges[v.adjacent_edges.0].physical && d.edges[v.adjacent_edges.1].physical)
        .unwrap()
}

#[test]
fn component_counts_of_the_four_wedges() {
    let n: Vec<usize> = wedges().iter().map(|s| s.len()).collect();
    assert_eq!(n, vec![5, 8, 4, 3]);
    assert_eq!(wedges()[0].count(SupportKind::Diffraction), 0);
    assert_eq!(wedges()[2].count(SupportKind::Diffraction), 1);
}

#[test]
fn free_space_has_one_component() {
    let d = Domain::free_space(T + R + 1.0).unwrap();
    let s = build(
        &d,
        psi(),
        &SourceSpec::gaussian(0.2, R),
        &BuildConfig::new(T, R),
    )
    .unwrap();
    assert_eq!(s.len(), 1);
    let c = &s.components[0];
    assert_eq!((c.kind, c.r, c.parent), (SupportKind::Source, 0.0, None));
}

#[test]
fn edge_and_vertex_times_of_wedge_one() {
    let d = wedge(1.5, 0.313);
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let v = wedge_vertex(&d);
    let reference_face = v.adjacent_edges.1;
    let other_face = v.adjacent_edges.0;
    assert!((edge_time(&src, reference_face, &d) - 4.0 * (0.313 * PI).sin()).abs() < 1e-12);
    assert!((edge_time(&src, reference_face, &d) - 3.3293).abs() < 1e-4);
    assert!((edge_time(&src, other_face, &d) - 4.0 * (0.313 * PI).cos()).abs() < 1e-12);
    assert!((vertex_time(&src, v, &d) - 4.0).abs() < 1e-12);
    for s in wedges() {
        let v = wedge_vertex(&s.domain);
        assert!((vertex_time(&s.components[0], v, &s.domain) - 4.0).abs() < 1e-12);
    }
}

#[test]
fn edge_time_of_perpendicular_wall_is_distance() {
    let d = wall(1.7, BoundaryCondition::Neumann);
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    assert!((edge_time(&src, 0, &d) - 1.7).abs() < 1e-12);
    assert!(edge_time(&src, 1, &d).is_infinite());
}

fn room_with_pillar() -> Domain {
    let outer = Ring::uniform(
        vec![
            Point2::new(-4.0, -3.0),
            Point2::new(4.0, -3.0),
            Point2::new(4.0, 3.0),
            Point2::new(-4.0, 3.0),
        ],
        BoundaryCondition::Neumann,
    );
    let pillar = Ring::uniform(
        vec![
            Point2::new(2.0, -0.5),
            Point2::new(3.0, -0.5),
            Point2::new(3.0, 0.5),
            Point2::new(2.0, 0.5),
        ],
        BoundaryCondition::Neumann,
    );
    Domain::new(outer, vec![pillar], false).unwrap()
}

#[test]
fn hidden_edges_and_vertices_are_never_reached() {
    let d = room_with_pillar();
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let far = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(3.0, 0.5))
        .unwrap();
    assert!(vertex_time(&src, far, &d).is_infinite());
    let back = d
        .edges
        .iter()
        .find(|e| e.a.x1 == 3.0 && e.b.x1 == 3.0)
        .unwrap();
    assert!(edge_time(&src, back.index, &d).is_infinite());
}

#[test]
fn diffraction_component_reaches_visible_vertices() {
    let d = room_with_pillar();
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let near = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(2.0, 0.5))
        .unwrap();
    let other = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(3.0, 0.5))
        .unwrap();
    let hidden = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(3.0, -0.5))
        .unwrap();
    let diff = spawn_diffraction(&src, near, &d, &DiffractionParams::default())
        .unwrap()
        .unwrap();
    assert_eq!(diff.r, near.position.norm());
    assert!((vertex_time(&diff, other, &d) - (diff.r + 1.0)).abs() < 1e-12);
    assert!(vertex_time(&diff, hidden, &d).is_infinite());
    assert!(vertex_time(&diff, near, &d).is_infinite());
}

#[test]
fn image_sources_of_a_wall() {
    let src = FieldComponent::source(Point2::new(0.0, 2.0));
    for (bc, sign) in [
        (BoundaryCondition::Neumann, 1.0),
        (BoundaryCondition::Dirichlet, -1.0),
    ] {
        let d = wall(0.0, bc);
        let c = spawn_reflection(&src, 0, &d).unwrap();
        assert!(c.xi.dist(Point2::new(0.0, -2.0)) < 1e-12);
        assert_eq!(c.zeta.sign, sign);
        assert_eq!(c.r, 0.0);
        assert_eq!(c.kind, SupportKind::Reflection);
    }
}

#[test]
fn reflection_of_unlit_edge_is_an_error() {
    let d = room_with_pillar();
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let back = d
        .edges
        .iter()
        .find(|e| e.a.x1 == 3.0 && e.b.x1 == 3.0)
        .unwrap();
    assert!(spawn_reflection(&src, back.index, &d).is_err());
}

#[test]
fn nested_reflection_weights_compose_in_chain_order() {
    let d = &room_with_pillar();
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let corner = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(2.0, 0.5))
        .unwrap();
    let diff = &spawn_diffraction(&src, corner, d, &DiffractionParams::default())
        .unwrap()
        .unwrap();
    let mut first = (0..d.n_edges())
        .find_map(|e| spawn_reflection(diff, e, d).ok())
        .expect("an edge lit by the diffracted wave");
    first.index = 2;
    let (second_edge, second) = (0..d.n_edges())
        .find_map(|e| spawn_reflection(&first, e, d).ok().map(|c| (e, c)))
        .expect("an edge lit by the reflected wave");
    assert_eq!(first.zeta.angle_maps.len(), 1);
    assert_eq!(second.zeta.angle_maps.len(), 2);

    // ζ_child(y) = ±ζ_parent(M y), M the mirror across the reflecting line
    let mirror = |e: usize, y: Point2| {
        let edge = &d.edges[e];
        let u = (edge.b - edge.a) * (1.0 / edge.length());
        u * (2.0 * y.dot(u)) - y
    };
    let sign = |e: usize| d.edges[e].bc.sign();
    let e1 = first.support.edge.unwrap();
    for k in 0..100 {
        let y = Point2::from_polar(1.0 + 0.01 * k as f64, 2.0 * PI * (k as f64 + 0.5) / 100.0);
        let direct =
            sign(second_edge) * sign(e1) * diff.zeta.eval(mirror(e1, mirror(second_edge, y)));
        let composed = second.zeta.eval(y);
        assert!(
            (direct - composed).abs() <= 1e-12 * direct.abs().max(1.0),
            "k {k}: {direct} vs {composed}"
        );
        let once = sign(e1) * diff.zeta.eval(mirror(e1, y));
        assert!((once - first.zeta.eval(y)).abs() <= 1e-12 * once.abs().max(1.0));
    }
}

#[test]
fn integer_index_vertex_spawns_nothing() {
    let d = wedge(1.5, 0.313);
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let v = wedge_vertex(&d);
    assert!(
        spawn_diffraction(&src, v, &d, &DiffractionParams::default())
            .unwrap()
            .is_none()
    );
}

#[test]
fn diffraction_outside_support_is_an_error() {
    let d = room_with_pillar();
    let src = FieldComponent::source(Point2::new(0.0, 0.0));
    let hidden = d
        .vertices
        .iter()
        .find(|v| v.position == Point2::new(3.0, -0.5))
        .unwrap();
    assert!(spawn_diffraction(&src, hidden, &d, &DiffractionParams::default()).is_err());
}

#[test]
fn diffraction_child_is_synchronised_and_scaled() {
    let s = &wedges()[2];
    let diff = s
        .components
        .iter()
        .find(|c| c.kind == SupportKind::Diffraction)
        .unwrap();
    let parent = &s.components[diff.parent.unwrap()];
    assert_eq!(diff.r, parent.r + parent.xi.dist(diff.xi));
    assert_eq!(diff.zeta.scale, parent.zeta.eval(diff.xi - parent.xi));
    assert_eq!(diff.r, 4.0);
}

#[test]
fn children_are_born_after_parents() {
    for s in wedges() {
        for c in &s.components {
            assert!(c.r >= 0.0);
            if let Some(p) = c.parent {
                assert!(c.birth_time >= s.components[p].birth_time - 1e-12);
            }
        }
    }
}

#[test]
fn single_wall_matches_the_image_method() {
    let d = wall(1.5, BoundaryCondition::Neumann);
    let s = build(
        &d,
        psi(),
        &SourceSpec::gaussian(0.2, R),
        &BuildConfig::new(T, R),
    )
    .unwrap();
    assert_eq!(s.len(), 2);
    let image = Point2::new(0.0, -3.0);
    let mut err: f64 = 0.0;
    let mut peak: f64 = 0.0;
    let golden = 0.618_033_988_749_895;
    for k in 0..100 {
        let a = (k as f64 * golden).fract();
        let b = (k as f64 * golden * golden).fract();
        let c = (k as f64 * 0.754_877_666_246_693).fract();
        let x = Point2::new(-5.0 + 10.0 * a, -1.5 + 6.0 * b);
        let t = T * c;
        let exact = psi().sample(x.norm(), t).unwrap() + psi().sample(x.dist(image), t).unwrap();
        err = err.max((s.evaluate(x, t).unwrap() - exact).abs());
        peak = peak.max(exact.abs());
    }
    assert!(peak > 0.0);
    assert!(err <= 1e-6 * peak, "max error {err}, peak {peak}");
}

#[test]
fn geometrical_optics_and_indicator() {
    let s1 = &wedges()[0];
    let s3 = &wedges()[2];
    let mut seen = 0.0f64;
    for i in 0..40 {
        for j in 0..40 {
            let x = Point2::new(-6.0 + 0.3 * i as f64, -6.0 + 0.3 * j as f64);
            if !s1.domain.contains(x) || !s3.domain.contains(x) {
                continue;
            }
            assert_eq!(s1.error_indicator(x, 5.0).unwrap(), 0.0);
            assert_eq!(
                s1.evaluate_go(x, 5.0).unwrap(),
                s1.evaluate(x, 5.0).unwrap()
            );
            let full = s3.evaluate(x, 5.0).unwrap();
            let go = s3.evaluate_go(x, 5.0).unwrap();
            let ind = s3.error_indicator(x, 5.0).unwrap();
            assert!((ind - (full - go).abs()).abs() <= 1e-12);
            seen = seen.max(ind);
        }
    }
    assert!(seen > 1e-3);
}

#[test]
fn evaluation_range_checks() {
    let s = &wedges()[0];
    assert!(matches!(
        s.evaluate(Point2::new(0.0, 0.0), 5.5),
        Err(Error::TimeOutOfRange { .. })
    ));
    let inside_wedge = wedge_vertex(&s.domain).position * 1.5;
    assert!(matches!(
        s.evaluate(inside_wedge, 1.0),
        Err(Error::OutsideDomain { .. })
    ));
    assert!("fancy".parse::<EvalMode>().is_err());
}

#[test]
fn field_is_causal() {
    for s in wedges() {
        for k in 0..200 {
            let x = Point2::from_polar(0.5 + 0.03 * k as f64, 1.7 * k as f64);
            if !s.domain.contains(x) {
                continue;
            }
            let first = s
                .components
                .iter()
                .filter(|c| s.domain.support_contains(&c.support, x))
                .map(|c| x.dist(c.xi) + c.r)
                .fold(f64::INFINITY, f64::min);
            let t = first - R - 5.0 * s.psi.dx - 1e-9;
            if (0.0..=T).contains(&t) {
                assert_eq!(s.evaluate(x, t).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn pruning_keeps_a_superset_at_lower_tolerance() {
    let d = wedge(1.62, 0.192);
    let src = SourceSpec::gaussian(0.2, R);
    let fine = build(&d, psi(), &src, &BuildConfig::new(T, R).with_tol(1e-3)).unwrap();
    let coarse = build(&d, psi(), &src, &BuildConfig::new(T, R).with_tol(2.5e-2)).unwrap();
    let keys = |s: &Surrogate| {
        s.components
            .iter()
            .map(|c| c.provenance.clone())
            .collect::<Vec<_>>()
    };
    let f = keys(&fine);
    assert!(keys(&coarse).iter().all(|k| f.contains(k)));
    for (s, tol) in [(&fine, 1e-3), (&coarse, 2.5e-2)] {
        assert!(s.discarded.iter().all(|c| c.magnitude_bound < tol));
    }
}

#[test]
fn component_limit_is_an_error() {
    let d = wedge(1.62, 0.192);
    let mut cfg = BuildConfig::new(T, R);
    cfg.max_components = 3;
    assert!(matches!(
        build(&d, psi(), &SourceSpec::gaussian(0.2, R), &cfg),
        Err(Error::TooManyComponents(3))
    ));
}

#[test]
fn json_round_trip_reproduces_evaluations() {
    let s = &wedges()[1];
    let text = s.to_json().unwrap();
    let back = Surrogate::from_json(&text).unwrap();
    assert_eq!(back.components, s.components);
    for k in 0..300 {
        let x = Point2::from_polar(0.2 + 0.02 * k as f64, 0.9 * k as f64);
        if !s.domain.contains(x) {
            continue;
        }
        let t = 5.0 * (k as f64 / 300.0);
        let (a, b) = (s.evaluate(x, t).unwrap(), back.evaluate(x, t).unwrap());
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{a} vs {b}");
    }
    let file: SurrogateFile = serde_json::from_str(&text).unwrap();
    assert_eq!(file.format, "raywave-surrogate");
    assert_eq!(file.components.len(), 8);
}

#[test]
fn changing_mu_bar_keeps_the_component_set() {
    let s = &wedges()[2];
    let t = s.with_mu_bar(3.0).unwrap();
    assert_eq!(t.len(), s.len());
    assert_eq!(t.config.diffraction.mu_bar, 3.0);
    for (a, b) in s.components.iter().zip(&t.components) {
        assert_eq!((a.xi, a.r, &a.provenance), (b.xi, b.r, &b.provenance));
    }
    let diff = t
        .components
        .iter()
        .find(|c| c.kind == SupportKind::Diffraction)
        .unwrap();
    assert_eq!(diff.zeta.table().unwrap().mu_bar, 3.0);
    assert!(s.with_mu_bar(0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn weights_are_positively_homogeneous(angle in 0.0..(2.0 * PI), len in 0.01f64..10.0) {
        let y = Point2::from_polar(len, angle);
        for s in &wedges()[1..] {
            for c in &s.components {
                let w = c.zeta.eval(y);
                for lambda in [0.5, 2.0, 10.0] {
                    let v = c.zeta.eval(y * lambda);
                    prop_assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "λ = {}: {} vs {}", lambda, v, w);
                }
            }
        }
    }
}
