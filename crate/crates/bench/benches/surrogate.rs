use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use raywave::{build, load_scene, solve_radial, Point2, Scene, SourceSpec};

fn scene(name: &str) -> Scene {
    load_scene(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../scenes")
            .join(name),
    )
    .unwrap()
}

fn bench_radial(c: &mut Criterion) {
    let src = SourceSpec::gaussian(0.2, 1.0);
    c.bench_function("radial/gaussian_1001x2000", |b| {
        b.iter(|| solve_radial(black_box(&src), 5.0, 1001, 2000).unwrap())
    });
}

fn bench_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    for name in ["wedge1", "wedge2", "wedge3", "wedge4", "cavity"] {
        let sc = scene(&format!("{name}.toml"));
        let psi = sc.run.solve_psi(&sc.source).unwrap();
        let cfg = sc.run.build_config(sc.source.radius);
        g.bench_function(name, |b| {
            b.iter(|| build(black_box(&sc.domain), &psi, &sc.source, &cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate");
    for name in ["wedge1", "wedge3", "cavity"] {
        let sc = scene(&format!("{name}.toml"));
        let psi = sc.run.solve_psi(&sc.source).unwrap();
        let s = build(
            &sc.domain,
            &psi,
            &sc.source,
            &sc.run.build_config(sc.source.radius),
        )
        .unwrap();
        let (lo, hi) = s.domain.bounding_box();
        let pts: Vec<Point2> = (0..64)
            .flat_map(|j| (0..64).map(move |i| (i, j)))
            .map(|(i, j)| {
                Point2::new(
                    lo.x1 + (hi.x1 - lo.x1) * (i as f64 + 0.5) / 64.0,
                    lo.x2 + (hi.x2 - lo.x2) * (j as f64 + 0.5) / 64.0,
                )
            })
            .filter(|p| s.domain.contains(*p))
            .collect();
        let t = sc.run.t_max;
        g.bench_function(format!("{name}/{}_points", pts.len()), |b| {
            b.iter(|| {
                pts.iter()
                    .map(|p| s.evaluate(*p, black_box(t)).unwrap())
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_radial, bench_build, bench_evaluate);
criterion_main!(benches);
