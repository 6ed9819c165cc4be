use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rangesr::labeling::{build_label_set, PassContext};
use rangesr::meanshift::segment;
use rangesr::planefit::{ransac_plane, Plane, RansacParams, Sample};
use rangesr::raster::segment_stats;
use rangesr::synth::quadrant_scene;
use rangesr::{
    decimate, lift_sparse, super_resolve, Anchor, MsParams, Neighborhood, SrConfig, SrFactor,
    VisibilityPolicy,
};

fn bench_segment(c: &mut Criterion) {
    let scene = quadrant_scene(128, 128);
    let p = MsParams::default();
    c.bench_function("segment 128x128", |b| {
        b.iter(|| segment(black_box(&scene.color), &p).unwrap())
    });
}

fn bench_ransac(c: &mut Criterion) {
    // 200 samples, every fifth one an outlier.
    let samples: Vec<Sample> = (0..200)
        .map(|k| {
            let (x, y) = ((k * 7 % 40) as f64, (k * 13 % 40) as f64);
            let z = 0.5 * x - 1.5 * y + 90.0 + if k % 5 == 0 { 40.0 } else { 0.0 };
            Sample { x, y, z }
        })
        .collect();
    let p = RansacParams::default();
    c.bench_function("ransac 200 samples", |b| {
        b.iter(|| ransac_plane(black_box(&samples), &p).unwrap())
    });
}

fn bench_labeling(c: &mut Criterion) {
    let scene = quadrant_scene(128, 128);
    let f = SrFactor::new(4).unwrap();
    let lr = decimate(&scene.truth, f, Anchor::TopLeft);
    let (range, mask) = lift_sparse(&lr, f, 128, 128, Anchor::TopLeft).unwrap();
    let seg = segment(&scene.color, &MsParams::default()).unwrap();
    let policy = VisibilityPolicy::ObservedOnly;
    let stats = segment_stats(&seg, &scene.color, &mask, policy).unwrap();
    let members = seg.members();
    let labels = build_label_set(&range, &mask, 1.0).unwrap();
    let plane = Plane {
        a: 0.25,
        b: -0.5,
        c: 100.0,
        inlier_count: 0,
    };
    c.bench_function("planar labeling, one pass", |b| {
        b.iter(|| {
            let ctx = PassContext::new(
                &range,
                &mask,
                &seg,
                &stats,
                &members,
                policy,
                Neighborhood::Eight,
            );
            (0..seg.len() as u32)
                .map(|s| ctx.assign_planar_segment(s, &plane, &labels, 0.5).len())
                .sum::<usize>()
        })
    });
}

fn bench_pipeline(c: &mut Criterion) {
    let scene = quadrant_scene(128, 128);
    let cfg = SrConfig::default();
    let lr = decimate(&scene.truth, cfg.factor, cfg.anchor);
    let mut group = c.benchmark_group("super_resolve");
    group.sample_size(10);
    group.bench_function("quadrants 128x128 f=4", |b| {
        b.iter(|| super_resolve(black_box(&lr), &scene.color, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_segment,
    bench_ransac,
    bench_labeling,
    bench_pipeline
);
criterion_main!(benches);
