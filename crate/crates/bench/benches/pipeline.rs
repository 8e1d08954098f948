use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use posenet::dataset::GenerateConfig;
use posenet::loss::{random_configuration, LossKind, LossSpec};
use posenet::mesh::{sample_surface, shapes};
use posenet::net::train::Sample;
use posenet::net::{backward, forward_input, init_params, input_from_mask, LossConfig};
use posenet::render::{rasterize_silhouette, render_shaded, sample_pose_with_mask, PoseSamplerConfig, DEFAULT_LIGHT};
use posenet::NetworkConfig;

fn rendering(c: &mut Criterion) {
    let mesh = shapes::tripod();
    let k = GenerateConfig::default().intrinsics;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (pose, _) = sample_pose_with_mask(&PoseSamplerConfig::default(), &mesh, &k, &mut rng).unwrap();
    c.bench_function("rasterize_silhouette_80x60", |b| {
        b.iter(|| rasterize_silhouette(black_box(&mesh), black_box(&pose), &k).unwrap())
    });
    c.bench_function("render_shaded_80x60", |b| {
        b.iter(|| render_shaded(black_box(&mesh), black_box(&pose), &k, DEFAULT_LIGHT).unwrap())
    });
    c.bench_function("sample_pose_with_mask", |b| {
        b.iter(|| sample_pose_with_mask(&PoseSamplerConfig::default(), &mesh, &k, &mut rng).unwrap())
    });
}

fn losses(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (pred, target, cloud) = random_configuration(&mut rng, 1000);
    let mut group = c.benchmark_group("loss_1000_points");
    for kind in LossKind::ALL {
        let spec = LossSpec::new(kind);
        group.bench_with_input(BenchmarkId::from_parameter(kind.name()), &spec, |b, spec| {
            b.iter(|| spec.evaluate(black_box(&pred), &target, &cloud).unwrap())
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let net = NetworkConfig {
        padding: 1,
        ..NetworkConfig::default()
    };
    let params = init_params(&net).unwrap();
    let mesh = shapes::tripod();
    let cloud = sample_surface(&mesh, 1000, 0).unwrap().points;
    let k = GenerateConfig::default().intrinsics;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data: Vec<_> = (0..32)
        .map(|_| {
            let (pose, mask) = sample_pose_with_mask(&PoseSamplerConfig::default(), &mesh, &k, &mut rng).unwrap();
            (input_from_mask(&mask), pose)
        })
        .collect();
    c.bench_function("forward_single", |b| {
        b.iter(|| forward_input(&params, black_box(&data[0].0), 0).unwrap())
    });
    let spec = LossConfig::default().spec().unwrap();
    let clouds = vec![cloud];
    let batch: Vec<Sample<'_>> = data
        .iter()
        .map(|(x, pose)| Sample {
            input: x,
            class: 0,
            target: *pose,
        })
        .collect();
    c.bench_function("forward_backward_batch32", |b| {
        b.iter(|| backward(&params, black_box(&batch), &spec, &clouds).unwrap())
    });
}

criterion_group!(benches, rendering, losses, network);
criterion_main!(benches);
