use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use padenet::layers::{pade_forward, PadeLayerParams};
use padenet::numerics::{conv1d_same, KernelShape};
use padenet::RngStream;
use padenet_bench::random_tensor;

fn conv(c: &mut Criterion) {
    let mut rng = RngStream::new(0);
    let mut group = c.benchmark_group("conv1d_same");
    for (len, cin) in [(1000, 1), (500, 32), (62, 32)] {
        let x = random_tensor(&[64, len, cin], &mut rng);
        let k = random_tensor(&[7, cin, 32], &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{len}x{cin}")), &(), |b, _| {
            b.iter(|| conv1d_same(black_box(&x), black_box(&k), None).unwrap())
        });
    }
    group.finish();
}

fn pade(c: &mut Criterion) {
    let mut rng = RngStream::new(1);
    let x = random_tensor(&[64, 500, 32], &mut rng);
    let shape = KernelShape {
        taps: 7,
        cin: 32,
        cout: 32,
    };
    let mut group = c.benchmark_group("pade_forward");
    for (p, q) in [(1, 0), (2, 1), (3, 0), (1, 2)] {
        let params = PadeLayerParams::init(p, q, shape, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("P{p}Q{q}")), &(), |b, _| {
            b.iter(|| pade_forward(black_box(&x), &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, conv, pade);
criterion_main!(benches);
