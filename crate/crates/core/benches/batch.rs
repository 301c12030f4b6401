//! Forward/backward over a mini-batch on a single-thread pool versus the
//! default pool. Build with `--no-default-features` to time the sequential
//! fallback instead of rayon dispatch.

use criterion::{criterion_group, criterion_main, Criterion};
use ctdnn::layers::softmax_ce;
use ctdnn::model::Architecture;
use ctdnn::{Matrix, Mode, Model, ModelConfig, Rng};

const BATCH: usize = 16;
const FRAMES: usize = 300;
const DIM: usize = 13;
const CLASSES: usize = 10;

fn batch() -> Vec<Matrix> {
    let mut rng = Rng::new(5);
    (0..BATCH).map(|_| Matrix::from_fn(FRAMES, DIM, |_, _| rng.normal())).collect()
}

fn step(model: &Model, xs: &[Matrix]) {
    let refs: Vec<&Matrix> = xs.iter().collect();
    let (logits, cache) = model.forward_batch(&refs, Mode::Train).unwrap();
    let grads: Vec<Vec<f64>> = logits
        .iter()
        .enumerate()
        .map(|(i, z)| softmax_ce(z, i % CLASSES).unwrap().1)
        .collect();
    std::hint::black_box(model.backward(&cache, &grads).unwrap());
}

fn bench(c: &mut Criterion) {
    let xs = batch();
    let pools = [
        ("1 thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("default pool", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ];
    let mode = if ctdnn::exec::is_parallel() { "rayon" } else { "sequential" };
    for (name, arch) in [("tdnn", Architecture::tdnn(64)), ("ctdnn", Architecture::ctdnn(64))] {
        let model = Model::build(ModelConfig::new(arch, DIM, CLASSES).unwrap(), 0);
        let mut group = c.benchmark_group(format!("{name} train step ({mode})"));
        group.sample_size(10);
        for (label, pool) in &pools {
            group.bench_function(*label, |b| {
                b.iter(|| pool.install(|| step(&model, &xs)))
            });
        }
        group.finish();
        let refs: Vec<&Matrix> = xs.iter().collect();
        let mut group = c.benchmark_group(format!("{name} embed ({mode})"));
        group.sample_size(10);
        for (label, pool) in &pools {
            group.bench_function(*label, |b| b.iter(|| pool.install(|| model.embed_batch(&refs).unwrap())));
        }
        group.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);
