//! Parallel vs sequential comparison for the hot kernels: Hamming
//! distance-to-dataset scans and batch model scoring.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use inferlab::config::ExperimentConfig;
use inferlab::dataset::{Dataset, Schema};
use inferlab::mlp::{train, TrainConfig};

fn random_dataset(n: usize, width: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| inferlab::bits::BitVector::random(width, &mut rng))
        .collect();
    let labels = (0..n).map(|i| i % classes).collect();
    Dataset::with_labels(
        records,
        labels,
        Schema {
            width,
            classes,
            name: "bench".into(),
        },
    )
    .unwrap()
}

fn bench_distance_scan(c: &mut Criterion) {
    let train = random_dataset(4000, 512, 4, 1);
    let queries = random_dataset(200, 512, 4, 2);
    let mut group = c.benchmark_group("distance_to_dataset");
    group.bench_function(BenchmarkId::new("parallel", "4000x512"), |b| {
        b.iter(|| train.distances_to(black_box(queries.records())).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", "4000x512"), |b| {
        b.iter(|| train.distances_to_seq(black_box(queries.records())).unwrap())
    });
    group.finish();
}

fn bench_model_scoring(c: &mut Criterion) {
    let data = random_dataset(512, 128, 4, 3);
    let arch = ExperimentConfig::default().architecture(128, 4);
    let cfg = TrainConfig {
        max_epochs: 1,
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train(&data, None, &arch, &cfg).unwrap();
    let mut group = c.benchmark_group("batch_scoring");
    group.bench_function(BenchmarkId::new("parallel", "512x128"), |b| {
        b.iter(|| model.max_confidences(black_box(data.records())).unwrap())
    });
    group.bench_function(BenchmarkId::new("sequential", "512x128"), |b| {
        b.iter(|| model.max_confidences_seq(black_box(data.records())))
    });
    group.finish();
}

criterion_group!(benches, bench_distance_scan, bench_model_scoring);
criterion_main!(benches);
