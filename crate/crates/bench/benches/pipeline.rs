use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use learnfuzz_core::assembler::{append_object, make_hosts};
use learnfuzz_core::charlm::{loss_and_grad, ModelParams, ModelShape, Vocab};
use learnfuzz_core::corpus::{build_windows, synthetic_objects};
use learnfuzz_core::mutator::{random_fuzz, FuzzConfig};
use learnfuzz_core::pdfcore::{parse_host, parse_object};
use learnfuzz_core::rng::seeded;
use learnfuzz_core::sampler::{generate, GenConfig, Mode};

const OBJECT: &[u8] = b"12 0 obj\n<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792]\n   /Resources << /Font << /F1 4 0 R >> >> /Annots [7 0 R 8 0 R] >>\nendobj";

fn parsing(c: &mut Criterion) {
    let mut g = c.benchmark_group("parse");
    g.throughput(Throughput::Bytes(OBJECT.len() as u64));
    g.bench_function("object", |b| b.iter(|| parse_object(black_box(OBJECT), true)));
    let host = make_hosts().into_iter().next().unwrap();
    let file = append_object(&host, b"obj [1 2 3] endobj").unwrap();
    g.throughput(Throughput::Bytes(file.len() as u64));
    g.bench_function("host", |b| b.iter(|| parse_host(black_box(&file)).unwrap()));
    g.finish();
}

fn assembling(c: &mut Criterion) {
    let host = make_hosts().into_iter().nth(2).unwrap();
    c.bench_function("append_object", |b| b.iter(|| append_object(&host, black_box(b"obj << /A 1 >> endobj")).unwrap()));
}

fn fuzzing(c: &mut Criterion) {
    let data = vec![b'x'; 3300];
    let mut seed = 0;
    c.bench_function("random_fuzz_3300", |b| {
        b.iter(|| {
            seed += 1;
            random_fuzz(&data, &FuzzConfig { rng_seed: seed, ..FuzzConfig::default() }).unwrap()
        })
    });
}

fn model(c: &mut Criterion) {
    let corpus = synthetic_objects(200, 1);
    let ts = build_windows(&corpus, 64).unwrap();
    let params = ModelParams::init(Vocab::from_text(ts.text()), ModelShape::TINY, 0.08, &mut seeded(1));
    let (x, y) = ts.window(0);
    let mut g = c.benchmark_group("charlm");
    g.throughput(Throughput::Elements(64));
    g.bench_function("loss_and_grad_tiny_window", |b| b.iter(|| loss_and_grad(&params, black_box(x), black_box(y)).unwrap()));
    g.finish();

    // An untrained model rarely emits `endobj`, so bound the work per call.
    let cfg = GenConfig { max_len: 100, max_restarts: 1, ..GenConfig::with_mode(Mode::Sample, 0) };
    c.bench_function("generate_untrained_200_chars", |b| {
        b.iter_batched(
            || cfg.clone(),
            |mut cfg| {
                cfg.rng_seed += 1;
                let _ = generate(&params, &cfg);
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, parsing, assembling, fuzzing, model);
criterion_main!(benches);
