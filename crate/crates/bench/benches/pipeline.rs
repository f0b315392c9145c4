use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use frisson_bench::{eda_frames, trace_and_timeline, viewer};
use frisson_core::align::to_grid;
use frisson_core::protocol::{decode, encode, FrameDecoder};
use frisson_core::signal::{detect_peaks, normalize, process_session};
use frisson_core::PipelineConfig;

fn pipeline(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    for minutes in [5.0, 60.0] {
        let p = viewer(minutes * 60.0);
        group.throughput(Throughput::Elements(p.series.len() as u64));
        let normalized = normalize(&p.series).unwrap();
        group.bench_with_input(BenchmarkId::new("detect_peaks", minutes), &normalized, |b, s| {
            b.iter(|| detect_peaks(black_box(s), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("process_session", minutes), &p.series, |b, s| {
            b.iter(|| process_session(black_box(s), &cfg).unwrap())
        });
        let (trace, timeline) = trace_and_timeline(&p);
        group.bench_with_input(BenchmarkId::new("to_grid", minutes), &(trace, timeline), |b, (t, tl)| {
            b.iter(|| to_grid(black_box(t), tl, 5.0).unwrap())
        });
    }
    group.finish();
}

fn wire(c: &mut Criterion) {
    let frames = eda_frames(&viewer(300.0));
    let bytes: Vec<u8> = frames.iter().flat_map(|f| encode(f).unwrap()).collect();
    let mut group = c.benchmark_group("wire");
    group.throughput(Throughput::Elements(frames.len() as u64));
    group.bench_function("encode", |b| {
        b.iter(|| frames.iter().map(|f| encode(black_box(f)).unwrap().len()).sum::<usize>())
    });
    group.bench_function("decode_lines", |b| {
        b.iter(|| bytes.split_inclusive(|&c| c == b'\n').filter(|l| decode(black_box(l)).is_ok()).count())
    });
    group.bench_function("decode_stream_4k_chunks", |b| {
        b.iter(|| {
            let mut dec = FrameDecoder::new();
            bytes.chunks(4096).map(|chunk| dec.push(black_box(chunk)).len()).sum::<usize>()
        })
    });
    group.finish();
}

criterion_group!(benches, pipeline, wire);
criterion_main!(benches);
