use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pita_core::catalog::Catalog;
use pita_core::detector::Detector;
use pita_core::dom::HtmlDocument;
use pita_core::exec::Execution;
use pita_core::telemetry::aggregate_with;
use pita_testkit::{corpus, synth};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn scanning(c: &mut Criterion) {
    let catalog = Catalog::seed();
    let detector = Detector::new(&catalog).unwrap();
    let mut group = c.benchmark_group("scan_batch");
    for site in ["amazon", "youtube"] {
        let base: Vec<HtmlDocument> = corpus().iter().filter(|f| f.site == site).map(|f| f.document()).collect();
        // 64 pages per batch so the pool has something to chew on
        let docs: Vec<HtmlDocument> = base.iter().cycle().take(64).cloned().collect();
        group.throughput(Throughput::Elements(docs.len() as u64));
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, site), &docs, |b, docs| {
                b.iter(|| detector.scan_batch(black_box(docs), site, mode))
            });
        }
    }
    group.finish();

    let mut single = c.benchmark_group("scan_one_page");
    let page = pita_testkit::fixture("facebook_feed").document();
    for (name, mode) in MODES {
        single.bench_function(name, |b| b.iter(|| detector.scan_with(black_box(&page), "facebook", mode)));
    }
    single.finish();
}

fn aggregation(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregate");
    for n in [1_000usize, 50_000] {
        let s = synth::study(42, n, 200, 14, false);
        group.throughput(Throughput::Elements(n as u64));
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &s, |b, s| {
                b.iter(|| aggregate_with(black_box(&s.events), &s.notes, mode))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, scanning, aggregation);
criterion_main!(benches);
