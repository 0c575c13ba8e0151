use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gridrel_core::{
    run, sample_attempt, CheckpointGranularity, DatasetSpec, FailureModel, JobId, RngStream,
    Scenario, SiteProfile,
};

fn scenario(jobs: u64, granularity: CheckpointGranularity) -> Scenario {
    let mut s = Scenario::new(
        DatasetSpec::new(jobs * 100, 100, 1.0).unwrap(),
        vec![SiteProfile::new("T0", 200), SiteProfile::new("T1", 300)],
    );
    s.failure_model = FailureModel {
        p_setup: 0.01,
        p_compute: 0.03,
        p_stageout: 0.02,
        ..FailureModel::default()
    };
    s.granularity = granularity;
    s.seed = 1;
    s
}

fn engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    for jobs in [1_000u64, 10_000, 100_000] {
        let s = scenario(jobs, CheckpointGranularity::Job);
        group.throughput(Throughput::Elements(jobs));
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &s, |b, s| {
            b.iter(|| run(black_box(s)).unwrap())
        });
    }
    group.finish();

    let s = scenario(10_000, CheckpointGranularity::Event);
    c.bench_function("run/event_level/10000", |b| {
        b.iter(|| run(black_box(&s)).unwrap())
    });
}

fn attempts(c: &mut Criterion) {
    let model = FailureModel {
        p_compute: 0.05,
        corruption_per_event: 1e-6,
        ..FailureModel::default()
    };
    let site = SiteProfile::new("T0", 1);
    let mut job = 0u64;
    c.bench_function("sample_attempt", |b| {
        b.iter(|| {
            job += 1;
            sample_attempt(
                &model,
                &site,
                6000,
                18.0,
                RngStream::for_attempt(7, JobId(job), 0),
            )
        })
    });
}

criterion_group!(benches, engine, attempts);
criterion_main!(benches);
