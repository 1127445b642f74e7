use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use freqstab_bench::{anchor, data_dir, reference_model};
use freqstab_core::{io, metrics, simulate, sweep, AreaId, Disturbance, SimConfig};

fn single_run(c: &mut Criterion) {
    let sys = reference_model();
    let dist = Disturbance::reference();
    let mut group = c.benchmark_group("simulate");
    for t_end in [30.0, 60.0] {
        let cfg = SimConfig {
            t_end,
            ..SimConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("reference", t_end), &cfg, |b, cfg| {
            b.iter(|| simulate(&sys, &dist, cfg).unwrap())
        });
    }
    group.finish();

    let trace = simulate(&sys, &dist, &SimConfig::default()).unwrap();
    c.bench_function("metrics/report", |b| b.iter(|| metrics::standard_report(&trace, AreaId::Ip).unwrap()));
}

fn scenario_sweep(c: &mut Criterion) {
    let anchor = anchor();
    let traj = io::read_trajectory(&data_dir().join("scenarios/monthly_average.json")).unwrap();
    let cfg = SimConfig::default();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("monthly_average", |b| b.iter(|| sweep(&anchor, &traj, &Disturbance::reference(), &cfg)));
    group.finish();
}

criterion_group!(benches, single_run, scenario_sweep);
criterion_main!(benches);
