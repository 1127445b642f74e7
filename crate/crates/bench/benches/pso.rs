use criterion::{criterion_group, criterion_main, Criterion};
use freqstab_bench::reference_model;
use freqstab_core::estimation::{synthetic_event, Binding, Objective, ParamEntry};
use freqstab_core::{pso_optimize, Disturbance, ModelTemplate, ParamSpace, PsoConfig};

fn sphere(c: &mut Criterion) {
    let space = ParamSpace::new(
        (0..5)
            .map(|i| ParamEntry {
                name: format!("x{i}"),
                lower: -5.0,
                upper: 5.0,
                binding: Binding::Tie,
                log_scale: false,
            })
            .collect(),
        vec![],
    )
    .unwrap();
    let cfg = PsoConfig {
        max_iters: 200,
        ..PsoConfig::default()
    };
    c.bench_function("pso/sphere5", |b| {
        b.iter(|| pso_optimize(&space, &cfg, None, |x| x.iter().map(|v| v * v).sum()).unwrap())
    });
}

fn event_cost(c: &mut Criterion) {
    let sys = reference_model();
    let event = synthetic_event(&sys, &Disturbance::reference(), None, 60.0, 0.02, 1e-3, 7).unwrap();
    let space = ParamSpace::new(
        vec![ParamEntry {
            name: "tie".into(),
            lower: 0.01,
            upper: 1.0,
            binding: Binding::Tie,
            log_scale: true,
        }],
        vec![],
    )
    .unwrap();
    let template = ModelTemplate::new(sys.clone(), space).unwrap();
    let objective = Objective::new(&event, &template, 0.005).unwrap();
    let x = [sys.tie.t_coeff];
    c.bench_function("objective/60s_event", |b| b.iter(|| objective.penalized_cost(&x)));
}

criterion_group!(benches, sphere, event_cost);
criterion_main!(benches);
