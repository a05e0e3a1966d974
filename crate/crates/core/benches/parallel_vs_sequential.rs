use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mscale::detect::{Detector, Method};
use mscale::noise::{csr_envelope_with, Rect};
use mscale::parallel::Exec;
use mscale::synth::{generate, run_scenario, ScenarioParams};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn envelope(c: &mut Criterion) {
    let mut g = c.benchmark_group("csr_envelope_n200_200sims");
    let probes = [0.1, 0.2, 0.3, 0.4, 0.5];
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| csr_envelope_with(200, &Rect::unit(), &probes, 200, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn graph_build(c: &mut Criterion) {
    let params = ScenarioParams::new(3).unwrap();
    let corpus = generate(&params.spec(5)).unwrap();
    let cfg = params.config(&corpus.domain, 1.0).unwrap();
    let mut g = c.benchmark_group("similarity_graph_scenario3");
    g.sample_size(20);
    for method in [Method::Led, Method::Med] {
        for (name, exec) in MODES {
            let det = Detector::new(corpus.domain, cfg.clone()).with_exec(exec);
            let tokenized = det.tokenize(&corpus.records);
            g.bench_function(BenchmarkId::new(method.to_string(), name), |b| {
                b.iter(|| det.similarity_graph(method, &tokenized).unwrap())
            });
        }
    }
    g.finish();
}

fn scenario_trials(c: &mut Criterion) {
    let params = ScenarioParams::new(1).unwrap();
    let mut g = c.benchmark_group("run_scenario1_4trials");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_scenario(&params, &[0.5, 2.0], 4, 9, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, envelope, graph_build, scenario_trials);
criterion_main!(benches);
