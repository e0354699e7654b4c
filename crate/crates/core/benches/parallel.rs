use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use portal_cluster::baseline::brute_force_opt_with;
use portal_cluster::diagnostics::badly_cut_frequencies;
use portal_cluster::io::{generate, GenParams, PointDistribution};
use portal_cluster::{baseline_solve, solve, BaselineParams, CutParams, Execution, Objective, SolverParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn instance(n: usize, m: usize, k: usize) -> portal_cluster::Instance {
    generate(&GenParams {
        n,
        m,
        k,
        dim: 2,
        objective: Objective::Means,
        seed: 1,
        distribution: PointDistribution::Clustered,
    })
    .unwrap()
}

fn trials(c: &mut Criterion) {
    let inst = instance(3000, 100, 5);
    let mut g = c.benchmark_group("solve_trials");
    g.sample_size(10);
    for (name, exec) in MODES {
        let params = SolverParams::new(0.3).with_execution(exec);
        g.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, p| b.iter(|| solve(&inst, p).unwrap()));
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let inst = instance(40, 24, 4);
    let mut g = c.benchmark_group("brute_force");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| brute_force_opt_with(&inst, u128::MAX, exec).unwrap()));
    }
    g.finish();
}

fn seeds(c: &mut Criterion) {
    let inst = instance(200, 40, 5);
    let baseline = baseline_solve(&inst, &BaselineParams::default(), 0).unwrap();
    let params = CutParams::new(0.25, 2).unwrap();
    let mut g = c.benchmark_group("badly_cut_seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| badly_cut_frequencies(exec, &inst, &baseline, &params, 0, 500).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, trials, enumeration, seeds);
criterion_main!(benches);
