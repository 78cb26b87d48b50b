use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kql::envs::EnvKind;
use kql::harness::{run_checks, CheckOptions};
use kql::{AgentConfig, Exec, KernelSpec, KqlAgent};

/// Trains on CartPole for `steps` steps.
fn train(steps: usize, exec: Exec) -> u64 {
    let mut env = EnvKind::CartPole.make(7, Default::default());
    let kernel = KernelSpec::gaussian(0.02, 4, 2).unwrap();
    let cfg = AgentConfig::new(steps, 0.95, kernel)
        .with_consistency_check(None)
        .with_exec(exec);
    let mut agent = KqlAgent::new(cfg, env.observation_bounds()).unwrap();
    let mut s = env.reset();
    for _ in 0..steps {
        let a = agent.select_action(&s).unwrap();
        let out = env.step(a).unwrap();
        agent.observe(&s, a, out.reward, &out.observation, out.terminated).unwrap();
        s = if out.done() { env.reset() } else { out.observation };
    }
    agent.state_digest()
}

fn modes() -> Vec<(&'static str, Exec)> {
    let mut m = vec![("sequential", Exec::Sequential)];
    if kql::par::PARALLEL_AVAILABLE {
        m.push(("parallel", Exec::Parallel));
    }
    m
}

fn bench_training(c: &mut Criterion) {
    let mut group = c.benchmark_group("cartpole_training");
    group.sample_size(10);
    for steps in [200, 500] {
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, steps), &steps, |b, &n| b.iter(|| train(n, exec)));
        }
    }
    group.finish();
}

fn bench_checks(c: &mut Criterion) {
    let mut group = c.benchmark_group("dimension_checks");
    group.sample_size(10);
    let seeds: Vec<u64> = (0..8).collect();
    for (name, exec) in modes() {
        let opts = CheckOptions {
            exec,
            ..CheckOptions::default()
        };
        group.bench_function(name, |b| b.iter(|| run_checks(&[10, 30], &seeds, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_training, bench_checks);
criterion_main!(benches);
