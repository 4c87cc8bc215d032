use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use online_neat::data::{synthesize, SynthConfig};
use online_neat::evolution::{EvolutionConfig, Population};
use online_neat::fitness::{FitnessKind, FitnessSpec};
use online_neat::par::Execution;

/// Evaluating a whole population on one window, fanned out vs one thread.
fn population_evaluation(c: &mut Criterion) {
    let records = synthesize(&SynthConfig { n_records: 500, n_features: 8, seed: 1, ..Default::default() }).unwrap();
    let spec = FitnessSpec::new(FitnessKind::Pan);
    let mut group = c.benchmark_group("evaluate_population");
    for size in [50usize, 200] {
        let cfg = EvolutionConfig { population_size: size, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pop = Population::new(8, &cfg, &mut rng).unwrap();
        // A few generations so genomes carry some hidden structure.
        pop.evolve_on_window(&records, &spec, &EvolutionConfig { max_generations_per_window: 5, ..cfg }, &mut rng)
            .unwrap();
        for (name, mode) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, size), &mode, |b, &mode| {
                b.iter(|| pop.evaluate(&records, &spec, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn window_evolution(c: &mut Criterion) {
    let records = synthesize(&SynthConfig { n_records: 500, n_features: 5, seed: 2, ..Default::default() }).unwrap();
    let spec = FitnessSpec::new(FitnessKind::Acc);
    let mut group = c.benchmark_group("evolve_window_10_generations");
    group.sample_size(10);
    for (name, mode) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let cfg = EvolutionConfig {
            population_size: 200,
            max_generations_per_window: 10,
            plateau_generations: usize::MAX,
            execution: mode,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(3);
                let mut pop = Population::new(5, &cfg, &mut rng).unwrap();
                pop.evolve_on_window(&records, &spec, &cfg, &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, population_evaluation, window_evolution);
criterion_main!(benches);
