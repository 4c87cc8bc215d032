use std::collections::{BTreeSet, HashMap};

use online_neat::data::{normalize_stream, read_stream, synthesize, write_stream, LoanRecord, SynthConfig};
use online_neat::evolution::{largest_remainder, EvolutionConfig, Origin, Population};
use online_neat::fitness::{fitness_value, FitnessKind, FitnessSpec};
use online_neat::genome::{
    compatibility_distance, crossover, minimal_genome, mutate_add_connection, mutate_add_node, mutate_weights,
    DistanceConfig, Genome, InnovationRegistry, MutationConfig, NodeKind,
};
use online_neat::phenotype::{Class, Network};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// Kahn's algorithm over enabled connections.
fn acyclic(g: &Genome) -> bool {
    let mut indegree: HashMap<u32, usize> = g.nodes().iter().map(|n| (n.id, 0)).collect();
    let edges: Vec<(u32, u32)> = g
        .connections()
        .iter()
        .filter(|c| c.enabled)
        .map(|c| (c.in_node, c.out_node))
        .collect();
    for &(_, b) in &edges {
        *indegree.get_mut(&b).unwrap() += 1;
    }
    let mut ready: Vec<u32> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut seen = 0;
    while let Some(n) = ready.pop() {
        seen += 1;
        for &(a, b) in &edges {
            if a == n {
                let d = indegree.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
    }
    seen == indegree.len()
}

fn innovations_strictly_increasing(g: &Genome) -> bool {
    g.connections().windows(2).all(|w| w[0].innovation < w[1].innovation)
}

fn no_edges_into_inputs(g: &Genome) -> bool {
    let kinds: HashMap<u32, NodeKind> = g.nodes().iter().map(|n| (n.id, n.kind)).collect();
    g.connections()
        .iter()
        .all(|c| !matches!(kinds[&c.out_node], NodeKind::Input | NodeKind::Bias))
}

/// A genome grown from a minimal one by `steps` random operator applications.
fn grown(seed: u64, n_inputs: usize, steps: usize, registry: &mut InnovationRegistry) -> Genome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MutationConfig::default();
    let mut g = minimal_genome(n_inputs, registry, &mut rng, &cfg).unwrap();
    for _ in 0..steps {
        g = match rng.random_range(0..3) {
            0 => mutate_weights(&g, &mut rng, &cfg),
            1 => mutate_add_connection(&g, registry, &mut rng, &cfg),
            _ => mutate_add_node(&g, registry, &mut rng),
        };
        if rng.random_bool(0.3) {
            registry.new_generation();
        }
    }
    g
}

fn random_records(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<LoanRecord> {
    (0..n)
        .map(|i| LoanRecord {
            id: format!("r{i}"),
            label: if rng.random_bool(0.7) { Class::Positive } else { Class::Negative },
            loan_amount: rng.random_range(100.0..50_000.0),
            total_interest: rng.random_range(10.0..8_000.0),
            features: (0..k).map(|_| rng.random::<f64>()).collect(),
        })
        .collect()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn operator_sequences_keep_genomes_well_formed(seed in any::<u64>(), n_inputs in 1usize..6, steps in 0usize..60) {
        let mut registry = InnovationRegistry::new();
        let g = grown(seed, n_inputs, steps, &mut registry);
        prop_assert!(acyclic(&g));
        prop_assert!(innovations_strictly_increasing(&g));
        prop_assert!(no_edges_into_inputs(&g));
        prop_assert!(g.validate().is_ok());
        let net = Network::compile(&g).unwrap();
        let score = net.activate(&vec![0.5; n_inputs]).unwrap();
        prop_assert!(score > 0.0 && score < 1.0);
    }

    #[test]
    fn genome_text_round_trips(seed in any::<u64>(), steps in 0usize..40) {
        let mut registry = InnovationRegistry::new();
        let mut g = grown(seed, 3, steps, &mut registry);
        g.historical_fitness = (seed % 1000) as f64 / 7.0;
        let back: Genome = g.to_string().parse().unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn crossover_with_self_preserves_innovations(seed in any::<u64>(), steps in 0usize..40, f in -10.0f64..10.0) {
        let mut registry = InnovationRegistry::new();
        let g = grown(seed, 3, steps, &mut registry);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let child = crossover(&g, &g, f, f, &mut rng, &MutationConfig::default()).unwrap();
        let a: Vec<u64> = g.connections().iter().map(|c| c.innovation).collect();
        let b: Vec<u64> = child.connections().iter().map(|c| c.innovation).collect();
        prop_assert_eq!(a, b);
        let mut wa: Vec<f64> = g.connections().iter().map(|c| c.weight).collect();
        let mut wb: Vec<f64> = child.connections().iter().map(|c| c.weight).collect();
        wa.sort_by(f64::total_cmp);
        wb.sort_by(f64::total_cmp);
        prop_assert_eq!(wa, wb);
    }

    #[test]
    fn crossover_children_are_valid(seed in any::<u64>(), sa in 0usize..40, sb in 0usize..40, fa in 0.0f64..2.0, fb in 0.0f64..2.0) {
        let mut registry = InnovationRegistry::new();
        let a = grown(seed, 3, sa, &mut registry);
        let b = grown(seed.wrapping_add(17), 3, sb, &mut registry);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = crossover(&a, &b, fa, fb, &mut rng, &MutationConfig::default()).unwrap();
        prop_assert!(acyclic(&child));
        prop_assert!(innovations_strictly_increasing(&child));
        prop_assert!(child.validate().is_ok());
        let parents: BTreeSet<u64> = a.connections().iter().chain(b.connections()).map(|c| c.innovation).collect();
        prop_assert!(child.connections().iter().all(|c| parents.contains(&c.innovation)));
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_self(seed in any::<u64>(), sa in 0usize..40, sb in 0usize..40) {
        let mut registry = InnovationRegistry::new();
        let a = grown(seed, 2, sa, &mut registry);
        let b = grown(seed.wrapping_mul(31), 2, sb, &mut registry);
        let cfg = DistanceConfig::default();
        prop_assert_eq!(compatibility_distance(&a, &a, &cfg), 0.0);
        let (ab, ba) = (compatibility_distance(&a, &b, &cfg), compatibility_distance(&b, &a, &cfg));
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn largest_remainder_is_exact(weights in prop::collection::vec(0.0f64..100.0, 1..20), total in 0usize..500) {
        let shares = largest_remainder(&weights, total);
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            prop_assert_eq!(shares.iter().sum::<usize>(), total);
            for (s, w) in shares.iter().zip(&weights) {
                let exact = w / sum * total as f64;
                prop_assert!((*s as f64 - exact).abs() < 1.0 + 1e-9);
            }
        } else {
            prop_assert!(shares.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn fitness_ignores_record_order(seed in any::<u64>(), steps in 0usize..30, beta in 0.0f64..1.0) {
        let mut registry = InnovationRegistry::new();
        let mut g = grown(seed, 4, steps, &mut registry);
        g.historical_fitness = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_records(&mut rng, 60, 4);
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rng);
        for spec in [
            FitnessSpec::new(FitnessKind::Acc),
            FitnessSpec::new(FitnessKind::Pan),
            FitnessSpec::new(FitnessKind::Pro),
            FitnessSpec::pap(1e-6, beta),
        ] {
            let x = fitness_value(&g, &records, &spec).unwrap();
            let y = fitness_value(&g, &shuffled, &spec).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{:?}: {} vs {}", spec.kind, x, y);
        }
    }
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn population_size_quotas_and_lineage(seed in any::<u64>(), size in 5usize..40, generations in 1usize..8) {
        let cfg = EvolutionConfig {
            population_size: size,
            distance_threshold: 1.0,
            ..EvolutionConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = Population::new(3, &cfg, &mut rng).unwrap();
        for _ in 0..generations {
            let fitness: Vec<f64> = (0..pop.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
            pop.set_fitness(fitness);
            pop.speciate(&cfg, &mut rng);
            pop.update_stagnation();
            let mut probe = pop.clone();
            prop_assert_eq!(probe.offspring_quotas(&cfg).iter().sum::<usize>(), size);

            let previous = pop.genomes().to_vec();
            pop.reproduce(&cfg, &mut rng).unwrap();
            prop_assert_eq!(pop.len(), size);
            for (g, origin) in pop.genomes().iter().zip(pop.origins()) {
                match *origin {
                    Origin::Elite(i) => {
                        let mut expected = previous[i].clone();
                        expected.species_id = None;
                        prop_assert_eq!(g, &expected);
                    }
                    Origin::Clone(i) => prop_assert!(i < previous.len()),
                    Origin::Crossover(a, b) => prop_assert!(a < previous.len() && b < previous.len()),
                    Origin::Initial => prop_assert!(false, "initial origin after reproduce"),
                }
                prop_assert!(acyclic(g));
                prop_assert!(innovations_strictly_increasing(g));
            }
        }
    }

    #[test]
    fn normalization_is_causal(seed in any::<u64>(), n in 2usize..80, cut in 1usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = random_records(&mut rng, n, 3);
        for r in &mut records {
            for x in &mut r.features {
                if rng.random_bool(0.1) {
                    *x = f64::NAN;
                } else {
                    *x *= 100.0;
                }
            }
        }
        let cut = cut.min(n);
        let whole = normalize_stream(&records).unwrap();
        let prefix = normalize_stream(&records[..cut]).unwrap();
        prop_assert_eq!(&whole[..cut], &prefix[..]);
        for r in &whole {
            prop_assert!(r.features.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn synthetic_streams_round_trip_and_repeat(seed in any::<u64>(), n in 1usize..300, k in 1usize..6) {
        let cfg = SynthConfig { n_records: n, n_features: k, seed, ..SynthConfig::default() };
        let records = synthesize(&cfg).unwrap();
        prop_assert_eq!(&records, &synthesize(&cfg).unwrap());
        let mut bytes = Vec::new();
        write_stream(&mut bytes, &records).unwrap();
        let back = read_stream(&bytes[..], "mem").unwrap();
        prop_assert_eq!(back, records);
    }
}

#[test]
fn class_share_within_two_points() {
    for seed in 0..10 {
        for sharpness in [None, Some(8.0)] {
            for fraction in [0.75, 0.5, 0.9] {
                let cfg = SynthConfig {
                    n_records: 5_000,
                    positive_fraction: fraction,
                    sharpness,
                    seed,
                    ..SynthConfig::default()
                };
                let records = synthesize(&cfg).unwrap();
                let share = records.iter().filter(|r| r.label == Class::Positive).count() as f64 / 5_000.0;
                assert!(
                    (share - fraction).abs() <= 0.02,
                    "seed {seed} sharpness {sharpness:?}: share {share} vs {fraction}"
                );
            }
        }
    }
}

#[test]
fn evolution_is_bit_reproducible() {
    let records = normalize_stream(&synthesize(&SynthConfig { n_records: 300, seed: 3, ..SynthConfig::default() }).unwrap()).unwrap();
    let cfg = EvolutionConfig {
        population_size: 40,
        max_generations_per_window: 6,
        ..EvolutionConfig::default()
    };
    let spec = FitnessSpec::new(FitnessKind::Pan);
    let trajectory = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = Population::new(5, &cfg, &mut rng).unwrap();
        let out = pop.evolve_on_window(&records, &spec, &cfg, &mut rng).unwrap();
        let genomes: Vec<String> = pop.genomes().iter().map(|g| g.to_string()).collect();
        (out.best_per_generation, genomes)
    };
    assert_eq!(trajectory(11), trajectory(11));
    assert_ne!(trajectory(11).1, trajectory(12).1);
}
