//! Population management: speciation, explicit fitness sharing, species-quota
//! reproduction and the per-window generation loop.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::data::LoanRecord;
use crate::error::{NeatError, Result};
use crate::fitness::{fitness_value, FitnessSpec};
use crate::genome::{
    compatibility_distance, crossover, minimal_genome, mutate_add_connection, mutate_add_node,
    mutate_weights, DistanceConfig, Genome, InnovationRegistry, MutationConfig,
};
use crate::par::{self, Execution};

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub distance_threshold: f64,
    /// Share of each species (by rank) allowed to parent offspring.
    pub survival_fraction: f64,
    /// Champions copied unchanged per species of at least
    /// `elitism_min_species_size` members.
    pub elitism: usize,
    pub elitism_min_species_size: usize,
    pub stagnation_limit: usize,
    pub interspecies_mating_prob: f64,
    pub crossover_prob: f64,
    pub max_generations_per_window: usize,
    pub plateau_generations: usize,
    pub plateau_epsilon: f64,
    pub mutation: MutationConfig,
    pub distance: DistanceConfig,
    pub execution: Execution,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 200,
            distance_threshold: 3.0,
            survival_fraction: 0.2,
            elitism: 1,
            elitism_min_species_size: 5,
            stagnation_limit: 15,
            interspecies_mating_prob: 0.001,
            crossover_prob: 0.75,
            max_generations_per_window: 50,
            plateau_generations: 10,
            plateau_epsilon: 1e-6,
            mutation: MutationConfig::default(),
            distance: DistanceConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NeatError::Config(msg));
        for (name, p) in [
            ("survival_fraction", self.survival_fraction),
            ("interspecies_mating_prob", self.interspecies_mating_prob),
            ("crossover_prob", self.crossover_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.max_generations_per_window == 0 {
            return bad("max_generations_per_window must be positive".into());
        }
        if !(self.distance_threshold > 0.0) {
            return bad("distance_threshold must be positive".into());
        }
        if !(self.plateau_epsilon >= 0.0) {
            return bad("plateau_epsilon must be >= 0".into());
        }
        self.mutation.validate()
    }
}

#[derive(Clone, Debug)]
pub struct Species {
    pub id: usize,
    pub representative: Genome,
    /// Indices into the population's genome list.
    pub members: Vec<usize>,
    pub best_fitness_ever: f64,
    pub stagnation: usize,
}

/// How a genome of the current generation came about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Initial,
    Elite(usize),
    Clone(usize),
    Crossover(usize, usize),
}

#[derive(Clone, Debug)]
pub struct Population {
    genomes: Vec<Genome>,
    fitness: Vec<f64>,
    origins: Vec<Origin>,
    species: Vec<Species>,
    generation: u64,
    registry: InnovationRegistry,
    next_species_id: usize,
}

/// Outcome of training on one window.
#[derive(Clone, Debug)]
pub struct WindowEvolution {
    pub generations_run: usize,
    pub best: Genome,
    pub best_fitness: f64,
    /// Best raw fitness of each generation, in order.
    pub best_per_generation: Vec<f64>,
}

impl Population {
    /// `population_size` minimal genomes over `n_features` inputs.
    pub fn new<R: Rng + ?Sized>(n_features: usize, config: &EvolutionConfig, rng: &mut R) -> Result<Population> {
        config.validate()?;
        let mut registry = InnovationRegistry::new();
        let genomes = (0..config.population_size)
            .map(|_| minimal_genome(n_features, &mut registry, rng, &config.mutation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Population::from_genomes(genomes, registry))
    }

    pub fn from_genomes(genomes: Vec<Genome>, mut registry: InnovationRegistry) -> Population {
        for g in &genomes {
            registry.absorb(g);
        }
        Population {
            fitness: vec![f64::NAN; genomes.len()],
            origins: vec![Origin::Initial; genomes.len()],
            genomes,
            species: Vec::new(),
            generation: 0,
            registry,
            next_species_id: 0,
        }
    }

    pub fn genomes(&self) -> &[Genome] {
        &self.genomes
    }

    pub fn genomes_mut(&mut self) -> &mut [Genome] {
        &mut self.genomes
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    /// Raw fitness of the current generation; `NaN` before evaluation.
    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn registry(&self) -> &InnovationRegistry {
        &self.registry
    }

    /// Index of the best genome by raw fitness (first on ties).
    pub fn champion_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &f) in self.fitness.iter().enumerate() {
            if f.is_nan() {
                continue;
            }
            if best.is_none_or(|b| f > self.fitness[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn set_fitness(&mut self, fitness: Vec<f64>) {
        assert_eq!(fitness.len(), self.genomes.len());
        self.fitness = fitness;
    }

    pub fn evaluate(&mut self, records: &[LoanRecord], spec: &FitnessSpec, execution: Execution) -> Result<()> {
        let scores = par::map(&self.genomes, execution, |g| fitness_value(g, records, spec));
        self.fitness = scores.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// First-fit assignment against last generation's representatives, then
    /// a fresh representative drawn from each species' new members.
    pub fn speciate<R: Rng + ?Sized>(&mut self, config: &EvolutionConfig, rng: &mut R) {
        for s in &mut self.species {
            s.members.clear();
        }
        for (i, genome) in self.genomes.iter_mut().enumerate() {
            let home = self.species.iter().position(|s| {
                compatibility_distance(&s.representative, genome, &config.distance) < config.distance_threshold
            });
            let slot = match home {
                Some(slot) => slot,
                None => {
                    self.species.push(Species {
                        id: self.next_species_id,
                        representative: genome.clone(),
                        members: Vec::new(),
                        best_fitness_ever: f64::NEG_INFINITY,
                        stagnation: 0,
                    });
                    self.next_species_id += 1;
                    self.species.len() - 1
                }
            };
            self.species[slot].members.push(i);
            genome.species_id = Some(self.species[slot].id);
        }
        self.species.retain(|s| !s.members.is_empty());
        for s in &mut self.species {
            let pick = s.members[rng.random_range(0..s.members.len())];
            s.representative = self.genomes[pick].clone();
        }
    }

    /// Tracks each species' best raw fitness and generations without progress.
    pub fn update_stagnation(&mut self) {
        for s in &mut self.species {
            let best = s
                .members
                .iter()
                .map(|&i| self.fitness[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if best > s.best_fitness_ever {
                s.best_fitness_ever = best;
                s.stagnation = 0;
            } else {
                s.stagnation += 1;
            }
        }
    }

    /// Forgets per-species progress. Fitness values from different windows
    /// are not comparable.
    pub fn reset_stagnation(&mut self) {
        for s in &mut self.species {
            s.best_fitness_ever = f64::NEG_INFINITY;
            s.stagnation = 0;
        }
    }

    /// `(raw - floor) / species_size` with `floor = min(0, min raw)`.
    pub fn shared_fitness(&self) -> Vec<f64> {
        let floor = self.fitness.iter().copied().fold(0.0, f64::min);
        let mut adjusted = vec![0.0; self.genomes.len()];
        for s in &self.species {
            let size = s.members.len() as f64;
            for &i in &s.members {
                adjusted[i] = (self.fitness[i] - floor) / size;
            }
        }
        adjusted
    }

    /// Offspring count per species (aligned with [`Population::species`]).
    pub fn offspring_quotas(&mut self, config: &EvolutionConfig) -> Vec<usize> {
        let adjusted = self.shared_fitness();
        let champion_species = self
            .champion_index()
            .and_then(|c| self.species.iter().position(|s| s.members.contains(&c)));

        let mut eligible: Vec<bool> = self
            .species
            .iter()
            .enumerate()
            .map(|(k, s)| s.stagnation <= config.stagnation_limit || Some(k) == champion_species)
            .collect();
        let all_stagnant = self.species.iter().all(|s| s.stagnation > config.stagnation_limit);
        if all_stagnant {
            if let Some(k) = champion_species {
                eligible = vec![false; self.species.len()];
                eligible[k] = true;
                self.species[k].stagnation = 0;
            }
        }

        let sums: Vec<f64> = self
            .species
            .iter()
            .zip(&eligible)
            .map(|(s, &ok)| if ok { s.members.iter().map(|&i| adjusted[i]).sum() } else { 0.0 })
            .collect();
        let total: f64 = sums.iter().sum();
        let weights: Vec<f64> = if total > 0.0 && total.is_finite() {
            sums
        } else {
            self.species
                .iter()
                .zip(&eligible)
                .map(|(s, &ok)| if ok { s.members.len() as f64 } else { 0.0 })
                .collect()
        };
        let mut quotas = largest_remainder(&weights, config.population_size);

        if let Some(k) = champion_species {
            if quotas[k] == 0 {
                let donor = (0..quotas.len()).max_by_key(|&j| (quotas[j], usize::MAX - j)).unwrap();
                quotas[donor] -= 1;
                quotas[k] += 1;
            }
        }
        quotas
    }

    /// Builds the next generation from the current, speciated and evaluated one.
    pub fn reproduce<R: Rng + ?Sized>(&mut self, config: &EvolutionConfig, rng: &mut R) -> Result<()> {
        if self.fitness.iter().any(|f| f.is_nan()) {
            return Err(NeatError::Config("reproduce needs an evaluated population".into()));
        }
        if self.species.is_empty() {
            return Err(NeatError::Config("reproduce needs a speciated population".into()));
        }
        let quotas = self.offspring_quotas(config);
        let champion = self.champion_index();
        self.registry.new_generation();

        // Members ranked by raw fitness, best first; parents are the top share.
        let ranked: Vec<Vec<usize>> = self
            .species
            .iter()
            .map(|s| {
                let mut m = s.members.clone();
                m.sort_by(|&a, &b| self.fitness[b].total_cmp(&self.fitness[a]).then(a.cmp(&b)));
                m
            })
            .collect();
        let parent_pools: Vec<&[usize]> = ranked
            .iter()
            .map(|m| {
                let keep = ((config.survival_fraction * m.len() as f64) - 1e-9).ceil().max(1.0) as usize;
                &m[..keep.min(m.len())]
            })
            .collect();
        let breeding: Vec<usize> = (0..quotas.len()).filter(|&k| quotas[k] > 0).collect();

        let mut next = Vec::with_capacity(config.population_size);
        let mut origins = Vec::with_capacity(config.population_size);
        for (k, &quota) in quotas.iter().enumerate() {
            if quota == 0 {
                continue;
            }
            let members = &ranked[k];
            let mut n_elite = if members.len() >= config.elitism_min_species_size {
                config.elitism.min(members.len())
            } else {
                0
            };
            if n_elite == 0 && champion.is_some_and(|c| members[0] == c) {
                n_elite = 1;
            }
            let n_elite = n_elite.min(quota);
            for &i in &members[..n_elite] {
                next.push(self.genomes[i].clone());
                origins.push(Origin::Elite(i));
            }

            let pool = parent_pools[k];
            for _ in n_elite..quota {
                let a = *pool.choose(rng).expect("parent pool is never empty");
                let (child, origin) = if rng.random_bool(config.crossover_prob) {
                    let b = if breeding.len() > 1 && rng.random_bool(config.interspecies_mating_prob) {
                        let others: Vec<usize> = breeding.iter().copied().filter(|&j| j != k).collect();
                        let j = *others.choose(rng).expect("at least one other species");
                        *parent_pools[j].choose(rng).expect("parent pool is never empty")
                    } else {
                        *pool.choose(rng).expect("parent pool is never empty")
                    };
                    let child = crossover(
                        &self.genomes[a],
                        &self.genomes[b],
                        self.fitness[a],
                        self.fitness[b],
                        rng,
                        &config.mutation,
                    )?;
                    (child, Origin::Crossover(a, b))
                } else {
                    (self.genomes[a].clone(), Origin::Clone(a))
                };
                next.push(self.mutate(child, config, rng));
                origins.push(origin);
            }
        }
        debug_assert_eq!(next.len(), config.population_size);

        self.genomes = next;
        self.origins = origins;
        self.fitness = vec![f64::NAN; self.genomes.len()];
        for g in &mut self.genomes {
            g.species_id = None;
        }
        self.generation += 1;
        Ok(())
    }

    fn mutate<R: Rng + ?Sized>(&mut self, genome: Genome, config: &EvolutionConfig, rng: &mut R) -> Genome {
        let mut g = mutate_weights(&genome, rng, &config.mutation);
        if rng.random_bool(config.mutation.p_add_node) {
            g = mutate_add_node(&g, &mut self.registry, rng);
        }
        if rng.random_bool(config.mutation.p_add_connection) {
            g = mutate_add_connection(&g, &mut self.registry, rng, &config.mutation);
        }
        g
    }

    /// Evolves on one window until the generation cap or a fitness plateau.
    /// The population is left evaluated and speciated on its final generation.
    pub fn evolve_on_window<R: Rng + ?Sized>(
        &mut self,
        records: &[LoanRecord],
        spec: &FitnessSpec,
        config: &EvolutionConfig,
        rng: &mut R,
    ) -> Result<WindowEvolution> {
        if records.is_empty() {
            return Err(NeatError::NoData("cannot evolve on an empty window".into()));
        }
        self.reset_stagnation();
        let mut best: Option<(Genome, f64)> = None;
        let mut best_per_generation = Vec::new();
        let mut plateau = 0usize;
        let mut generations_run = 0usize;
        loop {
            self.evaluate(records, spec, config.execution)?;
            generations_run += 1;
            let c = self.champion_index().expect("population is nonempty and evaluated");
            let gen_best = self.fitness[c];
            best_per_generation.push(gen_best);
            match &best {
                Some((_, f)) if gen_best < *f + config.plateau_epsilon => {
                    plateau += 1;
                    if gen_best > *f {
                        best = Some((self.genomes[c].clone(), gen_best));
                    }
                }
                _ => {
                    plateau = 0;
                    best = Some((self.genomes[c].clone(), gen_best));
                }
            }

            self.speciate(config, rng);
            self.update_stagnation();
            if generations_run >= config.max_generations_per_window || plateau >= config.plateau_generations {
                break;
            }
            self.reproduce(config, rng)?;
        }
        let (best, best_fitness) = best.expect("at least one generation ran");
        Ok(WindowEvolution {
            generations_run,
            best,
            best_fitness,
            best_per_generation,
        })
    }
}

/// Integer shares of `total` proportional to `weights`, rounding by largest
/// remainder (ties go to the lower index). All-zero weights give all-zero
/// shares.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut shares: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = shares.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        shares[i] += 1;
    }
    shares
}
