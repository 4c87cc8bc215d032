//! Executable feed-forward networks compiled from genomes.

use std::collections::HashMap;

use crate::error::{NeatError, Result};
use crate::genome::{topological_order, Genome, NodeId, NodeKind};

/// Slope of the steepened logistic used at every hidden and output node.
pub const SIGMOID_SLOPE: f64 = 4.9;

/// Largest double below 1.
const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

/// `1 / (1 + e^(-4.9 x))`, kept inside the open interval (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-SIGMOID_SLOPE * x).exp())).clamp(f64::MIN_POSITIVE, MAX_SCORE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    Positive,
    Negative,
}

/// Positive iff `score >= threshold`.
#[inline]
pub fn classify(score: f64, threshold: f64) -> Class {
    if score >= threshold {
        Class::Positive
    } else {
        Class::Negative
    }
}

#[derive(Clone, Debug)]
struct Step {
    slot: usize,
    edges: std::ops::Range<usize>,
}

/// A compiled genome. Only enabled connections take part.
#[derive(Clone, Debug)]
pub struct Network {
    n_inputs: usize,
    evaluation_order: Vec<NodeId>,
    incoming: HashMap<NodeId, Vec<(NodeId, f64)>>,
    steps: Vec<Step>,
    edges: Vec<(usize, f64)>,
    output_slot: usize,
}

impl Network {
    pub fn compile(genome: &Genome) -> Result<Network> {
        let enabled = || genome.connections().iter().filter(|c| c.enabled);
        let order = topological_order(genome.nodes(), enabled())
            .ok_or_else(|| NeatError::CorruptGenome("enabled connections contain a cycle".into()))?;

        // Inputs and bias have no incoming edges, so hoisting them keeps the
        // order topological.
        let is_source =
            |id: &NodeId| matches!(kind_of(genome, *id), Some(NodeKind::Input | NodeKind::Bias));
        let mut evaluation_order: Vec<NodeId> = order.iter().copied().filter(is_source).collect();
        evaluation_order.sort_unstable();
        evaluation_order.extend(order.iter().copied().filter(|id| !is_source(id)));

        let slot: HashMap<NodeId, usize> = evaluation_order
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut incoming: HashMap<NodeId, Vec<(NodeId, f64)>> = HashMap::new();
        for c in enabled() {
            incoming.entry(c.out_node).or_default().push((c.in_node, c.weight));
        }

        let n_sources = genome.n_inputs() + 1;
        let mut steps = Vec::with_capacity(evaluation_order.len() - n_sources);
        let mut edges = Vec::new();
        for (i, id) in evaluation_order.iter().enumerate().skip(n_sources) {
            let start = edges.len();
            if let Some(inc) = incoming.get(id) {
                edges.extend(inc.iter().map(|&(src, w)| (slot[&src], w)));
            }
            steps.push(Step {
                slot: i,
                edges: start..edges.len(),
            });
        }

        Ok(Network {
            n_inputs: genome.n_inputs(),
            evaluation_order,
            incoming,
            steps,
            edges,
            output_slot: slot[&genome.output_id()],
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn evaluation_order(&self) -> &[NodeId] {
        &self.evaluation_order
    }

    /// `(source, weight)` pairs feeding `node` over enabled connections.
    pub fn incoming(&self, node: NodeId) -> &[(NodeId, f64)] {
        self.incoming.get(&node).map_or(&[], Vec::as_slice)
    }

    /// Output score for one feature vector.
    pub fn activate(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_inputs {
            return Err(NeatError::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_inputs,
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(NeatError::InvalidInput(format!("feature {i} is not finite")));
        }
        let mut scratch = Vec::new();
        Ok(self.activate_unchecked(features, &mut scratch))
    }

    /// Like [`Network::activate`] without input checks, reusing `scratch`
    /// across calls. The caller guarantees the length and finiteness.
    pub fn activate_unchecked(&self, features: &[f64], scratch: &mut Vec<f64>) -> f64 {
        debug_assert_eq!(features.len(), self.n_inputs);
        scratch.clear();
        scratch.resize(self.evaluation_order.len(), 0.0);
        scratch[..self.n_inputs].copy_from_slice(features);
        scratch[self.n_inputs] = 1.0;
        for step in &self.steps {
            let sum: f64 = self.edges[step.edges.clone()]
                .iter()
                .map(|&(src, w)| scratch[src] * w)
                .sum();
            scratch[step.slot] = sigmoid(sum);
        }
        scratch[self.output_slot]
    }
}

fn kind_of(genome: &Genome, id: NodeId) -> Option<NodeKind> {
    genome.nodes().iter().find(|n| n.id == id).map(|n| n.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{
        minimal_genome, mutate_add_node, ConnectionGene, InnovationRegistry, MutationConfig, NodeGene,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conn(in_node: NodeId, out_node: NodeId, weight: f64, innovation: u64) -> ConnectionGene {
        ConnectionGene { in_node, out_node, weight, enabled: true, innovation }
    }

    fn nodes(n_inputs: u32, hidden: &[NodeId]) -> Vec<NodeGene> {
        let mut v: Vec<NodeGene> = (0..n_inputs).map(|id| NodeGene { id, kind: NodeKind::Input }).collect();
        v.push(NodeGene { id: n_inputs, kind: NodeKind::Bias });
        v.push(NodeGene { id: n_inputs + 1, kind: NodeKind::Output });
        v.extend(hidden.iter().map(|&id| NodeGene { id, kind: NodeKind::Hidden }));
        v
    }

    fn oracle_sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-4.9 * x).exp())
    }

    /// Inputs 0,1; bias 2; output 3; hidden 4 computes AND and is subtracted.
    pub(crate) fn xor_genome() -> Genome {
        Genome::new(
            nodes(2, &[4]),
            vec![
                conn(0, 3, 4.0, 1),
                conn(1, 3, 4.0, 2),
                conn(2, 3, -2.0, 3),
                conn(0, 4, 4.0, 4),
                conn(1, 4, 4.0, 5),
                conn(2, 4, -6.0, 6),
                conn(4, 3, -8.0, 7),
            ],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn minimal_order_is_sources_then_output() {
        let mut reg = InnovationRegistry::new();
        let g = minimal_genome(2, &mut reg, &mut ChaCha8Rng::seed_from_u64(1), &MutationConfig::default()).unwrap();
        let net = Network::compile(&g).unwrap();
        assert_eq!(net.evaluation_order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn chain_order_follows_dependencies() {
        // input 0 -> h5 -> h4 -> output 2; ids chosen so numeric order disagrees.
        let g = Genome::new(
            nodes(1, &[4, 5]),
            vec![conn(0, 5, 1.0, 1), conn(5, 4, 1.0, 2), conn(4, 2, 1.0, 3)],
            0.0,
        )
        .unwrap();
        let net = Network::compile(&g).unwrap();
        let pos = |id| net.evaluation_order().iter().position(|&x| x == id).unwrap();
        assert!(pos(5) < pos(4) && pos(4) < pos(2));
        assert_eq!(net.incoming(4), &[(5, 1.0)]);
    }

    #[test]
    fn disabled_hidden_connection_contributes_nothing() {
        let disabled = ConnectionGene { enabled: false, ..conn(3, 2, 5.0, 3) };
        let with = Genome::new(
            nodes(1, &[3]),
            vec![conn(0, 2, 0.7, 1), conn(1, 2, -0.2, 2), disabled, conn(0, 3, 1.0, 4)],
            0.0,
        )
        .unwrap();
        let without = Genome::new(
            nodes(1, &[3]),
            vec![conn(0, 2, 0.7, 1), conn(1, 2, -0.2, 2), conn(0, 3, 1.0, 4)],
            0.0,
        )
        .unwrap();
        let (a, b) = (Network::compile(&with).unwrap(), Network::compile(&without).unwrap());
        for x in [0.0, 0.3, 1.0, -2.0] {
            assert_eq!(a.activate(&[x]).unwrap(), b.activate(&[x]).unwrap());
        }
    }

    #[test]
    fn zero_weights_score_one_half() {
        let mut reg = InnovationRegistry::new();
        let cfg = MutationConfig { init_weight_bound: 0.0, ..Default::default() };
        let g = minimal_genome(5, &mut reg, &mut ChaCha8Rng::seed_from_u64(1), &cfg).unwrap();
        let net = Network::compile(&g).unwrap();
        assert_eq!(net.activate(&[0.1, 0.9, 3.0, -1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn single_layer_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut reg = InnovationRegistry::new();
        let g = minimal_genome(4, &mut reg, &mut rng, &MutationConfig::default()).unwrap();
        let net = Network::compile(&g).unwrap();
        let w: Vec<f64> = g.connections().iter().map(|c| c.weight).collect();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sum = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[4];
            assert!((net.activate(&x).unwrap() - oracle_sigmoid(sum)).abs() < 1e-12);
        }
    }

    #[test]
    fn handcrafted_xor() {
        let net = Network::compile(&xor_genome()).unwrap();
        for (x, expected) in [([0.0, 0.0], false), ([0.0, 1.0], true), ([1.0, 0.0], true), ([1.0, 1.0], false)] {
            let score = net.activate(&x).unwrap();
            assert_eq!(score > 0.5, expected, "input {x:?} scored {score}");
        }
    }

    #[test]
    fn fresh_split_stays_close_to_original() {
        // Splitting inserts a sigmoid on the path, so outputs differ; the
        // deviation is bounded because the sigmoid maps into (0, 1).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut reg = InnovationRegistry::new();
        let g = minimal_genome(3, &mut reg, &mut rng, &MutationConfig::default()).unwrap();
        let split = mutate_add_node(&g, &mut reg, &mut rng);
        let (a, b) = (Network::compile(&g).unwrap(), Network::compile(&split).unwrap());
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            worst = worst.max((a.activate(&x).unwrap() - b.activate(&x).unwrap()).abs());
        }
        assert!(worst < 0.5, "split deviation {worst}");
    }

    #[test]
    fn activation_rejects_bad_input() {
        let net = Network::compile(&xor_genome()).unwrap();
        assert!(matches!(net.activate(&[1.0]), Err(NeatError::InvalidInput(_))));
        assert!(matches!(net.activate(&[1.0, f64::NAN]), Err(NeatError::InvalidInput(_))));
        assert!(matches!(net.activate(&[f64::INFINITY, 0.0]), Err(NeatError::InvalidInput(_))));
    }

    #[test]
    fn scores_stay_strictly_inside_unit_interval() {
        let net = Network::compile(&xor_genome()).unwrap();
        for x in [[1e6, 1e6], [-1e6, -1e6], [1e6, -1e6]] {
            let s = net.activate(&x).unwrap();
            assert!(s > 0.0 && s < 1.0, "{s}");
        }
        assert!(sigmoid(1e9) < 1.0 && sigmoid(-1e9) > 0.0);
    }

    #[test]
    fn classify_ties_are_positive() {
        assert_eq!(classify(0.5, 0.5), Class::Positive);
        assert_eq!(classify(0.49, 0.5), Class::Negative);
        assert_eq!(classify(1e-300, 0.0), Class::Positive);
    }
}
