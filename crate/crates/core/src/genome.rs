//! Genetic encoding: node genes, innovation-numbered connection genes, the
//! structural and weight mutation operators, aligned crossover and the
//! compatibility distance used for speciation.
//!
//! Node ids follow a fixed layout: inputs are `0..n_inputs`, the bias node is
//! `n_inputs` and the output node is `n_inputs + 1`. Hidden nodes receive ids
//! from the [`InnovationRegistry`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{NeatError, Result};

pub type NodeId = u32;
pub type Innovation = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input,
    Bias,
    Hidden,
    Output,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Bias => "bias",
            NodeKind::Hidden => "hidden",
            NodeKind::Output => "output",
        }
    }
}

impl FromStr for NodeKind {
    type Err = NeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(NodeKind::Input),
            "bias" => Ok(NodeKind::Bias),
            "hidden" => Ok(NodeKind::Hidden),
            "output" => Ok(NodeKind::Output),
            other => Err(NeatError::CorruptGenome(format!("unknown node kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionGene {
    pub in_node: NodeId,
    pub out_node: NodeId,
    pub weight: f64,
    pub enabled: bool,
    pub innovation: Innovation,
}

/// Operator rates and weight ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationConfig {
    pub p_weight_mutate: f64,
    /// Given a weight mutation, probability of Gaussian perturbation rather
    /// than a fresh uniform draw.
    pub p_perturb: f64,
    pub perturb_std: f64,
    pub p_add_connection: f64,
    pub p_add_node: f64,
    pub p_keep_disabled: f64,
    /// Initial and replacement weights are uniform in `[-init_weight_bound, init_weight_bound]`.
    pub init_weight_bound: f64,
    /// Weights are clamped to `[-weight_bound, weight_bound]` after mutation.
    pub weight_bound: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            p_weight_mutate: 0.8,
            p_perturb: 0.9,
            perturb_std: 0.5,
            p_add_connection: 0.05,
            p_add_node: 0.03,
            p_keep_disabled: 0.75,
            init_weight_bound: 1.0,
            weight_bound: 8.0,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_weight_mutate", self.p_weight_mutate),
            ("p_perturb", self.p_perturb),
            ("p_add_connection", self.p_add_connection),
            ("p_add_node", self.p_add_node),
            ("p_keep_disabled", self.p_keep_disabled),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NeatError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.perturb_std >= 0.0 && self.perturb_std.is_finite()) {
            return Err(NeatError::Config("perturb_std must be finite and >= 0".into()));
        }
        if !(self.init_weight_bound >= 0.0 && self.init_weight_bound.is_finite()) {
            return Err(NeatError::Config("init_weight_bound must be finite and >= 0".into()));
        }
        if !(self.weight_bound > 0.0 && self.weight_bound.is_finite()) {
            return Err(NeatError::Config("weight_bound must be finite and > 0".into()));
        }
        Ok(())
    }

    fn fresh_weight<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.init_weight_bound == 0.0 {
            0.0
        } else {
            rng.random_range(-self.init_weight_bound..=self.init_weight_bound)
        }
    }
}

/// Coefficients of `c_excess * E / N + c_disjoint * D / N + c_weight * W`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceConfig {
    pub c_excess: f64,
    pub c_disjoint: f64,
    pub c_weight: f64,
    /// Below this many genes in both genomes the normaliser `N` is 1.
    pub small_genome_threshold: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            c_excess: 1.0,
            c_disjoint: 1.0,
            c_weight: 0.4,
            small_genome_threshold: 20,
        }
    }
}

/// New node and connection markings produced by splitting a connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitMarking {
    pub node: NodeId,
    pub in_innovation: Innovation,
    pub out_innovation: Innovation,
}

/// Hands out historical markings. Identical structural mutations within one
/// generation get identical markings; [`InnovationRegistry::new_generation`]
/// clears the per-generation memo.
#[derive(Clone, Debug)]
pub struct InnovationRegistry {
    next_innovation: Innovation,
    next_node_id: NodeId,
    connection_memo: HashMap<(NodeId, NodeId), Innovation>,
    split_memo: HashMap<Innovation, SplitMarking>,
}

impl Default for InnovationRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl InnovationRegistry {
    pub fn new() -> Self {
        InnovationRegistry {
            next_innovation: 1,
            next_node_id: 0,
            connection_memo: HashMap::new(),
            split_memo: HashMap::new(),
        }
    }

    pub fn next_innovation(&self) -> Innovation {
        self.next_innovation
    }

    pub fn next_node_id(&self) -> NodeId {
        self.next_node_id
    }

    pub fn new_generation(&mut self) {
        self.connection_memo.clear();
        self.split_memo.clear();
    }

    /// Ensures hidden-node ids never collide with ids below `count`.
    pub fn reserve_nodes(&mut self, count: NodeId) {
        self.next_node_id = self.next_node_id.max(count);
    }

    /// Makes sure future markings are above everything in `genome`. Used when
    /// a genome from elsewhere (a file) joins a population.
    pub fn absorb(&mut self, genome: &Genome) {
        if let Some(max) = genome.connections.iter().map(|c| c.innovation).max() {
            self.next_innovation = self.next_innovation.max(max + 1);
        }
        if let Some(max) = genome.nodes.iter().map(|n| n.id).max() {
            self.next_node_id = self.next_node_id.max(max + 1);
        }
    }

    pub fn connection_innovation(&mut self, in_node: NodeId, out_node: NodeId) -> Innovation {
        if let Some(&innovation) = self.connection_memo.get(&(in_node, out_node)) {
            return innovation;
        }
        let innovation = self.bump_innovation();
        self.connection_memo.insert((in_node, out_node), innovation);
        innovation
    }

    pub fn split(&mut self, innovation: Innovation) -> SplitMarking {
        if let Some(&marking) = self.split_memo.get(&innovation) {
            return marking;
        }
        let marking = self.fresh_split();
        self.split_memo.insert(innovation, marking);
        marking
    }

    fn fresh_split(&mut self) -> SplitMarking {
        let node = self.next_node_id;
        self.next_node_id += 1;
        SplitMarking {
            node,
            in_innovation: self.bump_innovation(),
            out_innovation: self.bump_innovation(),
        }
    }

    fn bump_innovation(&mut self) -> Innovation {
        let innovation = self.next_innovation;
        self.next_innovation += 1;
        innovation
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    nodes: Vec<NodeGene>,
    connections: Vec<ConnectionGene>,
    n_inputs: usize,
    /// Fitness carried over from the previous window (profit-with-history fitness).
    pub historical_fitness: f64,
    pub species_id: Option<usize>,
}

impl Genome {
    /// Builds a genome from explicit genes, checking every structural invariant.
    /// Nodes and connections may come in any order.
    pub fn new(
        mut nodes: Vec<NodeGene>,
        mut connections: Vec<ConnectionGene>,
        historical_fitness: f64,
    ) -> Result<Genome> {
        nodes.sort_by_key(|n| n.id);
        connections.sort_by_key(|c| c.innovation);
        let n_inputs = nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let genome = Genome {
            nodes,
            connections,
            n_inputs,
            historical_fitness,
            species_id: None,
        };
        genome.validate()?;
        Ok(genome)
    }

    /// Checks node layout, gene uniqueness, endpoint existence and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let corrupt = |msg: String| Err(NeatError::CorruptGenome(msg));
        if self.n_inputs == 0 {
            return corrupt("genome has no input nodes".into());
        }
        for pair in self.nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return corrupt(format!("duplicate node id {}", pair[0].id));
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let expected = match i {
                i if i < self.n_inputs => Some(NodeKind::Input),
                i if i == self.n_inputs => Some(NodeKind::Bias),
                i if i == self.n_inputs + 1 => Some(NodeKind::Output),
                _ => Some(NodeKind::Hidden),
            };
            if expected != Some(node.kind) || (i <= self.n_inputs + 1 && node.id as usize != i) {
                return corrupt(format!(
                    "node {} ({}) breaks the input/bias/output layout",
                    node.id,
                    node.kind.as_str()
                ));
            }
        }
        if self.nodes.len() < self.n_inputs + 2 {
            return corrupt("genome needs one bias and one output node".into());
        }
        let kinds: HashMap<NodeId, NodeKind> = self.nodes.iter().map(|n| (n.id, n.kind)).collect();
        let mut pairs = HashSet::new();
        for (i, c) in self.connections.iter().enumerate() {
            if i > 0 && self.connections[i - 1].innovation >= c.innovation {
                return corrupt(format!("duplicate innovation {}", c.innovation));
            }
            if c.innovation == 0 {
                return corrupt("innovation numbers start at 1".into());
            }
            let (Some(_), Some(&out_kind)) = (kinds.get(&c.in_node), kinds.get(&c.out_node)) else {
                return corrupt(format!(
                    "connection {} references a missing node",
                    c.innovation
                ));
            };
            if matches!(out_kind, NodeKind::Input | NodeKind::Bias) {
                return corrupt(format!("connection {} targets an input or bias", c.innovation));
            }
            if !c.weight.is_finite() {
                return corrupt(format!("connection {} has a non-finite weight", c.innovation));
            }
            if !pairs.insert((c.in_node, c.out_node)) {
                return corrupt(format!(
                    "duplicate connection {} -> {}",
                    c.in_node, c.out_node
                ));
            }
        }
        // Disabled genes count too: crossover may re-enable them.
        if topological_order(&self.nodes, self.connections.iter()).is_none() {
            return corrupt("connections contain a cycle".into());
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn bias_id(&self) -> NodeId {
        self.n_inputs as NodeId
    }

    pub fn output_id(&self) -> NodeId {
        self.n_inputs as NodeId + 1
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.len() - self.n_inputs - 2
    }

    pub fn enabled_count(&self) -> usize {
        self.connections.iter().filter(|c| c.enabled).count()
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.nodes.binary_search_by_key(&id, |n| n.id).is_ok()
    }

    fn kind_of(&self, id: NodeId) -> Option<NodeKind> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| self.nodes[i].kind)
    }

    /// Kahn's algorithm over enabled connections.
    pub fn is_acyclic(&self) -> bool {
        topological_order(&self.nodes, self.connections.iter().filter(|c| c.enabled)).is_some()
    }

    fn insert_node(&mut self, node: NodeGene) {
        if let Err(pos) = self.nodes.binary_search_by_key(&node.id, |n| n.id) {
            self.nodes.insert(pos, node);
        }
    }

    fn insert_connection(&mut self, gene: ConnectionGene) {
        let pos = self
            .connections
            .partition_point(|c| c.innovation < gene.innovation);
        self.connections.insert(pos, gene);
    }
}

/// Topological order of `nodes` under `edges`, or `None` on a cycle.
pub(crate) fn topological_order<'a>(
    nodes: &[NodeGene],
    edges: impl Iterator<Item = &'a ConnectionGene>,
) -> Option<Vec<NodeId>> {
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let mut indegree = vec![0usize; nodes.len()];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for c in edges {
        let (&from, &to) = (index.get(&c.in_node)?, index.get(&c.out_node)?);
        out[from].push(to);
        indegree[to] += 1;
    }
    // Nodes are sorted by id, so seeding the queue in index order keeps the
    // result deterministic.
    let mut ready: Vec<usize> = (0..nodes.len()).filter(|&i| indegree[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(i) = ready.pop() {
        order.push(nodes[i].id);
        for &j in out[i].iter().rev() {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    (order.len() == nodes.len()).then_some(order)
}

/// Whether adding `from -> to` to `connections` closes a directed cycle.
/// Disabled connections count, so re-enabling a gene later can never create
/// a cycle.
fn creates_cycle(connections: &[ConnectionGene], from: NodeId, to: NodeId) -> bool {
    if from == to {
        return true;
    }
    let mut stack = vec![to];
    let mut seen = HashSet::new();
    while let Some(node) = stack.pop() {
        if node == from {
            return true;
        }
        if seen.insert(node) {
            stack.extend(
                connections
                    .iter()
                    .filter(|c| c.in_node == node)
                    .map(|c| c.out_node),
            );
        }
    }
    false
}

/// Fully connected genome with no hidden nodes: every input and the bias feed
/// the output.
pub fn minimal_genome<R: Rng + ?Sized>(
    n_features: usize,
    registry: &mut InnovationRegistry,
    rng: &mut R,
    config: &MutationConfig,
) -> Result<Genome> {
    if n_features == 0 {
        return Err(NeatError::InvalidDimension(
            "a genome needs at least one input feature".into(),
        ));
    }
    let bias = n_features as NodeId;
    let output = bias + 1;
    registry.reserve_nodes(output + 1);

    let mut nodes: Vec<NodeGene> = (0..n_features as NodeId)
        .map(|id| NodeGene {
            id,
            kind: NodeKind::Input,
        })
        .collect();
    nodes.push(NodeGene {
        id: bias,
        kind: NodeKind::Bias,
    });
    nodes.push(NodeGene {
        id: output,
        kind: NodeKind::Output,
    });

    let mut connections: Vec<ConnectionGene> = (0..=bias)
        .map(|source| ConnectionGene {
            in_node: source,
            out_node: output,
            weight: config.fresh_weight(rng),
            enabled: true,
            innovation: registry.connection_innovation(source, output),
        })
        .collect();
    connections.sort_by_key(|c| c.innovation);

    Ok(Genome {
        nodes,
        connections,
        n_inputs: n_features,
        historical_fitness: 0.0,
        species_id: None,
    })
}

pub fn mutate_weights<R: Rng + ?Sized>(genome: &Genome, rng: &mut R, config: &MutationConfig) -> Genome {
    let mut child = genome.clone();
    let noise = Normal::new(0.0, config.perturb_std).expect("perturb_std validated as >= 0");
    for c in &mut child.connections {
        if !rng.random_bool(config.p_weight_mutate) {
            continue;
        }
        let w = if rng.random_bool(config.p_perturb) {
            c.weight + noise.sample(rng)
        } else {
            config.fresh_weight(rng)
        };
        c.weight = w.clamp(-config.weight_bound, config.weight_bound);
    }
    child
}

/// Every `(from, to)` pair that `mutate_add_connection` may add.
pub fn legal_new_connections(genome: &Genome) -> Vec<(NodeId, NodeId)> {
    let existing: HashSet<(NodeId, NodeId)> = genome
        .connections
        .iter()
        .map(|c| (c.in_node, c.out_node))
        .collect();
    let mut candidates = Vec::new();
    for target in genome
        .nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Hidden | NodeKind::Output))
    {
        for source in &genome.nodes {
            if source.id == target.id || existing.contains(&(source.id, target.id)) {
                continue;
            }
            if !creates_cycle(&genome.connections, source.id, target.id) {
                candidates.push((source.id, target.id));
            }
        }
    }
    candidates
}

/// Adds one connection between previously unconnected nodes, or returns the
/// genome unchanged when no legal pair exists.
pub fn mutate_add_connection<R: Rng + ?Sized>(
    genome: &Genome,
    registry: &mut InnovationRegistry,
    rng: &mut R,
    config: &MutationConfig,
) -> Genome {
    let candidates = legal_new_connections(genome);
    let mut child = genome.clone();
    if candidates.is_empty() {
        return child;
    }
    let (in_node, out_node) = candidates[rng.random_range(0..candidates.len())];
    let gene = ConnectionGene {
        in_node,
        out_node,
        weight: config.fresh_weight(rng),
        enabled: true,
        innovation: registry.connection_innovation(in_node, out_node),
    };
    if child.connections.iter().any(|c| c.innovation == gene.innovation) {
        // The memo handed back a marking this genome already carries under a
        // different pair; only possible with hand-built genomes.
        return child;
    }
    child.insert_connection(gene);
    child
}

/// Splits a uniformly chosen enabled connection with a new hidden node. The
/// incoming half gets weight 1 and the outgoing half inherits the old weight.
pub fn mutate_add_node<R: Rng + ?Sized>(
    genome: &Genome,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> Genome {
    let mut child = genome.clone();
    let enabled: Vec<usize> = child
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return child;
    }
    let target = enabled[rng.random_range(0..enabled.len())];
    let old = child.connections[target];
    let mut marking = registry.split(old.innovation);
    let clashes = child.has_node(marking.node)
        || child
            .connections
            .iter()
            .any(|c| c.innovation == marking.in_innovation || c.innovation == marking.out_innovation);
    if clashes {
        marking = registry.fresh_split();
    }
    child.connections[target].enabled = false;
    child.insert_node(NodeGene {
        id: marking.node,
        kind: NodeKind::Hidden,
    });
    child.insert_connection(ConnectionGene {
        in_node: old.in_node,
        out_node: marking.node,
        weight: 1.0,
        enabled: true,
        innovation: marking.in_innovation,
    });
    child.insert_connection(ConnectionGene {
        in_node: marking.node,
        out_node: old.out_node,
        weight: old.weight,
        enabled: true,
        innovation: marking.out_innovation,
    });
    child
}

enum Aligned<'a> {
    Matching(&'a ConnectionGene, &'a ConnectionGene),
    OnlyA(&'a ConnectionGene),
    OnlyB(&'a ConnectionGene),
}

/// Merge-walks two innovation-sorted gene lists.
fn align<'a>(a: &'a [ConnectionGene], b: &'a [ConnectionGene]) -> Vec<Aligned<'a>> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.innovation == y.innovation => {
                out.push(Aligned::Matching(x, y));
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.innovation < y.innovation => {
                out.push(Aligned::OnlyA(x));
                i += 1;
            }
            (Some(_), Some(y)) => {
                out.push(Aligned::OnlyB(y));
                j += 1;
            }
            (Some(x), None) => {
                out.push(Aligned::OnlyA(x));
                i += 1;
            }
            (None, Some(y)) => {
                out.push(Aligned::OnlyB(y));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Aligned crossover. Matching genes take their weight from a random parent;
/// disjoint and excess genes come from the fitter parent, or from both on a
/// fitness tie (skipping any that would duplicate a pair or close a cycle).
pub fn crossover<R: Rng + ?Sized>(
    parent_a: &Genome,
    parent_b: &Genome,
    fitness_a: f64,
    fitness_b: f64,
    rng: &mut R,
    config: &MutationConfig,
) -> Result<Genome> {
    if parent_a.n_inputs != parent_b.n_inputs {
        return Err(NeatError::IncompatibleGenome(format!(
            "parents have {} and {} inputs",
            parent_a.n_inputs, parent_b.n_inputs
        )));
    }
    let tie = fitness_a == fitness_b;
    let (fitter, other, fitter_is_a) = if fitness_b > fitness_a {
        (parent_b, parent_a, false)
    } else {
        (parent_a, parent_b, true)
    };

    let mut genes = Vec::with_capacity(fitter.connections.len());
    let mut from_other = Vec::new();
    let aligned = align(&fitter.connections, &other.connections);
    for entry in aligned {
        match entry {
            Aligned::Matching(f, o) => {
                let mut gene = *f;
                if rng.random_bool(0.5) {
                    gene.weight = o.weight;
                }
                gene.enabled = if !f.enabled || !o.enabled {
                    !rng.random_bool(config.p_keep_disabled)
                } else {
                    true
                };
                genes.push(gene);
            }
            Aligned::OnlyA(f) => genes.push(*f),
            Aligned::OnlyB(o) if tie => from_other.push(*o),
            Aligned::OnlyB(_) => {}
        }
    }

    let mut child = Genome {
        nodes: fitter
            .nodes
            .iter()
            .filter(|n| n.kind != NodeKind::Hidden)
            .copied()
            .collect(),
        connections: genes,
        n_inputs: fitter.n_inputs,
        historical_fitness: if tie || fitter_is_a {
            parent_a.historical_fitness
        } else {
            parent_b.historical_fitness
        },
        species_id: None,
    };

    for gene in from_other {
        let duplicate = child
            .connections
            .iter()
            .any(|c| (c.in_node, c.out_node) == (gene.in_node, gene.out_node));
        if duplicate || creates_cycle(&child.connections, gene.in_node, gene.out_node) {
            continue;
        }
        child.insert_connection(gene);
    }

    let referenced: HashSet<NodeId> = child
        .connections
        .iter()
        .flat_map(|c| [c.in_node, c.out_node])
        .collect();
    for parent in [fitter, other] {
        for node in parent.nodes.iter().filter(|n| n.kind == NodeKind::Hidden) {
            if referenced.contains(&node.id) && child.kind_of(node.id).is_none() {
                child.insert_node(*node);
            }
        }
    }
    Ok(child)
}

/// Excess and disjoint counts plus mean absolute weight difference of
/// matching genes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeneComparison {
    pub excess: usize,
    pub disjoint: usize,
    pub matching: usize,
    pub mean_weight_diff: f64,
}

pub fn compare_genes(a: &Genome, b: &Genome) -> GeneComparison {
    let max_a = a.connections.last().map_or(0, |c| c.innovation);
    let max_b = b.connections.last().map_or(0, |c| c.innovation);
    let mut cmp = GeneComparison::default();
    let mut weight_diff = 0.0;
    for entry in align(&a.connections, &b.connections) {
        match entry {
            Aligned::Matching(x, y) => {
                cmp.matching += 1;
                weight_diff += (x.weight - y.weight).abs();
            }
            Aligned::OnlyA(x) if x.innovation > max_b => cmp.excess += 1,
            Aligned::OnlyB(y) if y.innovation > max_a => cmp.excess += 1,
            _ => cmp.disjoint += 1,
        }
    }
    if cmp.matching > 0 {
        cmp.mean_weight_diff = weight_diff / cmp.matching as f64;
    }
    cmp
}

pub fn compatibility_distance(a: &Genome, b: &Genome, config: &DistanceConfig) -> f64 {
    let cmp = compare_genes(a, b);
    let longest = a.connections.len().max(b.connections.len());
    let n = if longest < config.small_genome_threshold {
        1.0
    } else {
        longest as f64
    };
    config.c_excess * cmp.excess as f64 / n
        + config.c_disjoint * cmp.disjoint as f64 / n
        + config.c_weight * cmp.mean_weight_diff
}

impl fmt::Display for Genome {
    /// Line-oriented text form. Reals use 17 significant digits so parsing
    /// restores them bit for bit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "genome {} {} {:.16e}",
            self.nodes.len(),
            self.connections.len(),
            self.historical_fitness
        )?;
        for n in &self.nodes {
            writeln!(f, "node {} {}", n.id, n.kind.as_str())?;
        }
        for c in &self.connections {
            writeln!(
                f,
                "conn {} {} {:.16e} {} {}",
                c.in_node,
                c.out_node,
                c.weight,
                u8::from(c.enabled),
                c.innovation
            )?;
        }
        Ok(())
    }
}

impl FromStr for Genome {
    type Err = NeatError;

    fn from_str(text: &str) -> Result<Genome> {
        fn field<T: FromStr>(parts: &[&str], i: usize, line: usize, what: &str) -> Result<T> {
            parts
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| NeatError::CorruptGenome(format!("line {line}: bad {what}")))
        }

        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| NeatError::CorruptGenome("empty genome text".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.first() != Some(&"genome") || parts.len() != 4 {
            return Err(NeatError::CorruptGenome(format!(
                "line {line_no}: expected `genome <n_nodes> <n_conns> <historical_fitness>`"
            )));
        }
        let n_nodes: usize = field(&parts, 1, line_no, "node count")?;
        let n_conns: usize = field(&parts, 2, line_no, "connection count")?;
        let historical_fitness: f64 = field(&parts, 3, line_no, "historical fitness")?;

        let mut nodes = Vec::with_capacity(n_nodes);
        let mut connections = Vec::with_capacity(n_conns);
        for (line_no, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.first().copied() {
                Some("node") if parts.len() == 3 => nodes.push(NodeGene {
                    id: field(&parts, 1, line_no, "node id")?,
                    kind: parts[2].parse()?,
                }),
                Some("conn") if parts.len() == 6 => {
                    let enabled = match parts[4] {
                        "0" => false,
                        "1" => true,
                        _ => {
                            return Err(NeatError::CorruptGenome(format!(
                                "line {line_no}: enabled flag must be 0 or 1"
                            )))
                        }
                    };
                    connections.push(ConnectionGene {
                        in_node: field(&parts, 1, line_no, "source node")?,
                        out_node: field(&parts, 2, line_no, "target node")?,
                        weight: field(&parts, 3, line_no, "weight")?,
                        enabled,
                        innovation: field(&parts, 5, line_no, "innovation")?,
                    })
                }
                _ => {
                    return Err(NeatError::CorruptGenome(format!(
                        "line {line_no}: unrecognised line `{line}`"
                    )))
                }
            }
        }
        if nodes.len() != n_nodes || connections.len() != n_conns {
            return Err(NeatError::CorruptGenome(format!(
                "header declares {n_nodes} nodes and {n_conns} connections, found {} and {}",
                nodes.len(),
                connections.len()
            )));
        }
        Genome::new(nodes, connections, historical_fitness)
    }
}
