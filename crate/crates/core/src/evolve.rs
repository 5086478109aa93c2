//! Tree-based genetic programming for symbolic regression.
//!
//! The engine follows the classic generational loop: ramped half-and-half
//! initialization, tournament selection, and a per-offspring choice between
//! cloning, subtree crossover and subtree mutation, repeated until the new
//! population reaches the initial size. The best individual seen in any
//! generation is the result of a run.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{InitMethod, InputBinding, ProgramTree, TerminalSet};

/// Upper bound on the sum of squared errors.
pub const FITNESS_CAP: f64 = 1e18;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub p_clone: f64,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub max_depth_initial: usize,
    pub max_depth_overall: usize,
    /// Maximum depth of the random subtree grafted in by mutation.
    pub mutation_subtree_depth: usize,
    pub tournament_size: usize,
    /// A run stops as soon as the best fitness is at or below this value.
    pub target_fitness: f64,
    pub rng_seed: u64,
    pub terminals: TerminalSet,
    /// Lets template building offer the target coordinate `y` as a GP
    /// variable. Off by default: with it on, `y` itself is an exact formula.
    pub include_target_variable: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population_size: 1000,
            max_generations: 500,
            p_clone: 0.05,
            p_crossover: 0.8,
            p_mutation: 0.15,
            max_depth_initial: 6,
            max_depth_overall: 17,
            mutation_subtree_depth: 4,
            tournament_size: 3,
            target_fitness: 0.0,
            rng_seed: 1,
            terminals: TerminalSet::with_variables(["x"]).expect("valid default terminals"),
            include_target_variable: false,
        }
    }
}

impl EvolutionConfig {
    pub fn with_terminals(terminals: TerminalSet) -> Self {
        EvolutionConfig {
            terminals,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_clone, self.p_crossover, self.p_mutation];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("operator probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "p_clone + p_crossover + p_mutation = {total}, expected 1"
            )));
        }
        if self.population_size == 0 {
            return Err(Error::invalid("population_size must be positive"));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(Error::invalid(format!(
                "tournament_size {} must be in 1..={}",
                self.tournament_size, self.population_size
            )));
        }
        if self.max_depth_initial == 0 || self.mutation_subtree_depth == 0 {
            return Err(Error::invalid("tree depths must be at least 1"));
        }
        if self.max_depth_initial > self.max_depth_overall {
            return Err(Error::invalid(format!(
                "max_depth_initial {} exceeds max_depth_overall {}",
                self.max_depth_initial, self.max_depth_overall
            )));
        }
        if self.target_fitness.is_nan() || self.target_fitness < 0.0 {
            return Err(Error::invalid("target_fitness must be non-negative"));
        }
        Ok(())
    }

    /// Parses a flat `key = value` file. Keys are the field names; the
    /// terminal set is given by `variable_names` (comma separated),
    /// `const_min` and `const_max`. Unlisted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EvolutionConfig::default();
        let mut names: Vec<String> = cfg.terminals.variable_names().to_vec();
        let mut const_min = cfg.terminals.const_min();
        let mut const_max = cfg.terminals.const_max();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Format {
                what: "config",
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());

            fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("invalid number {v:?}"))
            }
            let r: std::result::Result<(), String> = (|| {
                match key {
                    "population_size" => cfg.population_size = num(value)?,
                    "max_generations" => cfg.max_generations = num(value)?,
                    "p_clone" => cfg.p_clone = num(value)?,
                    "p_crossover" => cfg.p_crossover = num(value)?,
                    "p_mutation" => cfg.p_mutation = num(value)?,
                    "max_depth_initial" => cfg.max_depth_initial = num(value)?,
                    "max_depth_overall" => cfg.max_depth_overall = num(value)?,
                    "mutation_subtree_depth" => cfg.mutation_subtree_depth = num(value)?,
                    "tournament_size" => cfg.tournament_size = num(value)?,
                    "target_fitness" => cfg.target_fitness = num(value)?,
                    "rng_seed" => cfg.rng_seed = parse_seed(value)?,
                    "const_min" => const_min = num(value)?,
                    "const_max" => const_max = num(value)?,
                    "variable_names" => {
                        names = value.split(',').map(|s| s.trim().to_string()).collect()
                    }
                    "include_target_variable" => {
                        cfg.include_target_variable = match value {
                            "true" | "1" => true,
                            "false" | "0" => false,
                            _ => return Err(format!("invalid boolean {value:?}")),
                        }
                    }
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            r.map_err(bad)?;
        }
        cfg.terminals = TerminalSet::new(names, const_min, const_max)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Renders the config in the format accepted by [`EvolutionConfig::parse`].
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "population_size = {}", self.population_size);
        let _ = writeln!(s, "max_generations = {}", self.max_generations);
        let _ = writeln!(s, "p_clone = {}", self.p_clone);
        let _ = writeln!(s, "p_crossover = {}", self.p_crossover);
        let _ = writeln!(s, "p_mutation = {}", self.p_mutation);
        let _ = writeln!(s, "max_depth_initial = {}", self.max_depth_initial);
        let _ = writeln!(s, "max_depth_overall = {}", self.max_depth_overall);
        let _ = writeln!(s, "mutation_subtree_depth = {}", self.mutation_subtree_depth);
        let _ = writeln!(s, "tournament_size = {}", self.tournament_size);
        let _ = writeln!(s, "target_fitness = {}", self.target_fitness);
        let _ = writeln!(s, "rng_seed = {}", self.rng_seed);
        let _ = writeln!(
            s,
            "variable_names = {}",
            self.terminals.variable_names().join(",")
        );
        let _ = writeln!(s, "const_min = {}", self.terminals.const_min());
        let _ = writeln!(s, "const_max = {}", self.terminals.const_max());
        let _ = writeln!(s, "include_target_variable = {}", self.include_target_variable);
        s
    }
}

fn parse_seed(v: &str) -> std::result::Result<u64, String> {
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => v.parse(),
    };
    parsed.map_err(|_| format!("invalid seed {v:?}"))
}

/// One training example: inputs for the formula and the value it should produce.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessCase {
    pub inputs: InputBinding,
    pub target: f64,
}

impl FitnessCase {
    pub fn new(inputs: impl Into<InputBinding>, target: f64) -> Self {
        FitnessCase {
            inputs: inputs.into(),
            target,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub tree: ProgramTree,
    /// Sum of squared errors; lower is better.
    pub fitness: f64,
}

impl Individual {
    /// Ordering used everywhere a "better" individual is picked: lower
    /// fitness, then fewer nodes.
    fn rank_cmp(&self, other: &Individual) -> Ordering {
        self.fitness
            .total_cmp(&other.fitness)
            .then(self.tree.node_count().cmp(&other.tree.node_count()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub best: Individual,
    /// Number of evolution steps taken after initialization.
    pub generations_run: usize,
    /// One entry per generation, starting with the initial population.
    pub history: Vec<GenerationStats>,
}

fn check_cases(cases: &[FitnessCase], arity: Option<usize>) -> Result<()> {
    if cases.is_empty() {
        return Err(Error::invalid("fitness case list is empty"));
    }
    if let Some(arity) = arity {
        if let Some(c) = cases.iter().find(|c| c.inputs.len() != arity) {
            return Err(Error::invalid(format!(
                "fitness case has {} inputs, terminal set has {arity} variables",
                c.inputs.len()
            )));
        }
    }
    Ok(())
}

/// Sum of squared errors of `tree` over `cases`, capped at [`FITNESS_CAP`].
pub fn fitness(tree: &ProgramTree, cases: &[FitnessCase]) -> Result<f64> {
    check_cases(cases, None)?;
    if let Some(index) = tree.max_variable_index() {
        if let Some(c) = cases.iter().find(|c| c.inputs.len() <= index) {
            return Err(Error::ArityMismatch {
                index,
                arity: c.inputs.len(),
            });
        }
    }
    Ok(sse(tree, cases))
}

/// Callers guarantee non-empty cases with enough inputs for `tree`.
fn sse(tree: &ProgramTree, cases: &[FitnessCase]) -> f64 {
    let mut total = 0.0;
    for case in cases {
        let err = tree.evaluate_checked(case.inputs.values()) - case.target;
        total += err * err;
        if total >= FITNESS_CAP {
            return FITNESS_CAP;
        }
    }
    total
}

/// Fitness cases stored column-wise, so a tree is evaluated on all cases
/// at once, one node at a time. Gives the same values as [`sse`].
struct CaseColumns {
    n: usize,
    columns: Vec<f64>,
    targets: Vec<f64>,
    stack: Vec<f64>,
}

impl CaseColumns {
    fn new(cases: &[FitnessCase]) -> Self {
        let n = cases.len();
        let arity = cases.iter().map(|c| c.inputs.len()).min().unwrap_or(0);
        let mut columns = vec![0.0; arity * n];
        for (row, case) in cases.iter().enumerate() {
            for (v, &value) in case.inputs.values()[..arity].iter().enumerate() {
                columns[v * n + row] = value;
            }
        }
        CaseColumns {
            n,
            columns,
            targets: cases.iter().map(|c| c.target).collect(),
            stack: Vec::new(),
        }
    }

    fn sse(&mut self, tree: &ProgramTree) -> f64 {
        use crate::expr::{Node, Terminal};
        let n = self.n;
        self.stack.clear();
        for node in tree.nodes().iter().rev() {
            match *node {
                Node::Leaf(Terminal::Variable(v)) => {
                    self.stack.extend_from_slice(&self.columns[v * n..(v + 1) * n])
                }
                Node::Leaf(Terminal::Constant(c)) => {
                    self.stack.extend(std::iter::repeat_n(c as f64, n))
                }
                Node::Op(op) => {
                    // top of stack is the left operand
                    let len = self.stack.len();
                    let (rest, left) = self.stack.split_at_mut(len - n);
                    let right = &mut rest[len - 2 * n..];
                    for (r, &l) in right.iter_mut().zip(left.iter()) {
                        *r = op.apply(l, *r);
                    }
                    self.stack.truncate(len - n);
                }
            }
        }
        let mut total = 0.0;
        for (v, t) in self.stack.iter().zip(&self.targets) {
            let err = v - t;
            total += err * err;
            if total >= FITNESS_CAP {
                return FITNESS_CAP;
            }
        }
        total
    }
}

/// Ramped half-and-half: depths cycle over `2..=max_depth_initial`, with
/// alternating GROW and FULL trees at each depth.
pub fn init_population<R: Rng + ?Sized>(
    config: &EvolutionConfig,
    cases: &[FitnessCase],
    rng: &mut R,
) -> Result<Vec<Individual>> {
    config.validate()?;
    check_cases(cases, Some(config.terminals.arity()))?;
    let mut columns = CaseColumns::new(cases);
    let low = 2.min(config.max_depth_initial);
    let span = config.max_depth_initial - low + 1;
    (0..config.population_size)
        .map(|i| {
            let depth = low + (i / 2) % span;
            let method = if i % 2 == 0 {
                InitMethod::Grow
            } else {
                InitMethod::Full
            };
            let tree = ProgramTree::random(depth, method, &config.terminals, rng)?;
            let fitness = columns.sse(&tree);
            Ok(Individual { tree, fitness })
        })
        .collect()
}

/// Subtree mutation; `None` when the child would exceed the depth cap.
fn try_mutate<R: Rng + ?Sized>(
    parent: &ProgramTree,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Option<ProgramTree> {
    let at = parent.select_random_node(rng);
    let graft = ProgramTree::random(
        config.mutation_subtree_depth,
        InitMethod::Grow,
        &config.terminals,
        rng,
    )
    .expect("validated depth");
    let child = parent.replace_subtree(at, &graft);
    (child.depth() <= config.max_depth_overall).then_some(child)
}

/// Replaces a randomly chosen subtree of `parent` with a fresh GROW tree.
/// Returns the parent unchanged if the child would be too deep.
pub fn mutate<R: Rng + ?Sized>(
    parent: &ProgramTree,
    config: &EvolutionConfig,
    rng: &mut R,
) -> ProgramTree {
    try_mutate(parent, config, rng).unwrap_or_else(|| parent.clone())
}

fn try_crossover<R: Rng + ?Sized>(
    first: &ProgramTree,
    second: &ProgramTree,
    max_depth: usize,
    rng: &mut R,
) -> (Option<ProgramTree>, Option<ProgramTree>) {
    let a = first.select_random_node(rng);
    let b = second.select_random_node(rng);
    let child1 = first.replace_subtree(a, &second.subtree(b));
    let child2 = second.replace_subtree(b, &first.subtree(a));
    (
        (child1.depth() <= max_depth).then_some(child1),
        (child2.depth() <= max_depth).then_some(child2),
    )
}

/// Subtree crossover producing both children. A child deeper than
/// `max_depth` is replaced by the parent it was derived from.
pub fn crossover<R: Rng + ?Sized>(
    first: &ProgramTree,
    second: &ProgramTree,
    max_depth: usize,
    rng: &mut R,
) -> (ProgramTree, ProgramTree) {
    let (c1, c2) = try_crossover(first, second, max_depth, rng);
    (
        c1.unwrap_or_else(|| first.clone()),
        c2.unwrap_or_else(|| second.clone()),
    )
}

/// Tournament selection with replacement. Returns the index of the winner:
/// lowest fitness, then fewest nodes, then earliest position.
pub fn tournament<R: Rng + ?Sized>(
    population: &[Individual],
    k: usize,
    rng: &mut R,
) -> Result<usize> {
    if population.is_empty() {
        return Err(Error::invalid("cannot select from an empty population"));
    }
    if k == 0 {
        return Err(Error::invalid("tournament size must be at least 1"));
    }
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..k {
        let c = rng.gen_range(0..population.len());
        match population[c].rank_cmp(&population[best]) {
            Ordering::Less => best = c,
            Ordering::Equal if c < best => best = c,
            _ => {}
        }
    }
    Ok(best)
}

pub fn select<'a, R: Rng + ?Sized>(
    population: &'a [Individual],
    k: usize,
    rng: &mut R,
) -> Result<&'a Individual> {
    tournament(population, k, rng).map(|i| &population[i])
}

fn best_index(population: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in population.iter().enumerate().skip(1) {
        if ind.rank_cmp(&population[best]) == Ordering::Less {
            best = i;
        }
    }
    best
}

fn stats(generation: usize, population: &[Individual], best_so_far: f64) -> GenerationStats {
    let best = population[best_index(population)].fitness;
    let mean = population.iter().map(|i| i.fitness).sum::<f64>() / population.len() as f64;
    GenerationStats {
        generation,
        best_fitness: best,
        mean_fitness: mean,
        best_so_far,
    }
}

/// Runs the generational loop and returns the best-so-far individual.
pub fn run(cases: &[FitnessCase], config: &EvolutionConfig) -> Result<RunResult> {
    run_with_observer(cases, config, |_, _| {})
}

/// Like [`run`], calling `observe` with every generation's population,
/// starting with the initial one.
pub fn run_with_observer<F>(
    cases: &[FitnessCase],
    config: &EvolutionConfig,
    mut observe: F,
) -> Result<RunResult>
where
    F: FnMut(usize, &[Individual]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut population = init_population(config, cases, &mut rng)?;
    let mut columns = CaseColumns::new(cases);
    observe(0, &population);

    let mut best = population[best_index(&population)].clone();
    let mut history = vec![stats(0, &population, best.fitness)];
    let n = config.population_size;
    let k = config.tournament_size;
    let clone_cut = config.p_clone;
    let crossover_cut = config.p_clone + config.p_crossover;

    let mut generation = 0;
    while generation < config.max_generations && best.fitness > config.target_fitness {
        let mut next: Vec<Individual> = Vec::with_capacity(n);
        while next.len() < n {
            let draw: f64 = rng.gen();
            if draw < clone_cut {
                let i = tournament(&population, k, &mut rng)?;
                next.push(population[i].clone());
            } else if draw < crossover_cut {
                let i = tournament(&population, k, &mut rng)?;
                let j = tournament(&population, k, &mut rng)?;
                let (c1, c2) = try_crossover(
                    &population[i].tree,
                    &population[j].tree,
                    config.max_depth_overall,
                    &mut rng,
                );
                next.push(offspring(c1, &population[i], &mut columns));
                if next.len() < n {
                    next.push(offspring(c2, &population[j], &mut columns));
                }
            } else {
                let i = tournament(&population, k, &mut rng)?;
                let child = try_mutate(&population[i].tree, config, &mut rng);
                next.push(offspring(child, &population[i], &mut columns));
            }
        }
        population = next;
        generation += 1;
        observe(generation, &population);

        let gen_best = &population[best_index(&population)];
        if gen_best.rank_cmp(&best) == Ordering::Less {
            best = gen_best.clone();
        }
        history.push(stats(generation, &population, best.fitness));
    }

    Ok(RunResult {
        best,
        generations_run: generation,
        history,
    })
}

/// A depth-capped child falls back to its parent, whose fitness is known.
fn offspring(child: Option<ProgramTree>, parent: &Individual, columns: &mut CaseColumns) -> Individual {
    match child {
        Some(tree) => {
            let fitness = columns.sse(&tree);
            Individual { tree, fitness }
        }
        None => parent.clone(),
    }
}
