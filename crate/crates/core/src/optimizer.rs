//! Subset-encoded genetic algorithm for choosing `N` of `|J|` observer
//! slots, with a fitness cache, resumable snapshots and an exhaustive oracle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A sorted set of `N` distinct slot indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Genome(Vec<usize>);

impl Genome {
    /// Canonicalizes `indices`; fails on duplicates or out-of-range entries.
    pub fn new(mut indices: Vec<usize>, n_slots: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("genome has duplicate slots"));
        }
        if indices.last().is_some_and(|&i| i >= n_slots) {
            return Err(Error::invalid("genome slot index out of range"));
        }
        Ok(Self(indices))
    }

    pub fn slots(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.0.binary_search(&slot).is_ok()
    }
}

/// Evaluates a batch of genomes; implementations may run them in parallel but
/// must return values in input order.
pub trait BatchFitness {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64>;
}

/// Adapts a per-genome closure to [`BatchFitness`], evaluating serially.
pub struct SerialFitness<F>(pub F);

impl<F: Fn(&Genome) -> f64> BatchFitness for SerialFitness<F> {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64> {
        genomes.iter().map(&self.0).collect()
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Deduplicates, drops out-of-range indices, then trims or pads to `n` with
/// uniformly random choices.
pub fn repair<R: Rng + ?Sized>(candidate: &[usize], n: usize, n_slots: usize, rng: &mut R) -> Result<Genome> {
    if n > n_slots {
        return Err(Error::Infeasible { slots: n_slots, observers: n });
    }
    let set: BTreeSet<usize> = candidate.iter().copied().filter(|&i| i < n_slots).collect();
    let mut v: Vec<usize> = set.into_iter().collect();
    while v.len() > n {
        let i = rng.random_range(0..v.len());
        v.remove(i);
    }
    if v.len() < n {
        let mut unused: Vec<usize> = (0..n_slots).filter(|i| v.binary_search(i).is_err()).collect();
        while v.len() < n {
            let i = rng.random_range(0..unused.len());
            v.push(unused.swap_remove(i));
        }
    }
    Genome::new(v, n_slots)
}

/// Uniform mix of two parents: shared slots are kept, the symmetric
/// difference is sampled by coin flips, then the size is fixed from the
/// symmetric difference.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    let n = a.len();
    let mut child: Vec<usize> = a.0.iter().copied().filter(|&s| b.contains(s)).collect();
    let mut diff: Vec<usize> =
        a.0.iter().filter(|&&s| !b.contains(s)).chain(b.0.iter().filter(|&&s| !a.contains(s))).copied().collect();
    diff.sort_unstable();
    let (mut picked, mut rest): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    for s in diff {
        if rng.random_bool(0.5) {
            picked.push(s);
        } else {
            rest.push(s);
        }
    }
    while child.len() + picked.len() > n {
        let i = rng.random_range(0..picked.len());
        picked.swap_remove(i);
    }
    while child.len() + picked.len() < n {
        let i = rng.random_range(0..rest.len());
        picked.push(rest.swap_remove(i));
    }
    child.extend(picked);
    child.sort_unstable();
    Genome(child)
}

/// Replaces one slot with a uniformly random unused slot.
pub fn mutate<R: Rng + ?Sized>(g: &Genome, n_slots: usize, rng: &mut R) -> Genome {
    if g.len() >= n_slots || g.is_empty() {
        return g.clone();
    }
    let mut v = g.0.clone();
    let out = rng.random_range(0..v.len());
    let unused: Vec<usize> = (0..n_slots).filter(|&i| !g.contains(i)).collect();
    v[out] = unused[rng.random_range(0..unused.len())];
    v.sort_unstable();
    Genome(v)
}

/// Stochastic uniform sampling: `count` equally spaced pointers with one
/// random offset over the cumulative expectations.
pub fn stochastic_uniform<R: Rng + ?Sized>(expectation: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = expectation.iter().sum();
    if count == 0 || total <= 0.0 {
        return Vec::new();
    }
    let step = total / count as f64;
    let mut pointer = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(count);
    let mut cum = 0.0;
    let mut i = 0;
    for _ in 0..count {
        while i + 1 < expectation.len() && cum + expectation[i] <= pointer {
            cum += expectation[i];
            i += 1;
        }
        out.push(i);
        pointer += step;
    }
    out
}

/// Memoized fitness keyed by canonical genome.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitnessCache {
    enabled: bool,
    table: BTreeMap<Genome, f64>,
    pub hits: u64,
    pub misses: u64,
}

impl FitnessCache {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, ..Default::default() }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn peek(&self, g: &Genome) -> Option<f64> {
        self.table.get(g).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Genome, &f64)> {
        self.table.iter()
    }

    /// Fitness for every genome, evaluating only unseen (or, when disabled,
    /// all) genomes in one batch.
    pub fn evaluate<F: BatchFitness + ?Sized>(&mut self, genomes: &[Genome], fitness: &F) -> Vec<f64> {
        if !self.enabled {
            self.misses += genomes.len() as u64;
            return fitness.evaluate(genomes);
        }
        let mut pending: Vec<Genome> = Vec::new();
        let mut queued = BTreeSet::new();
        for g in genomes {
            if self.table.contains_key(g) || !queued.insert(g.clone()) {
                self.hits += 1;
            } else {
                pending.push(g.clone());
            }
        }
        self.misses += pending.len() as u64;
        let values = fitness.evaluate(&pending);
        for (g, v) in pending.into_iter().zip(values) {
            self.table.insert(g, v);
        }
        genomes.iter().map(|g| self.table[g]).collect()
    }

    pub(crate) fn insert(&mut self, g: Genome, v: f64) {
        if self.enabled {
            self.table.insert(g, v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaConfig {
    pub population: usize,
    pub crossover_fraction: f64,
    /// Defaults to `100 * |J|` when unset.
    pub max_generations: Option<usize>,
    pub stall_generations: usize,
    /// Minimum best-fitness improvement that resets the stall counter.
    pub stall_tolerance: f64,
    /// Defaults to `ceil(0.05 * population)` when unset.
    pub elite_count: Option<usize>,
    /// Extra mutations tried to turn an already evaluated child into a new one.
    pub duplicate_retries: usize,
    pub use_cache: bool,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            crossover_fraction: 0.8,
            max_generations: None,
            stall_generations: 50,
            stall_tolerance: 1e-6,
            elite_count: None,
            duplicate_retries: 8,
            use_cache: true,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invalid("population must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::invalid("crossover fraction must lie in [0, 1]"));
        }
        if self.elite_count.is_some_and(|e| e >= self.population) {
            return Err(Error::invalid("elite count must be below the population"));
        }
        Ok(())
    }

    pub fn elites(&self) -> usize {
        self.elite_count.unwrap_or_else(|| (self.population as f64 * 0.05).ceil() as usize)
    }

    pub fn generation_limit(&self, n_slots: usize) -> usize {
        self.max_generations.unwrap_or(100 * n_slots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    MaxGenerations,
    Stall,
    /// Every feasible genome has been evaluated.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Genome,
    pub best_fitness: f64,
    /// Best fitness after each generation, starting with the initial population.
    pub history: Vec<f64>,
    pub generations: usize,
    pub evaluations: u64,
    pub cache_hits: u64,
    pub stop: StopReason,
}

/// Complete optimizer state between generations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaSnapshot {
    pub config: GaConfig,
    pub n_slots: usize,
    pub n_observers: usize,
    pub generation: usize,
    pub population: Vec<(Genome, f64)>,
    pub best: (Genome, f64),
    pub history: Vec<f64>,
    pub stall: usize,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    /// Word position split into high and low 64-bit halves.
    pub rng_word_pos: [u64; 2],
    pub cache: Vec<(Genome, f64)>,
    pub cache_enabled: bool,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub stop: Option<StopReason>,
}

/// A generation-stepped GA run.
#[derive(Debug, Clone)]
pub struct GaRun {
    cfg: GaConfig,
    n_slots: usize,
    n: usize,
    rng: ChaCha8Rng,
    population: Vec<(Genome, f64)>,
    best: (Genome, f64),
    history: Vec<f64>,
    generation: usize,
    stall: usize,
    cache: FitnessCache,
    stop: Option<StopReason>,
}

fn fitness_order(a: &(Genome, f64), b: &(Genome, f64)) -> core::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0))
}

impl GaRun {
    /// Draws and evaluates the initial population.
    pub fn new<F: BatchFitness + ?Sized>(n_slots: usize, n: usize, cfg: GaConfig, fitness: &F) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::invalid("at least one observer is required"));
        }
        if n > n_slots {
            return Err(Error::Infeasible { slots: n_slots, observers: n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let feasible = binomial(n_slots, n);
        let mut genomes: Vec<Genome> = Vec::with_capacity(cfg.population);
        let mut seen = BTreeSet::new();
        let mut tries = 0;
        while genomes.len() < cfg.population {
            let g = repair(&[], n, n_slots, &mut rng)?;
            tries += 1;
            if seen.insert(g.clone()) || (seen.len() as u128) >= feasible || tries > 20 * cfg.population {
                genomes.push(g);
            }
        }
        let mut cache = FitnessCache::new(cfg.use_cache);
        let values = cache.evaluate(&genomes, fitness);
        let mut population: Vec<(Genome, f64)> = genomes.into_iter().zip(values).collect();
        population.sort_by(fitness_order);
        let best = population[0].clone();
        let mut run = Self {
            cfg,
            n_slots,
            n,
            rng,
            population,
            history: alloc::vec![best.1],
            best,
            generation: 0,
            stall: 0,
            cache,
            stop: None,
        };
        run.check_exhausted();
        Ok(run)
    }

    fn check_exhausted(&mut self) {
        if self.cache.enabled() && self.cache.len() as u128 >= binomial(self.n_slots, self.n) {
            self.stop = Some(StopReason::Exhausted);
        }
    }

    pub fn is_done(&self) -> bool {
        self.stop.is_some()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn best(&self) -> (&Genome, f64) {
        (&self.best.0, self.best.1)
    }

    pub fn population(&self) -> &[(Genome, f64)] {
        &self.population
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn cache(&self) -> &FitnessCache {
        &self.cache
    }

    fn known(&self, g: &Genome, next: &[Genome]) -> bool {
        self.cache.peek(g).is_some() || next.contains(g) || self.population.iter().any(|(p, _)| p == g)
    }

    fn fresh(&mut self, mut child: Genome, next: &[Genome]) -> Genome {
        for _ in 0..self.cfg.duplicate_retries {
            if !self.known(&child, next) {
                break;
            }
            child = mutate(&child, self.n_slots, &mut self.rng);
        }
        child
    }

    /// Advances one generation. Returns `true` once a stopping rule fires.
    pub fn step<F: BatchFitness + ?Sized>(&mut self, fitness: &F) -> bool {
        if self.stop.is_some() {
            return true;
        }
        let pop = self.cfg.population;
        let mut elites: Vec<(Genome, f64)> = Vec::new();
        for cand in &self.population {
            if elites.len() == self.cfg.elites() {
                break;
            }
            if !elites.iter().any(|(g, _)| g == &cand.0) {
                elites.push(cand.clone());
            }
        }
        let n_children = pop - elites.len();
        let n_cross = (self.cfg.crossover_fraction * n_children as f64).round() as usize;
        let n_mut = n_children - n_cross;
        // Linear rank expectation, best first.
        let expectation: Vec<f64> = (0..self.population.len()).map(|i| (self.population.len() - i) as f64).collect();
        let mut parents = stochastic_uniform(&expectation, 2 * n_cross + n_mut, &mut self.rng);
        parents.shuffle(&mut self.rng);
        let mut children: Vec<Genome> = Vec::with_capacity(n_children);
        for k in 0..n_cross {
            let a = &self.population[parents[2 * k]].0;
            let b = &self.population[parents[2 * k + 1]].0;
            let child = crossover(a, b, &mut self.rng);
            let child = self.fresh(child, &children);
            children.push(child);
        }
        for k in 0..n_mut {
            let p = self.population[parents[2 * n_cross + k]].0.clone();
            let child = mutate(&p, self.n_slots, &mut self.rng);
            let child = self.fresh(child, &children);
            children.push(child);
        }
        let values = self.cache.evaluate(&children, fitness);
        let mut next = elites;
        next.extend(children.into_iter().zip(values));
        next.sort_by(fitness_order);
        self.population = next;
        self.generation += 1;
        let gen_best = self.population[0].clone();
        if self.best.1 - gen_best.1 > self.cfg.stall_tolerance {
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        if fitness_order(&gen_best, &self.best).is_lt() {
            self.best = gen_best;
        }
        self.history.push(self.best.1);
        self.check_exhausted();
        if self.stop.is_none() {
            if self.stall >= self.cfg.stall_generations {
                self.stop = Some(StopReason::Stall);
            } else if self.generation >= self.cfg.generation_limit(self.n_slots) {
                self.stop = Some(StopReason::MaxGenerations);
            }
        }
        self.stop.is_some()
    }

    pub fn outcome(&self) -> GaOutcome {
        GaOutcome {
            best: self.best.0.clone(),
            best_fitness: self.best.1,
            history: self.history.clone(),
            generations: self.generation,
            evaluations: self.cache.misses,
            cache_hits: self.cache.hits,
            stop: self.stop.unwrap_or(StopReason::MaxGenerations),
        }
    }

    pub fn snapshot(&self) -> GaSnapshot {
        let pos = self.rng.get_word_pos();
        GaSnapshot {
            config: self.cfg.clone(),
            n_slots: self.n_slots,
            n_observers: self.n,
            generation: self.generation,
            population: self.population.clone(),
            best: self.best.clone(),
            history: self.history.clone(),
            stall: self.stall,
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: [(pos >> 64) as u64, pos as u64],
            cache: self.cache.entries().map(|(g, v)| (g.clone(), *v)).collect(),
            cache_enabled: self.cache.enabled(),
            cache_hits: self.cache.hits,
            cache_misses: self.cache.misses,
            stop: self.stop,
        }
    }

    pub fn restore(s: GaSnapshot) -> Result<Self> {
        s.config.validate()?;
        if s.population.is_empty() {
            return Err(Error::invalid("snapshot population is empty"));
        }
        for (g, _) in s.population.iter().chain(core::iter::once(&s.best)) {
            if g.len() != s.n_observers || g.0.last().is_some_and(|&i| i >= s.n_slots) {
                return Err(Error::invalid("snapshot genome does not fit the slot set"));
            }
        }
        let mut rng = ChaCha8Rng::from_seed(s.rng_seed);
        rng.set_stream(s.rng_stream);
        rng.set_word_pos((u128::from(s.rng_word_pos[0]) << 64) | u128::from(s.rng_word_pos[1]));
        let mut cache = FitnessCache::new(s.cache_enabled);
        for (g, v) in s.cache {
            cache.insert(g, v);
        }
        cache.hits = s.cache_hits;
        cache.misses = s.cache_misses;
        Ok(Self {
            cfg: s.config,
            n_slots: s.n_slots,
            n: s.n_observers,
            rng,
            population: s.population,
            best: s.best,
            history: s.history,
            generation: s.generation,
            stall: s.stall,
            cache,
            stop: s.stop,
        })
    }

    /// Runs generations until a stopping rule fires.
    pub fn run_to_end<F: BatchFitness + ?Sized>(&mut self, fitness: &F) -> GaOutcome {
        while !self.step(fitness) {}
        self.outcome()
    }
}

/// Runs the GA from scratch to completion.
pub fn optimize<F: BatchFitness + ?Sized>(n_slots: usize, n: usize, cfg: &GaConfig, fitness: &F) -> Result<GaOutcome> {
    Ok(GaRun::new(n_slots, n, cfg.clone(), fitness)?.run_to_end(fitness))
}

/// Default cap on exhaustive enumeration.
pub const EXHAUSTIVE_CAP: u128 = 100_000;

/// Advances `v` to the next `k`-combination of `0..n` in lexicographic order.
pub fn next_combination(v: &mut [usize], n: usize) -> bool {
    let k = v.len();
    for i in (0..k).rev() {
        if v[i] < n - k + i {
            v[i] += 1;
            for j in i + 1..k {
                v[j] = v[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub struct ExhaustiveResult {
    pub best: Genome,
    pub best_fitness: f64,
    /// Every subset in lexicographic order with its fitness.
    pub table: Vec<(Genome, f64)>,
}

/// Evaluates every `n`-subset; ties resolve to the lexicographically first.
pub fn exhaustive_search<F: BatchFitness + ?Sized>(
    n_slots: usize,
    n: usize,
    fitness: &F,
    cap: u128,
) -> Result<ExhaustiveResult> {
    if n == 0 || n > n_slots {
        return Err(Error::Infeasible { slots: n_slots, observers: n });
    }
    let count = binomial(n_slots, n);
    if count > cap {
        return Err(Error::ExhaustiveCapExceeded { count, cap });
    }
    let mut genomes = Vec::with_capacity(count as usize);
    let mut v: Vec<usize> = (0..n).collect();
    loop {
        genomes.push(Genome(v.clone()));
        if !next_combination(&mut v, n_slots) {
            break;
        }
    }
    let values = fitness.evaluate(&genomes);
    let table: Vec<(Genome, f64)> = genomes.into_iter().zip(values).collect();
    let (best, best_fitness) = table
        .iter()
        .fold(None::<&(Genome, f64)>, |acc, e| match acc {
            Some(a) if a.1 <= e.1 => Some(a),
            _ => Some(e),
        })
        .map(|(g, f)| (g.clone(), *f))
        .ok_or(Error::invalid("empty enumeration"))?;
    Ok(ExhaustiveResult { best, best_fitness, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::Cell;

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(8, 2), 28);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(4000, 4), 4000 * 3999 * 3998 * 3997 / 24);
    }

    #[test]
    fn repair_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = repair(&[1, 2, 3, 4, 5], 4, 10, &mut rng).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.slots().iter().all(|s| (1..=5).contains(s)));
        let g = repair(&[2, 2, 7], 4, 10, &mut rng).unwrap();
        assert!(g.contains(2) && g.contains(7) && g.len() == 4);
        let g = repair(&[8, 1, 3], 3, 10, &mut rng).unwrap();
        assert_eq!(g.slots(), [1, 3, 8]);
        assert!(repair(&[], 5, 4, &mut rng).is_err());
    }

    #[test]
    fn operators_keep_cardinality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = repair(&[], 4, 9, &mut rng).unwrap();
            let b = repair(&[], 4, 9, &mut rng).unwrap();
            let c = crossover(&a, &b, &mut rng);
            assert_eq!(c.len(), 4);
            for s in c.slots() {
                assert!(a.contains(*s) || b.contains(*s));
            }
            let m = mutate(&a, 9, &mut rng);
            assert_eq!(m.len(), 4);
            assert_eq!(m.slots().iter().filter(|s| !a.contains(**s)).count(), 1);
        }
    }

    #[test]
    fn cache_counts() {
        let calls = Cell::new(0);
        let f = SerialFitness(|g: &Genome| {
            calls.set(calls.get() + 1);
            g.slots().iter().sum::<usize>() as f64
        });
        let mut cache = FitnessCache::new(true);
        let g = Genome::new(alloc::vec![3, 1], 5).unwrap();
        let h = Genome::new(alloc::vec![1, 3], 5).unwrap();
        cache.evaluate(core::slice::from_ref(&g), &f);
        cache.evaluate(&[h], &f);
        assert_eq!((calls.get(), cache.hits, cache.misses), (1, 1, 1));
        let mut off = FitnessCache::new(false);
        off.evaluate(&[g.clone(), g], &f);
        assert_eq!(calls.get(), 3);
    }

    #[test]
    fn single_feasible_genome() {
        let calls = Cell::new(0);
        let f = SerialFitness(|_: &Genome| {
            calls.set(calls.get() + 1);
            1.0
        });
        let out = optimize(3, 3, &GaConfig::default(), &f).unwrap();
        assert_eq!(out.best.slots(), [0, 1, 2]);
        assert_eq!(calls.get(), 1);
        assert_eq!(out.stop, StopReason::Exhausted);
    }

    #[test]
    fn exhaustive_counts() {
        let f = SerialFitness(|g: &Genome| g.slots().iter().map(|&s| (s as f64 - 2.5).abs()).sum());
        let r = exhaustive_search(6, 2, &f, EXHAUSTIVE_CAP).unwrap();
        assert_eq!(r.table.len(), 15);
        assert_eq!(r.best.slots(), [2, 3]);
        assert!(matches!(exhaustive_search(40, 5, &f, 1000), Err(Error::ExhaustiveCapExceeded { .. })));
    }

    #[test]
    fn stochastic_uniform_respects_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let picks = stochastic_uniform(&[3.0, 1.0, 0.0, 4.0], 8, &mut rng);
        let count = |i| picks.iter().filter(|&&p| p == i).count();
        assert_eq!((count(0), count(1), count(2), count(3)), (3, 1, 0, 4));
    }
}
