use cislunar_core::optimizer::{
    binomial, crossover, exhaustive_search, mutate, optimize, repair, GaConfig, GaRun, Genome, SerialFitness,
    StopReason, EXHAUSTIVE_CAP,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weights(n_slots: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_slots).map(|_| rng.random_range(0.0..10.0)).collect()
}

/// Separable cost plus a pairwise interaction so the optimum is not just the
/// `n` smallest weights.
fn synthetic(w: &[f64]) -> impl Fn(&Genome) -> f64 + '_ {
    move |g: &Genome| {
        let s = g.slots();
        let base: f64 = s.iter().map(|&i| w[i]).sum();
        let spread = s.windows(2).map(|p| (p[1] - p[0]) as f64).sum::<f64>();
        base - 0.3 * spread
    }
}

#[test]
fn ga_matches_exhaustive_on_small_problems() {
    for (n_slots, n, seed) in [(12, 2, 1), (10, 3, 2), (9, 4, 3), (20, 1, 4), (8, 5, 5)] {
        assert!(binomial(n_slots, n) <= 200);
        let w = weights(n_slots, seed);
        let f = SerialFitness(synthetic(&w));
        let truth = exhaustive_search(n_slots, n, &f, EXHAUSTIVE_CAP).unwrap();
        let cfg = GaConfig { seed, ..Default::default() };
        let out = optimize(n_slots, n, &cfg, &f).unwrap();
        assert_eq!(out.best_fitness, truth.best_fitness, "C({n_slots}, {n})");
        assert_eq!(out.best, truth.best);
        assert!(out.history.windows(2).all(|h| h[1] <= h[0]));
    }
}

#[test]
fn exhaustive_table_is_complete_and_lexicographic() {
    let w = weights(7, 9);
    let r = exhaustive_search(7, 3, &SerialFitness(synthetic(&w)), 1000).unwrap();
    assert_eq!(r.table.len() as u128, binomial(7, 3));
    assert!(r.table.windows(2).all(|p| p[0].0 < p[1].0));
    let min = r.table.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_fitness, min);
    assert!(exhaustive_search(30, 15, &SerialFitness(synthetic(&weights(30, 1))), EXHAUSTIVE_CAP).is_err());
}

#[test]
fn snapshot_resume_reproduces_the_uninterrupted_run() {
    let w = weights(40, 11);
    let f = SerialFitness(synthetic(&w));
    let cfg = GaConfig { seed: 77, population: 20, max_generations: Some(30), ..Default::default() };
    let straight = optimize(40, 4, &cfg, &f).unwrap();
    let mut run = GaRun::new(40, 4, cfg.clone(), &f).unwrap();
    for _ in 0..7 {
        run.step(&f);
    }
    let mut resumed = GaRun::restore(run.snapshot()).unwrap();
    let out = resumed.run_to_end(&f);
    assert_eq!(out, straight);
    assert_eq!(out.stop, StopReason::MaxGenerations);
    assert_eq!(out.generations, 30);
}

#[test]
fn same_seed_same_outcome() {
    let w = weights(30, 12);
    let f = SerialFitness(synthetic(&w));
    let cfg = GaConfig { seed: 5, population: 16, max_generations: Some(20), ..Default::default() };
    let a = optimize(30, 3, &cfg, &f).unwrap();
    let b = optimize(30, 3, &cfg, &f).unwrap();
    assert_eq!(a, b);
    // Without the cache, duplicates go unrecognized; the run stays reproducible.
    let nc = GaConfig { use_cache: false, ..cfg };
    let uncached = optimize(30, 3, &nc, &f).unwrap();
    assert_eq!(uncached, optimize(30, 3, &nc, &f).unwrap());
    assert_eq!(uncached.cache_hits, 0);
}

#[test]
fn tiny_search_space_exhausts() {
    let w = weights(6, 3);
    let f = SerialFitness(synthetic(&w));
    let out = optimize(6, 2, &GaConfig::default(), &f).unwrap();
    assert_eq!(out.stop, StopReason::Exhausted);
    assert_eq!(out.best, exhaustive_search(6, 2, &f, 100).unwrap().best);
    assert!(out.evaluations <= binomial(6, 2) as u64);
}

proptest! {
    #[test]
    fn operators_preserve_cardinality(n_slots in 2usize..60, n_frac in 0.0..1.0_f64, seed: u64) {
        let n = 1 + ((n_slots - 1) as f64 * n_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = repair(&[], n, n_slots, &mut rng).unwrap();
        let b = repair(&(0..n_slots).rev().collect::<Vec<_>>(), n, n_slots, &mut rng).unwrap();
        for g in [&a, &b, &crossover(&a, &b, &mut rng), &mutate(&a, n_slots, &mut rng)] {
            prop_assert_eq!(g.len(), n);
            prop_assert!(g.slots().windows(2).all(|p| p[0] < p[1]));
            prop_assert!(g.slots().iter().all(|&i| i < n_slots));
        }
        let child = crossover(&a, &b, &mut rng);
        // Genes shared by both parents are always inherited.
        for &i in a.slots() {
            if b.contains(i) {
                prop_assert!(child.contains(i));
            }
        }
    }

    #[test]
    fn genome_rejects_out_of_range(n_slots in 1usize..20, extra in 0usize..5) {
        prop_assert!(Genome::new(vec![n_slots + extra], n_slots).is_err());
        prop_assert!(Genome::new(vec![0, 0], n_slots.max(2)).is_err());
    }
}
