//! Parallel evaluation on top of the core harness.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use cislunar_core::catalog::{
    filter_catalog, generate_slots, FilterCriteria, OrbitFamily, OrbitRecord, OrbitalSlot, Target, TargetSet,
    TargetSetKind,
};
use cislunar_core::ekf::TrackSetup;
use cislunar_core::harness::{build_report, evaluate_target, linear_edges, mean_loss, TrackResult, ValidationReport};
use cislunar_core::optimizer::{BatchFitness, Genome};
use cislunar_core::seeding::{derive_seed, hash_str, rng_from};
use cislunar_core::{Propagator, StateVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::ConfigError;
use crate::io::{read_catalog_rows, CatalogRow};

/// Fixed inputs of an objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub setup: &'a TrackSetup,
    pub targets: &'a [Target],
    pub seed: u64,
    pub penalty: f64,
}

impl Evaluator<'_> {
    /// Per-target results in target order, series dropped.
    pub fn results(&self, observers: &[StateVector]) -> Vec<TrackResult> {
        self.targets.par_iter().map(|t| evaluate_target(self.setup, observers, t, self.seed).without_series()).collect()
    }

    /// Mean position RMSE with failures at the penalty.
    pub fn objective(&self, observers: &[StateVector]) -> Result<f64> {
        Ok(mean_loss(&self.results(observers), self.penalty)?)
    }
}

/// GA fitness: a genome picks slots, whose epoch states are the observers.
pub struct SlotFitness<'a> {
    pub eval: Evaluator<'a>,
    pub slots: &'a [OrbitalSlot],
}

impl SlotFitness<'_> {
    pub fn observers(&self, g: &Genome) -> Vec<StateVector> {
        g.slots().iter().map(|&i| self.slots[i].epoch_state).collect()
    }
}

impl BatchFitness for SlotFitness<'_> {
    fn evaluate(&self, genomes: &[Genome]) -> Vec<f64> {
        genomes.par_iter().map(|g| self.eval.objective(&self.observers(g)).unwrap_or(f64::INFINITY)).collect()
    }
}

/// Histogram edges from zero to the largest finite value.
pub fn data_edges(values: impl Iterator<Item = f64>, bins: usize) -> Vec<f64> {
    let hi = values.filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
    linear_edges(0.0, if hi > 0.0 { hi } else { 1.0 }, bins.max(1))
}

/// Aggregates results with data-driven histogram edges.
pub fn report(results: Vec<TrackResult>, dro_split: Option<f64>, bins: usize) -> Result<ValidationReport> {
    let ok = || results.iter().filter(|r| !r.failed());
    let pos = data_edges(ok().map(|r| r.rmse_pos_km), bins);
    let vel = data_edges(ok().map(|r| r.rmse_vel_kms), bins);
    Ok(build_report(results, dro_split, &pos, &vel)?)
}

/// Constellation rows, optionally restricted to one `stp` group.
pub fn load_constellation(path: &Path, group: Option<&str>) -> Result<Vec<CatalogRow>> {
    let rows = read_catalog_rows(path)?;
    let rows: Vec<CatalogRow> = match group {
        None => rows,
        Some(g) => rows.into_iter().filter(|r| r.tag("stp").is_some_and(|s| s.eq_ignore_ascii_case(g))).collect(),
    };
    if rows.is_empty() {
        bail!(ConfigError::new(format!(
            "{}: no constellation rows{}",
            path.display(),
            group.map(|g| format!(" for group '{g}'")).unwrap_or_default()
        )));
    }
    Ok(rows)
}

/// Candidate slots from a catalog: periodic records passing the filter.
pub fn slots_from_catalog(
    records: &[OrbitRecord],
    criteria: &FilterCriteria,
    slots_per_orbit: usize,
    prop: &Propagator,
) -> Result<Vec<OrbitalSlot>> {
    let periodic: Vec<OrbitRecord> = filter_catalog(records, criteria)
        .into_iter()
        .filter(|r| !r.family.is_transfer() && r.period.is_some())
        .collect();
    let per: Vec<Vec<OrbitalSlot>> = periodic
        .par_iter()
        .map(|r| generate_slots(std::slice::from_ref(r), slots_per_orbit, prop))
        .collect::<std::result::Result<_, _>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Per-family target allocation proportional to catalog counts, with a
/// floor of `min_per_family`, rounded by largest remainder to `total`.
/// Transfers are never repeated, so their share is capped at their count.
pub fn stratified_allocation(
    counts: &BTreeMap<OrbitFamily, usize>,
    total: usize,
    min_per_family: usize,
) -> BTreeMap<OrbitFamily, usize> {
    let cap = |f: &OrbitFamily, n: usize| if f.is_transfer() { n.min(counts[f]) } else { n };
    let mut alloc: BTreeMap<OrbitFamily, usize> =
        counts.iter().filter(|(_, &c)| c > 0).map(|(f, _)| (*f, cap(f, min_per_family))).collect();
    let floor: usize = alloc.values().sum();
    if floor >= total {
        return alloc;
    }
    let remaining = total - floor;
    let weight: usize = alloc.keys().map(|f| counts[f]).sum();
    let mut rema: Vec<(OrbitFamily, f64)> = Vec::new();
    let mut given = 0;
    for (f, n) in alloc.iter_mut() {
        let exact = remaining as f64 * counts[f] as f64 / weight as f64;
        let add = cap(f, *n + exact.floor() as usize) - *n;
        *n += add;
        given += add;
        rema.push((*f, exact - exact.floor()));
    }
    rema.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut i = 0;
    let mut stuck = 0;
    while given < remaining && stuck < rema.len() {
        let f = rema[i % rema.len()].0;
        let n = alloc.get_mut(&f).expect("allocated family");
        if cap(&f, *n + 1) > *n {
            *n += 1;
            given += 1;
            stuck = 0;
        } else {
            stuck += 1;
        }
        i += 1;
    }
    alloc
}

/// Per-family record counts.
pub fn family_counts(records: &[OrbitRecord]) -> BTreeMap<OrbitFamily, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.family).or_default() += 1;
    }
    counts
}

/// A stratified validation subsample. Families are weighted by `strata`
/// (default: the composition of `records` itself). Periodic families cycle
/// through a seeded shuffle of their members, each draw getting its own
/// random phase and the id `<orbit id>#<k>`.
pub fn stratified_targets(
    records: &[OrbitRecord],
    strata: Option<&BTreeMap<OrbitFamily, usize>>,
    total: usize,
    seed: u64,
    prop: &Propagator,
) -> Result<Vec<Target>> {
    let mut by_family: BTreeMap<OrbitFamily, Vec<&OrbitRecord>> = BTreeMap::new();
    for r in records {
        by_family.entry(r.family).or_default().push(r);
    }
    let own = family_counts(records);
    let weights = strata.unwrap_or(&own);
    let mut counts = BTreeMap::new();
    for (f, members) in &by_family {
        let w = weights.get(f).copied().unwrap_or(0);
        // Transfers are never repeated, so their weight doubles as a cap.
        counts.insert(*f, if f.is_transfer() { w.min(members.len()) } else { w });
    }
    let alloc = stratified_allocation(&counts, total, 2);
    let mut picked = Vec::new();
    for (family, n) in alloc {
        let mut members = by_family[&family].clone();
        members.shuffle(&mut rng_from(derive_seed(seed, &[hash_str(family.label())])));
        for k in 0..n {
            let src = members[k % members.len()];
            let mut r = src.clone();
            if !family.is_transfer() {
                r.id = format!("{}#{}", src.id, k / members.len());
            }
            picked.push(r);
        }
    }
    if picked.is_empty() {
        bail!(ConfigError::new("stratified subsample is empty: no family has weight"));
    }
    Ok(TargetSet::sample(TargetSetKind::Validation, &picked, seed, prop)?.members)
}
