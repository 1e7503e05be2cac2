//! Per-generation GA checkpoints.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cislunar_core::catalog::OrbitalSlot;
use cislunar_core::optimizer::{GaRun, GaSnapshot, Genome};
use cislunar_core::seeding::hash_str;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRef {
    pub slot: usize,
    pub orbit_id: String,
    pub phase_index: usize,
}

pub fn slot_refs(g: &Genome, slots: &[OrbitalSlot]) -> Vec<SlotRef> {
    g.slots()
        .iter()
        .map(|&i| SlotRef { slot: i, orbit_id: slots[i].orbit_id.clone(), phase_index: slots[i].phase_index })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: usize,
    pub best_fitness_km: f64,
    pub best: Vec<SlotRef>,
    /// Hash of the population genomes and fitness bits.
    pub population_digest: String,
    /// ChaCha seed hash, stream and word position.
    pub rng_state: String,
    /// Hash of the inputs the run was started with.
    pub inputs_fingerprint: String,
    pub snapshot: GaSnapshot,
}

fn population_digest(s: &GaSnapshot) -> String {
    let text: String = s.population.iter().map(|(g, f)| format!("{:?}:{:016x};", g.slots(), f.to_bits())).collect();
    format!("{:016x}", hash_str(&text))
}

impl Checkpoint {
    pub fn new(run: &GaRun, slots: &[OrbitalSlot], fingerprint: &str) -> Self {
        let snapshot = run.snapshot();
        let (best, f) = run.best();
        let seed_hash = hash_str(&snapshot.rng_seed.iter().map(|b| format!("{b:02x}")).collect::<String>());
        Self {
            generation: snapshot.generation,
            best_fitness_km: f,
            best: slot_refs(best, slots),
            population_digest: population_digest(&snapshot),
            rng_state: format!(
                "{seed_hash:016x}/{}/{:x}{:016x}",
                snapshot.rng_stream, snapshot.rng_word_pos[0], snapshot.rng_word_pos[1]
            ),
            inputs_fingerprint: fingerprint.to_string(),
            snapshot,
        }
    }

    pub fn path_for(dir: &Path, generation: usize) -> PathBuf {
        dir.join(format!("gen_{generation:04}.json"))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = Self::path_for(dir, self.generation);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read checkpoint {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError::new(format!("{}: invalid checkpoint: {e}", path.display())).into())
    }

    /// Restores the run, refusing checkpoints taken with different inputs.
    pub fn resume(self, fingerprint: &str) -> Result<GaRun> {
        if self.inputs_fingerprint != fingerprint {
            bail!(ConfigError::new("checkpoint was written for different inputs (config, slots or targets changed)"));
        }
        if population_digest(&self.snapshot) != self.population_digest {
            bail!(ConfigError::new("checkpoint population digest does not match its contents"));
        }
        Ok(GaRun::restore(self.snapshot)?)
    }
}
