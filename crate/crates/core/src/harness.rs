//! Loss metrics, the mean-loss objective, per-family statistics, histograms
//! and covariance envelopes for constellation evaluation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;

use crate::catalog::{OrbitFamily, Target, DRO_SPLIT_PERIOD};
use crate::constants::CanonicalConstants;
use crate::ekf::{run_track, TrackRecord, TrackSetup};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, hash_str, stream};
use crate::state::StateVector;

/// Objective contribution of a failed track, km.
pub const DEFAULT_FAILURE_PENALTY_KM: f64 = 1e4;

/// RMS over epochs of `(|est_pos| - |truth_pos|)`, in km.
pub fn rmse_position(track: &TrackRecord, c: &CanonicalConstants) -> Result<f64> {
    if track.epochs.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let sum: f64 = track
        .epochs
        .iter()
        .map(|e| {
            let d = e.estimate.position().norm() - e.truth.position().norm();
            d * d
        })
        .sum();
    Ok((sum / track.epochs.len() as f64).sqrt() * c.du_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Position,
    Velocity,
}

/// RMS of the error-vector norm: km for position, km/s for velocity.
pub fn rmse_vector(track: &TrackRecord, component: Component, c: &CanonicalConstants) -> Result<f64> {
    if track.epochs.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let sum: f64 = track
        .epochs
        .iter()
        .map(|e| {
            let d = e.estimate.0 - e.truth.0;
            match component {
                Component::Position => d.fixed_rows::<3>(0).norm_squared(),
                Component::Velocity => d.fixed_rows::<3>(3).norm_squared(),
            }
        })
        .sum();
    let rms = (sum / track.epochs.len() as f64).sqrt();
    Ok(match component {
        Component::Position => rms * c.du_km,
        Component::Velocity => c.du_per_tu_to_km_per_s(rms),
    })
}

/// Fraction of epochs with at least one visible tasked observer.
pub fn visibility_fraction(track: &TrackRecord) -> f64 {
    if track.epochs.is_empty() {
        return 0.0;
    }
    let seen = track.epochs.iter().filter(|e| e.visible_mask != 0).count();
    seen as f64 / track.epochs.len() as f64
}

/// Per-target evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub target_id: String,
    pub family: OrbitFamily,
    pub period: Option<f64>,
    pub rmse_pos_km: f64,
    pub rmse_vec_pos_km: f64,
    pub rmse_vel_kms: f64,
    pub visibility_fraction: f64,
    pub error: Option<String>,
    pub track: TrackRecord,
}

impl TrackResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Loss used by the objective: the position RMSE, or `penalty` on failure.
    pub fn loss(&self, penalty: f64) -> f64 {
        if self.failed() || !self.rmse_pos_km.is_finite() {
            penalty
        } else {
            self.rmse_pos_km
        }
    }

    /// Drops the per-epoch series, keeping the metrics.
    pub fn without_series(mut self) -> Self {
        self.track.epochs = Vec::new();
        self
    }
}

/// Stream seed for a target, keyed by its id so that results do not depend
/// on the order targets are listed in.
pub fn target_seed(global_seed: u64, target_id: &str) -> u64 {
    derive_seed(global_seed, &[stream::TARGET, hash_str(target_id)])
}

pub fn summarize(target: &Target, track: TrackRecord, c: &CanonicalConstants) -> TrackResult {
    let metrics = (
        rmse_position(&track, c),
        rmse_vector(&track, Component::Position, c),
        rmse_vector(&track, Component::Velocity, c),
    );
    let error = match (&track.error, &metrics.0) {
        (Some(e), _) => Some(e.to_string()),
        (None, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    TrackResult {
        target_id: target.record.id.clone(),
        family: target.record.family,
        period: target.record.period,
        rmse_pos_km: metrics.0.unwrap_or(f64::NAN),
        rmse_vec_pos_km: metrics.1.unwrap_or(f64::NAN),
        rmse_vel_kms: metrics.2.unwrap_or(f64::NAN),
        visibility_fraction: visibility_fraction(&track),
        error,
        track,
    }
}

/// Tracks one target with the constellation and summarizes it.
pub fn evaluate_target(
    setup: &TrackSetup,
    observers: &[StateVector],
    target: &Target,
    global_seed: u64,
) -> TrackResult {
    let track = run_track(&target.state, observers, setup, target_seed(global_seed, &target.record.id));
    summarize(target, track, setup.propagator.constants())
}

/// Mean of the per-target losses in input order.
pub fn mean_loss(results: &[TrackResult], penalty: f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("target set is empty"));
    }
    Ok(results.iter().map(|r| r.loss(penalty)).sum::<f64>() / results.len() as f64)
}

/// Serial objective: mean position RMSE over the targets, with failed tracks
/// counted at `penalty`.
pub fn objective(
    setup: &TrackSetup,
    observers: &[StateVector],
    targets: &[Target],
    global_seed: u64,
    penalty: f64,
) -> Result<f64> {
    let results: Vec<TrackResult> =
        targets.iter().map(|t| evaluate_target(setup, observers, t, global_seed).without_series()).collect();
    mean_loss(&results, penalty)
}

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(BoxStats {
        count: v.len(),
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyStats {
    /// Family label, or a derived group such as `DRO (T <= 3.75)`.
    pub family: String,
    pub rmse_pos_km: BoxStats,
    pub rmse_vel_kms: Option<BoxStats>,
    pub mean_visibility: f64,
    pub skipped: usize,
}

fn stats_for<'a>(label: String, results: impl Iterator<Item = &'a TrackResult>) -> Option<FamilyStats> {
    let (ok, bad): (Vec<&TrackResult>, Vec<&TrackResult>) = results.partition(|r| !r.failed());
    let pos: Vec<f64> = ok.iter().map(|r| r.rmse_pos_km).collect();
    let vel: Vec<f64> = ok.iter().map(|r| r.rmse_vel_kms).collect();
    let rmse_pos_km = box_stats(&pos)?;
    Some(FamilyStats {
        family: label,
        rmse_pos_km,
        rmse_vel_kms: box_stats(&vel),
        mean_visibility: ok.iter().map(|r| r.visibility_fraction).sum::<f64>() / ok.len() as f64,
        skipped: bad.len(),
    })
}

/// Per-family statistics in family order, skipping failed tracks. With
/// `dro_split`, DRO results also appear split at that period.
pub fn family_stats(results: &[TrackResult], dro_split: Option<f64>) -> Vec<FamilyStats> {
    let mut out = Vec::new();
    for family in OrbitFamily::ALL {
        let members = results.iter().filter(|r| r.family == family);
        if let Some(s) = stats_for(family.label().to_string(), members) {
            out.push(s);
        }
        if family == OrbitFamily::Dro {
            if let Some(split) = dro_split {
                let dro = || results.iter().filter(|r| r.family == OrbitFamily::Dro);
                let short = dro().filter(|r| r.period.is_some_and(|p| p <= split));
                let long = dro().filter(|r| r.period.is_some_and(|p| p > split));
                out.extend(stats_for(alloc::format!("DRO (T <= {split})"), short));
                out.extend(stats_for(alloc::format!("DRO (T > {split})"), long));
            }
        }
    }
    out
}

/// Default split for [`family_stats`].
pub fn default_dro_split() -> Option<f64> {
    Some(DRO_SPLIT_PERIOD)
}

/// Histogram grouping of sibling families.
pub fn histogram_group(family: OrbitFamily) -> &'static str {
    match family {
        OrbitFamily::Bno | OrbitFamily::Bso => "Butterfly",
        OrbitFamily::Dro => "DRO",
        OrbitFamily::L1Nho | OrbitFamily::L1Sho => "L1 Halo",
        OrbitFamily::L2Nho | OrbitFamily::L2Sho => "L2 Halo",
        OrbitFamily::Lpeo | OrbitFamily::Lpwo => "Low Prograde",
        OrbitFamily::R11 | OrbitFamily::R21 | OrbitFamily::R41 => "Resonant",
        OrbitFamily::L1Tt => "L1 Transfer",
        OrbitFamily::Nrho => "NRHO",
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub group: String,
    pub edges: Vec<f64>,
    /// `counts[i]` covers `[edges[i], edges[i+1])`; the last bin is closed.
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

pub fn histogram(group: &str, values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("histogram edges must be strictly increasing"));
    }
    let mut h = Histogram {
        group: group.to_string(),
        edges: edges.to_vec(),
        counts: alloc::vec![0; edges.len() - 1],
        below: 0,
        above: 0,
    };
    let last = edges[edges.len() - 1];
    for &v in values.iter().filter(|v| v.is_finite()) {
        if v < edges[0] {
            h.below += 1;
        } else if v > last {
            h.above += 1;
        } else {
            let i = edges.partition_point(|&e| e <= v).saturating_sub(1).min(h.counts.len() - 1);
            h.counts[i] += 1;
        }
    }
    Ok(h)
}

/// Evenly spaced edges.
pub fn linear_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PositionKm,
    VelocityKmS,
}

/// Histograms of one metric per family group, skipping failed tracks.
pub fn group_histograms(results: &[TrackResult], metric: Metric, edges: &[f64]) -> Result<Vec<Histogram>> {
    let mut groups: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in results.iter().filter(|r| !r.failed()) {
        let v = match metric {
            Metric::PositionKm => r.rmse_pos_km,
            Metric::VelocityKmS => r.rmse_vel_kms,
        };
        groups.entry(histogram_group(r.family)).or_default().push(v);
    }
    groups.into_iter().map(|(g, v)| histogram(g, &v, edges)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub results: Vec<TrackResult>,
    pub family_stats: Vec<FamilyStats>,
    pub position_histograms: Vec<Histogram>,
    pub velocity_histograms: Vec<Histogram>,
    pub skipped: usize,
}

/// Aggregates already evaluated results.
pub fn build_report(
    results: Vec<TrackResult>,
    dro_split: Option<f64>,
    position_edges: &[f64],
    velocity_edges: &[f64],
) -> Result<ValidationReport> {
    Ok(ValidationReport {
        family_stats: family_stats(&results, dro_split),
        position_histograms: group_histograms(&results, Metric::PositionKm, position_edges)?,
        velocity_histograms: group_histograms(&results, Metric::VelocityKmS, velocity_edges)?,
        skipped: results.iter().filter(|r| r.failed()).count(),
        results,
    })
}

/// Serial validation over a target set.
pub fn validate(
    setup: &TrackSetup,
    observers: &[StateVector],
    targets: &[Target],
    global_seed: u64,
    dro_split: Option<f64>,
    position_edges: &[f64],
    velocity_edges: &[f64],
) -> Result<ValidationReport> {
    let results = targets.iter().map(|t| evaluate_target(setup, observers, t, global_seed).without_series()).collect();
    build_report(results, dro_split, position_edges, velocity_edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaRow {
    pub t: f64,
    /// Estimate minus truth.
    pub error: [f64; 6],
    /// `3 * sqrt(P_ii)`.
    pub three_sigma: [f64; 6],
    pub unobserved: bool,
}

pub fn three_sigma_series(track: &TrackRecord) -> Vec<SigmaRow> {
    track
        .epochs
        .iter()
        .map(|e| SigmaRow {
            t: e.t,
            error: core::array::from_fn(|i| e.estimate[i] - e.truth[i]),
            three_sigma: core::array::from_fn(|i| 3.0 * e.p[(i, i)].max(0.0).sqrt()),
            unobserved: !e.corrected,
        })
        .collect()
}

/// Fraction of epochs where each position error lies within its 3-sigma band.
pub fn containment_fraction(track: &TrackRecord) -> [f64; 3] {
    let rows = three_sigma_series(track);
    let n = rows.len().max(1) as f64;
    core::array::from_fn(|i| rows.iter().filter(|r| r.error[i].abs() <= r.three_sigma[i]).count() as f64 / n)
}
