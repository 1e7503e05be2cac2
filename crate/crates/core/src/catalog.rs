//! Periodic-orbit catalog records, filtering, observer slots, target phase
//! sampling, optimization-set construction and transfer generation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{Matrix6, Vector6};
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::propagation::{Direction, Propagator};
use crate::seeding::{derive_seed, hash_str, rng_from, stream};
use crate::state::StateVector;

/// Orbit family labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OrbitFamily {
    #[cfg_attr(feature = "serde", serde(rename = "BNO"))]
    Bno,
    #[cfg_attr(feature = "serde", serde(rename = "BSO"))]
    Bso,
    #[cfg_attr(feature = "serde", serde(rename = "DRO"))]
    Dro,
    #[cfg_attr(feature = "serde", serde(rename = "L1NHO"))]
    L1Nho,
    #[cfg_attr(feature = "serde", serde(rename = "L1SHO"))]
    L1Sho,
    #[cfg_attr(feature = "serde", serde(rename = "L2NHO"))]
    L2Nho,
    #[cfg_attr(feature = "serde", serde(rename = "L2SHO"))]
    L2Sho,
    #[cfg_attr(feature = "serde", serde(rename = "LPEO"))]
    Lpeo,
    #[cfg_attr(feature = "serde", serde(rename = "LPWO"))]
    Lpwo,
    #[cfg_attr(feature = "serde", serde(rename = "R1:1O"))]
    R11,
    #[cfg_attr(feature = "serde", serde(rename = "R2:1O"))]
    R21,
    #[cfg_attr(feature = "serde", serde(rename = "R4:1O"))]
    R41,
    #[cfg_attr(feature = "serde", serde(rename = "L1TT"))]
    L1Tt,
    #[cfg_attr(feature = "serde", serde(rename = "NRHO"))]
    Nrho,
}

impl OrbitFamily {
    pub const ALL: [OrbitFamily; 14] = [
        OrbitFamily::Bno,
        OrbitFamily::Bso,
        OrbitFamily::Dro,
        OrbitFamily::L1Nho,
        OrbitFamily::L1Sho,
        OrbitFamily::L2Nho,
        OrbitFamily::L2Sho,
        OrbitFamily::Lpeo,
        OrbitFamily::Lpwo,
        OrbitFamily::R11,
        OrbitFamily::R21,
        OrbitFamily::R41,
        OrbitFamily::L1Tt,
        OrbitFamily::Nrho,
    ];

    /// The twelve periodic families making up target and observer sets.
    pub const PERIODIC: [OrbitFamily; 12] = [
        OrbitFamily::Bno,
        OrbitFamily::Bso,
        OrbitFamily::Dro,
        OrbitFamily::L1Nho,
        OrbitFamily::L1Sho,
        OrbitFamily::L2Nho,
        OrbitFamily::L2Sho,
        OrbitFamily::Lpeo,
        OrbitFamily::Lpwo,
        OrbitFamily::R11,
        OrbitFamily::R21,
        OrbitFamily::R41,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OrbitFamily::Bno => "BNO",
            OrbitFamily::Bso => "BSO",
            OrbitFamily::Dro => "DRO",
            OrbitFamily::L1Nho => "L1NHO",
            OrbitFamily::L1Sho => "L1SHO",
            OrbitFamily::L2Nho => "L2NHO",
            OrbitFamily::L2Sho => "L2SHO",
            OrbitFamily::Lpeo => "LPEO",
            OrbitFamily::Lpwo => "LPWO",
            OrbitFamily::R11 => "R1:1O",
            OrbitFamily::R21 => "R2:1O",
            OrbitFamily::R41 => "R4:1O",
            OrbitFamily::L1Tt => "L1TT",
            OrbitFamily::Nrho => "NRHO",
        }
    }

    pub fn is_transfer(self) -> bool {
        self == OrbitFamily::L1Tt
    }
}

impl fmt::Display for OrbitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OrbitFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        OrbitFamily::ALL
            .iter()
            .copied()
            .find(|f| f.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::invalid(format!("unknown orbit family '{t}'")))
    }
}

/// One catalog orbit. Transfer records carry neither period nor stability index.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub id: String,
    pub family: OrbitFamily,
    pub ic: StateVector,
    pub period: Option<f64>,
    pub stability_index: Option<f64>,
}

impl OrbitRecord {
    pub fn new(
        id: impl Into<String>,
        family: OrbitFamily,
        ic: StateVector,
        period: Option<f64>,
        stability_index: Option<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if !ic.is_finite() {
            return Err(Error::invalid(format!("orbit {id}: non-finite initial condition")));
        }
        if let Some(p) = period {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(format!("orbit {id}: period must be positive")));
            }
        }
        if let Some(si) = stability_index {
            if !(si.is_finite() && si >= 1.0) {
                return Err(Error::invalid(format!("orbit {id}: stability index must be >= 1")));
            }
        }
        Ok(Self { id, family, ic, period, stability_index })
    }

    pub fn require_period(&self) -> Result<f64> {
        self.period.ok_or_else(|| Error::MissingPeriod(self.id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCriteria {
    pub si_max: f64,
    pub period_max: f64,
    pub include_transfers: bool,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self { si_max: 1.3, period_max: 6.28, include_transfers: false }
    }
}

/// Keeps records with `SI <= si_max` and `period <= period_max`, preserving
/// order. Records lacking either value pass only as flagged transfers.
pub fn filter_catalog(records: &[OrbitRecord], criteria: &FilterCriteria) -> Vec<OrbitRecord> {
    records
        .iter()
        .filter(|r| match (r.period, r.stability_index) {
            (Some(p), Some(si)) => si <= criteria.si_max && p <= criteria.period_max,
            _ => criteria.include_transfers && r.family.is_transfer(),
        })
        .cloned()
        .collect()
}

/// A phased placement point on a catalog orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSlot {
    pub orbit_id: String,
    pub family: OrbitFamily,
    pub period: f64,
    pub phase_index: usize,
    pub slots_per_orbit: usize,
    pub epoch_state: StateVector,
}

impl OrbitalSlot {
    pub fn phase_fraction(&self) -> f64 {
        self.phase_index as f64 / self.slots_per_orbit as f64
    }
}

/// Equally phased slots on each record, in record order.
pub fn generate_slots(records: &[OrbitRecord], slots_per_orbit: usize, prop: &Propagator) -> Result<Vec<OrbitalSlot>> {
    if slots_per_orbit == 0 {
        return Err(Error::invalid("slots_per_orbit must be at least 1"));
    }
    let mut out = Vec::with_capacity(records.len() * slots_per_orbit);
    for r in records {
        out.extend(slots_for_record(r, slots_per_orbit, prop)?);
    }
    Ok(out)
}

pub fn slots_for_record(record: &OrbitRecord, slots_per_orbit: usize, prop: &Propagator) -> Result<Vec<OrbitalSlot>> {
    let period = record.require_period()?;
    let times: Vec<f64> = (0..slots_per_orbit).map(|k| k as f64 / slots_per_orbit as f64 * period).collect();
    let states = prop.states_at(&record.ic, &times).map_err(|e| e.for_orbit(&record.id))?;
    Ok(states
        .into_iter()
        .enumerate()
        .map(|(k, s)| OrbitalSlot {
            orbit_id: record.id.clone(),
            family: record.family,
            period,
            phase_index: k,
            slots_per_orbit,
            epoch_state: s,
        })
        .collect())
}

/// A target orbit with its sampled starting phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub record: OrbitRecord,
    /// Fraction of the period the IC was advanced by (0 for transfers).
    pub phase_fraction: f64,
    pub state: StateVector,
}

/// Uniform phase in `[0, T)` drawn from `rng`; returns the fraction and the
/// advanced state.
pub fn sample_phase_with<R: Rng + ?Sized>(
    record: &OrbitRecord,
    rng: &mut R,
    prop: &Propagator,
) -> Result<(f64, StateVector)> {
    let period = record.require_period()?;
    let u: f64 = rng.random();
    let s = prop.state_after(&record.ic, u * period).map_err(|e| e.for_orbit(&record.id))?;
    Ok((u, s))
}

/// Seeded phase sample.
pub fn sample_target_phase(record: &OrbitRecord, seed: u64, prop: &Propagator) -> Result<StateVector> {
    sample_phase_with(record, &mut rng_from(seed), prop).map(|(_, s)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TargetSetKind {
    Optimization,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub kind: TargetSetKind,
    pub members: Vec<Target>,
}

impl TargetSet {
    /// Samples a random phase for every periodic record. Each record's stream
    /// is keyed by `seed` and its id, so membership changes do not perturb the
    /// other targets. Transfers start at their catalog state.
    pub fn sample(kind: TargetSetKind, records: &[OrbitRecord], seed: u64, prop: &Propagator) -> Result<Self> {
        let members = records
            .iter()
            .map(|r| {
                if r.period.is_none() {
                    return Ok(Target { record: r.clone(), phase_fraction: 0.0, state: r.ic });
                }
                let mut rng = rng_from(derive_seed(seed, &[stream::PHASE, hash_str(&r.id)]));
                let (u, s) = sample_phase_with(r, &mut rng, prop)?;
                Ok(Target { record: r.clone(), phase_fraction: u, state: s })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, members })
    }

    /// Members at their catalog initial conditions.
    pub fn at_catalog_phase(kind: TargetSetKind, records: &[OrbitRecord]) -> Self {
        let members = records.iter().map(|r| Target { record: r.clone(), phase_fraction: 0.0, state: r.ic }).collect();
        Self { kind, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Non-fatal conditions met while building a target set.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionWarning {
    SmallFamily { family: OrbitFamily, available: usize },
    FewTransfers { available: usize },
}

impl fmt::Display for SelectionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionWarning::SmallFamily { family, available } => {
                write!(f, "family {family} has only {available} orbit(s); all selected")
            }
            SelectionWarning::FewTransfers { available } => {
                write!(f, "only {available} transfer record(s) available; all selected")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationSelection {
    pub records: Vec<OrbitRecord>,
    pub warnings: Vec<SelectionWarning>,
}

/// Index of the lower median of `n` sorted items.
pub fn lower_median_index(n: usize) -> usize {
    (n.max(1) - 1) / 2
}

/// Per periodic family, the shortest, lower-median and longest period orbits,
/// followed by three transfers (first, middle, last).
pub fn build_optimization_set(validation: &[OrbitRecord], transfers: &[OrbitRecord]) -> Result<OptimizationSelection> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for family in OrbitFamily::PERIODIC {
        let mut members: Vec<&OrbitRecord> =
            validation.iter().filter(|r| r.family == family && r.period.is_some()).collect();
        if members.is_empty() {
            return Err(Error::EmptyFamily(family));
        }
        // Stable sort keeps catalog order among equal periods.
        members.sort_by(|a, b| a.period.partial_cmp(&b.period).unwrap_or(core::cmp::Ordering::Equal));
        let n = members.len();
        if n < 3 {
            warnings.push(SelectionWarning::SmallFamily { family, available: n });
            records.extend(members.into_iter().cloned());
            continue;
        }
        for idx in [0, n - 1, lower_median_index(n)] {
            records.push(members[idx].clone());
        }
    }
    let tt: Vec<&OrbitRecord> = transfers.iter().filter(|r| r.family.is_transfer()).collect();
    if tt.len() < 3 {
        warnings.push(SelectionWarning::FewTransfers { available: tt.len() });
        records.extend(tt.into_iter().cloned());
    } else {
        let n = tt.len();
        for idx in [0, (n - 1) / 2, n - 1] {
            records.push(tt[idx].clone());
        }
    }
    Ok(OptimizationSelection { records, warnings })
}

/// Splits DROs into `(period <= threshold, period > threshold)`.
pub fn split_by_period<'a>(
    records: impl IntoIterator<Item = &'a OrbitRecord>,
    threshold: f64,
) -> (Vec<&'a OrbitRecord>, Vec<&'a OrbitRecord>) {
    records.into_iter().partition(|r| r.period.is_some_and(|p| p <= threshold))
}

/// Period separating short and long DROs.
pub const DRO_SPLIT_PERIOD: f64 = 3.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    pub count: usize,
    /// Offset along the stable eigenvector, DU.
    pub manifold_step: f64,
    /// Backward search horizon per point, TU.
    pub horizon: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self { count: 19, manifold_step: 1e-4, horizon: 40.0 }
    }
}

/// Eigenvector of the monodromy matrix with the smallest-magnitude
/// eigenvalue, by inverse power iteration.
pub fn stable_direction(monodromy: &Matrix6<f64>) -> Result<(f64, Vector6<f64>)> {
    let lu = monodromy.lu();
    let mut v = Vector6::from_element(1.0).normalize();
    let mut lambda_inv = 0.0;
    for _ in 0..500 {
        let w = lu.solve(&v).ok_or(Error::invalid("monodromy matrix is singular"))?;
        let n = w.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::invalid("stable direction iteration failed"));
        }
        let next = w / n;
        let next = if next.dot(&v) < 0.0 { -next } else { next };
        let done = (next - v).amax() < 1e-13;
        lambda_inv = n;
        v = next;
        if done {
            break;
        }
    }
    let lambda = (monodromy * v).dot(&v);
    if !(lambda.abs() < 1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "no stable eigenvalue (estimate {lambda}, inverse-iteration growth {lambda_inv})"
        )));
    }
    Ok((lambda, v))
}

/// Transfer-like arcs onto a halo orbit: `count` equally phased points are
/// displaced along the local stable direction and propagated backward to
/// the plane x = 0.
pub fn generate_transfers(halo: &OrbitRecord, cfg: &TransferConfig, prop: &Propagator) -> Result<Vec<OrbitRecord>> {
    let period = halo.require_period()?;
    if cfg.count == 0 {
        return Err(Error::invalid("transfer count must be at least 1"));
    }
    let wrap = |e: Error| e.for_orbit(&halo.id);
    let (_, monodromy) = prop.state_and_stm(&halo.ic, period).map_err(wrap)?;
    let (_, v0) = stable_direction(&monodromy).map_err(wrap)?;
    let mut out = Vec::with_capacity(cfg.count);
    for k in 0..cfg.count {
        let tk = k as f64 * period / cfg.count as f64;
        let (point, stm) = prop.state_and_stm(&halo.ic, tk).map_err(wrap)?;
        let dir = stm * v0;
        let dir = dir / dir.fixed_rows::<3>(0).norm();
        let mut best: Option<(StateVector, f64)> = None;
        let mut last_err = None;
        for sign in [1.0, -1.0] {
            let seed = StateVector(point.0 + dir * (sign * cfg.manifold_step));
            match prop.to_plane_crossing(&seed, Direction::Backward, cfg.horizon) {
                Ok((s, t)) if best.is_none_or(|(_, bt)| t.abs() < bt.abs()) => best = Some((s, t)),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        let (mut state, _) =
            best.ok_or_else(|| wrap(last_err.unwrap_or(Error::NoCrossing { horizon: cfg.horizon })))?;
        state[0] = 0.0;
        out.push(OrbitRecord {
            id: format!("{}-TT{:02}", halo.id, k + 1),
            family: OrbitFamily::L1Tt,
            ic: state,
            period: None,
            stability_index: None,
        });
    }
    Ok(out)
}

/// Thresholds for the catalog verification pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyCriteria {
    /// Maximum one-period closure error, infinity norm.
    pub closure_tol: f64,
}

impl Default for VerifyCriteria {
    fn default() -> Self {
        Self { closure_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyOutcome {
    Accepted,
    NotPeriodic { closure: f64 },
    IntersectsPrimary { body: &'static str, min_distance: f64 },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub id: String,
    pub closure: Option<f64>,
    pub min_earth_distance: Option<f64>,
    pub min_moon_distance: Option<f64>,
    pub outcome: VerifyOutcome,
}

/// Propagates one period and checks closure and clearance of both primaries.
pub fn verify_record(record: &OrbitRecord, prop: &Propagator, criteria: &VerifyCriteria) -> VerifyReport {
    let mut report = VerifyReport {
        id: record.id.clone(),
        closure: None,
        min_earth_distance: None,
        min_moon_distance: None,
        outcome: VerifyOutcome::Accepted,
    };
    let Some(period) = record.period else {
        report.outcome = VerifyOutcome::Failed("record has no period".to_string());
        return report;
    };
    let traj = match prop.propagate(&record.ic, 0.0, period) {
        Ok(t) => t,
        Err(e) => {
            report.outcome = VerifyOutcome::Failed(e.to_string());
            return report;
        }
    };
    let c = prop.constants();
    let (earth, moon) = (c.earth(), c.moon());
    let mut d_e = f64::INFINITY;
    let mut d_m = f64::INFINITY;
    // Accepted nodes plus a uniform dense sample between them.
    let dense = (0..=400).filter_map(|i| traj.state_at(period * i as f64 / 400.0));
    for s in traj.nodes().map(|(_, s)| s).chain(dense) {
        d_e = d_e.min((s.position() - earth.center).norm());
        d_m = d_m.min((s.position() - moon.center).norm());
    }
    let closure = traj.final_state().max_abs_diff(&record.ic);
    report.closure = Some(closure);
    report.min_earth_distance = Some(d_e);
    report.min_moon_distance = Some(d_m);
    report.outcome = if d_e <= earth.radius {
        VerifyOutcome::IntersectsPrimary { body: "Earth", min_distance: d_e }
    } else if d_m <= moon.radius {
        VerifyOutcome::IntersectsPrimary { body: "Moon", min_distance: d_m }
    } else if !(closure < criteria.closure_tol) {
        VerifyOutcome::NotPeriodic { closure }
    } else {
        VerifyOutcome::Accepted
    };
    report
}
