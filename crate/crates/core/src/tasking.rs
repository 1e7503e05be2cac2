//! Observer duty schedules for the single-observer baseline and the three
//! constellation tasking procedures.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Procedure {
    #[cfg_attr(feature = "serde", serde(rename = "baseline"))]
    Baseline,
    /// All observers measure together.
    #[cfg_attr(feature = "serde", serde(rename = "stp-a"))]
    StpA,
    /// Observers measure one after another.
    #[cfg_attr(feature = "serde", serde(rename = "stp-b"))]
    StpB,
    /// Two groups alternate.
    #[cfg_attr(feature = "serde", serde(rename = "stp-c"))]
    StpC,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [Procedure::Baseline, Procedure::StpA, Procedure::StpB, Procedure::StpC];

    pub fn token(self) -> &'static str {
        match self {
            Procedure::Baseline => "baseline",
            Procedure::StpA => "stp-a",
            Procedure::StpB => "stp-b",
            Procedure::StpC => "stp-c",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        Procedure::ALL
            .iter()
            .copied()
            .find(|p| p.token() == t || p.token().replace('-', "") == t)
            .ok_or_else(|| Error::invalid(format!("unknown tasking procedure '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskingSchedule {
    pub procedure: Procedure,
    pub n_observers: usize,
    pub individual_cadence: f64,
    pub system_cadence: f64,
    pub horizon: f64,
    /// Alternating groups for STP-C; empty otherwise.
    pub groups: [Vec<usize>; 2],
}

pub fn build_schedule(
    procedure: Procedure,
    n_observers: usize,
    individual_cadence: f64,
    horizon: f64,
) -> Result<TaskingSchedule> {
    let group_one = n_observers.div_ceil(2);
    build_schedule_with_groups(
        procedure,
        n_observers,
        individual_cadence,
        horizon,
        [(0..group_one).collect(), (group_one..n_observers).collect()],
    )
}

/// As [`build_schedule`], with explicit STP-C group membership.
pub fn build_schedule_with_groups(
    procedure: Procedure,
    n_observers: usize,
    individual_cadence: f64,
    horizon: f64,
    groups: [Vec<usize>; 2],
) -> Result<TaskingSchedule> {
    if n_observers == 0 {
        return Err(Error::invalid("at least one observer is required"));
    }
    if !(individual_cadence.is_finite() && individual_cadence > 0.0) {
        return Err(Error::invalid("cadence must be positive"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let system_cadence = match procedure {
        Procedure::Baseline => {
            if n_observers != 1 {
                return Err(Error::invalid("the baseline uses exactly one observer"));
            }
            individual_cadence
        }
        Procedure::StpA => individual_cadence,
        Procedure::StpB => individual_cadence / n_observers as f64,
        Procedure::StpC => {
            if n_observers < 2 {
                return Err(Error::invalid("STP-C needs at least two observers"));
            }
            let mut seen = alloc::vec![false; n_observers];
            for &i in groups.iter().flatten() {
                if i >= n_observers || seen[i] {
                    return Err(Error::invalid("STP-C groups must partition the observers"));
                }
                seen[i] = true;
            }
            if seen.contains(&false) || groups.iter().any(Vec::is_empty) {
                return Err(Error::invalid("STP-C groups must partition the observers"));
            }
            individual_cadence / 2.0
        }
    };
    let groups = if procedure == Procedure::StpC { groups } else { [Vec::new(), Vec::new()] };
    Ok(TaskingSchedule { procedure, n_observers, individual_cadence, system_cadence, horizon, groups })
}

impl TaskingSchedule {
    /// Number of measurement epochs, `floor(horizon / system_cadence)`.
    pub fn epoch_count(&self) -> usize {
        epoch_count(self.horizon, self.system_cadence)
    }

    /// Epoch times `k * system_cadence`, `k = 1..=n`.
    pub fn epochs(&self) -> Vec<f64> {
        (1..=self.epoch_count()).map(|k| k as f64 * self.system_cadence).collect()
    }

    /// Observers tasked at epoch `k` (1-based).
    pub fn tasked(&self, k: usize) -> Vec<usize> {
        match self.procedure {
            Procedure::Baseline | Procedure::StpA => (0..self.n_observers).collect(),
            Procedure::StpB => alloc::vec![(k + self.n_observers - 1) % self.n_observers],
            Procedure::StpC => self.groups[if k % 2 == 1 { 0 } else { 1 }].clone(),
        }
    }
}

/// `floor(horizon / cadence)`, tolerant of the ratio landing a few ulps
/// below an integer.
pub fn epoch_count(horizon: f64, cadence: f64) -> usize {
    let ratio = horizon / cadence;
    let r = ratio.round();
    if (ratio - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        ratio.floor() as usize
    }
}

/// Epoch times for `schedule` over an explicit horizon.
pub fn epochs(schedule: &TaskingSchedule, horizon: f64) -> Vec<f64> {
    (1..=epoch_count(horizon, schedule.system_cadence)).map(|k| k as f64 * schedule.system_cadence).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cadences_for_four_observers() {
        let a = build_schedule(Procedure::StpA, 4, 0.02, 8.0).unwrap();
        let b = build_schedule(Procedure::StpB, 4, 0.02, 8.0).unwrap();
        let c = build_schedule(Procedure::StpC, 4, 0.02, 8.0).unwrap();
        assert_eq!((a.system_cadence, b.system_cadence, c.system_cadence), (0.02, 0.005, 0.01));
        assert_eq!((a.epoch_count(), b.epoch_count(), c.epoch_count()), (400, 1600, 800));
        assert_eq!(c.groups, [alloc::vec![0, 1], alloc::vec![2, 3]]);
    }

    #[test]
    fn sequential_pattern() {
        let b = build_schedule(Procedure::StpB, 4, 0.02, 8.0).unwrap();
        let seq: Vec<usize> = (1..=8).flat_map(|k| b.tasked(k)).collect();
        assert_eq!(seq, [0, 1, 2, 3, 0, 1, 2, 3]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(build_schedule(Procedure::Baseline, 2, 0.02, 8.0).is_err());
        assert!(build_schedule(Procedure::StpC, 1, 0.02, 8.0).is_err());
        assert!(build_schedule(Procedure::StpA, 0, 0.02, 8.0).is_err());
        assert!(build_schedule(Procedure::StpA, 2, 0.0, 8.0).is_err());
        let bad = [alloc::vec![0, 1], alloc::vec![1, 2]];
        assert!(build_schedule_with_groups(Procedure::StpC, 3, 0.02, 8.0, bad).is_err());
    }

    #[test]
    fn odd_group_split() {
        let c = build_schedule(Procedure::StpC, 5, 0.02, 1.0).unwrap();
        assert_eq!(c.tasked(1), [0, 1, 2]);
        assert_eq!(c.tasked(2), [3, 4]);
    }

    #[test]
    fn tokens_parse() {
        for p in Procedure::ALL {
            assert_eq!(p.token().parse::<Procedure>().unwrap(), p);
        }
        assert_eq!("STPB".parse::<Procedure>().unwrap(), Procedure::StpB);
        assert!("stp-d".parse::<Procedure>().is_err());
    }
}
