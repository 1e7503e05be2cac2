//! Report writers: family statistics, histograms, visibility tables.

use std::path::Path;

use anyhow::{Context, Result};
use cislunar_core::harness::{BoxStats, FamilyStats, Histogram, ValidationReport};
use serde::Serialize;

use crate::io::sig9;

fn r9(v: f64) -> f64 {
    if v.is_finite() {
        sig9(v).parse().unwrap_or(v)
    } else {
        v
    }
}

fn round_box(b: &BoxStats) -> BoxStats {
    BoxStats {
        count: b.count,
        min: r9(b.min),
        q1: r9(b.q1),
        median: r9(b.median),
        q3: r9(b.q3),
        max: r9(b.max),
        mean: r9(b.mean),
    }
}

pub fn rounded_stats(stats: &[FamilyStats]) -> Vec<FamilyStats> {
    stats
        .iter()
        .map(|s| FamilyStats {
            family: s.family.clone(),
            rmse_pos_km: round_box(&s.rmse_pos_km),
            rmse_vel_kms: s.rmse_vel_kms.as_ref().map(round_box),
            mean_visibility: r9(s.mean_visibility),
            skipped: s.skipped,
        })
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_family_stats(path: &Path, stats: &[FamilyStats]) -> Result<()> {
    write_json(path, &rounded_stats(stats))
}

/// Long format: one row per bin, plus under/overflow rows.
pub fn write_histograms(path: &Path, position: &[Histogram], velocity: &[Histogram]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["metric", "group", "bin_lo", "bin_hi", "count"])?;
    for (metric, hs) in [("rmse_pos_km", position), ("rmse_vel_kms", velocity)] {
        for h in hs {
            let lo = h.edges[0];
            let hi = h.edges[h.edges.len() - 1];
            w.write_record([metric, &h.group, "-inf", &sig9(lo), &h.below.to_string()])?;
            for (i, c) in h.counts.iter().enumerate() {
                w.write_record([metric, &h.group, &sig9(h.edges[i]), &sig9(h.edges[i + 1]), &c.to_string()])?;
            }
            w.write_record([metric, &h.group, &sig9(hi), "inf", &h.above.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_visibility(path: &Path, stats: &[FamilyStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["family", "targets", "mean_visibility"])?;
    for s in stats {
        w.write_record([&s.family, &s.rmse_pos_km.count.to_string(), &sig9(s.mean_visibility)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `family_stats.json`, `histograms.csv` and `visibility.csv`.
pub fn write_report(dir: &Path, report: &ValidationReport) -> Result<()> {
    write_family_stats(&dir.join("family_stats.json"), &report.family_stats)?;
    write_histograms(&dir.join("histograms.csv"), &report.position_histograms, &report.velocity_histograms)?;
    write_visibility(&dir.join("visibility.csv"), &report.family_stats)
}
