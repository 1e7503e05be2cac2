//! CSV readers and writers for catalogs, slots and result tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cislunar_core::catalog::{OrbitFamily, OrbitRecord, OrbitalSlot};
use cislunar_core::ekf::TrackRecord;
use cislunar_core::harness::{SigmaRow, TrackResult};
use cislunar_core::{CanonicalConstants, StateVector};

use crate::error::ConfigError;

pub const CATALOG_COLUMNS: [&str; 10] =
    ["id", "family", "x", "y", "z", "vx", "vy", "vz", "period_tu", "stability_index"];

/// Formats with 9 significant digits, shortest form.
pub fn sig9(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let r: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    let a = r.abs();
    if r == 0.0 || (1e-4..1e9).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn opt_sig9(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

fn parse_opt(raw: &str) -> std::result::Result<Option<f64>, String> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("n/a") || s.eq_ignore_ascii_case("na") || s == "-" {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| format!("'{s}' is not a number"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| ConfigError::new(format!("cannot open {}: {e}", path.display())).into())
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(f))
}

/// A catalog record plus any extra columns of its row (e.g. `stp`).
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRow {
    pub record: OrbitRecord,
    pub tags: BTreeMap<String, String>,
}

impl CatalogRow {
    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }
}

/// Parses catalog CSV. Columns are located by header name; extra columns
/// become tags. Errors name the source and the 1-based data row.
pub fn parse_catalog<R: Read>(reader: R, source: &str) -> Result<Vec<CatalogRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().with_context(|| format!("{source}: unreadable header"))?.clone();
    let index = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [0usize; 10];
    for (slot, name) in cols.iter_mut().zip(CATALOG_COLUMNS) {
        *slot = index(name).ok_or_else(|| ConfigError::new(format!("{source}: missing column '{name}'")))?;
    }
    let extra: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !CATALOG_COLUMNS.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let line = n + 1;
        let bad = |msg: String| ConfigError::new(format!("{source}, row {line}: {msg}"));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let family: OrbitFamily = field(1).parse().map_err(|_| bad(format!("unknown family '{}'", field(1))))?;
        let mut ic = [0.0; 6];
        for (k, v) in ic.iter_mut().enumerate() {
            *v = parse_opt(field(2 + k))
                .map_err(&bad)?
                .ok_or_else(|| bad(format!("missing {}", CATALOG_COLUMNS[2 + k])))?;
        }
        let period = parse_opt(field(8)).map_err(&bad)?;
        let si = parse_opt(field(9)).map_err(&bad)?;
        let record = OrbitRecord::new(field(0), family, StateVector::from_slice(&ic), period, si)
            .map_err(|e| bad(e.to_string()))?;
        let tags = extra.iter().map(|(i, h)| (h.clone(), row.get(*i).unwrap_or("").to_string())).collect();
        out.push(CatalogRow { record, tags });
    }
    Ok(out)
}

pub fn read_catalog_rows(path: &Path) -> Result<Vec<CatalogRow>> {
    parse_catalog(open(path)?, &path.display().to_string())
}

pub fn read_catalog(path: &Path) -> Result<Vec<OrbitRecord>> {
    Ok(read_catalog_rows(path)?.into_iter().map(|r| r.record).collect())
}

fn record_fields(r: &OrbitRecord) -> Vec<String> {
    let mut v = vec![r.id.clone(), r.family.label().to_string()];
    v.extend(r.ic.as_array().iter().map(|&x| sig9(x)));
    v.push(opt_sig9(r.period));
    v.push(opt_sig9(r.stability_index));
    v
}

/// Writes records in catalog layout, with `tag_columns` prepended.
pub fn write_catalog<W: Write>(w: W, rows: &[CatalogRow], tag_columns: &[&str]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let header: Vec<&str> = tag_columns.iter().copied().chain(CATALOG_COLUMNS).collect();
    wtr.write_record(&header)?;
    for row in rows {
        let mut fields: Vec<String> =
            tag_columns.iter().map(|c| row.tags.get(*c).cloned().unwrap_or_default()).collect();
        fields.extend(record_fields(&row.record));
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_catalog_file(path: &Path, records: &[OrbitRecord]) -> Result<()> {
    let rows: Vec<CatalogRow> =
        records.iter().map(|r| CatalogRow { record: r.clone(), tags: BTreeMap::new() }).collect();
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_catalog(f, &rows, &[])
}

pub const SLOT_COLUMNS: [&str; 12] =
    ["slot", "orbit_id", "family", "period_tu", "phase_index", "slots_per_orbit", "x", "y", "z", "vx", "vy", "vz"];

pub fn write_slots(path: &Path, slots: &[OrbitalSlot]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(SLOT_COLUMNS)?;
    for (i, s) in slots.iter().enumerate() {
        let mut f = vec![
            i.to_string(),
            s.orbit_id.clone(),
            s.family.label().to_string(),
            sig9(s.period),
            s.phase_index.to_string(),
            s.slots_per_orbit.to_string(),
        ];
        f.extend(s.epoch_state.as_array().iter().map(|&x| sig9(x)));
        wtr.write_record(&f)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_slots(path: &Path) -> Result<Vec<OrbitalSlot>> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 12];
    for (slot, name) in cols.iter_mut().zip(SLOT_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ConfigError::new(format!("{source}: missing column '{name}'")))?;
    }
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let bad = |msg: String| ConfigError::new(format!("{source}, row {}: {msg}", n + 1));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| row.get(cols[i]).unwrap_or("");
        let num = |i: usize| get(i).parse::<f64>().map_err(|_| bad(format!("bad {}", SLOT_COLUMNS[i])));
        let int = |i: usize| get(i).parse::<usize>().map_err(|_| bad(format!("bad {}", SLOT_COLUMNS[i])));
        let family = get(2).parse().map_err(|_| bad(format!("unknown family '{}'", get(2))))?;
        let mut state = [0.0; 6];
        for (k, v) in state.iter_mut().enumerate() {
            *v = num(6 + k)?;
        }
        let slots_per_orbit = int(5)?;
        let phase_index = int(4)?;
        if slots_per_orbit == 0 || phase_index >= slots_per_orbit {
            bail!(bad("phase_index must be below slots_per_orbit".into()));
        }
        out.push(OrbitalSlot {
            orbit_id: get(1).to_string(),
            family,
            period: num(3)?,
            phase_index,
            slots_per_orbit,
            epoch_state: StateVector::from_slice(&state),
        });
    }
    Ok(out)
}

pub const RESULT_COLUMNS: [&str; 8] = [
    "target_id",
    "family",
    "period_tu",
    "rmse_pos_km",
    "rmse_vec_pos_km",
    "rmse_vel_kms",
    "visibility_fraction",
    "error",
];

pub fn write_results(path: &Path, results: &[TrackResult]) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(RESULT_COLUMNS)?;
    for r in results {
        wtr.write_record([
            r.target_id.clone(),
            r.family.label().to_string(),
            opt_sig9(r.period),
            sig9(r.rmse_pos_km),
            sig9(r.rmse_vec_pos_km),
            sig9(r.rmse_vel_kms),
            sig9(r.visibility_fraction),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `per_target.csv` back; the per-epoch series are not stored.
pub fn read_results(path: &Path) -> Result<Vec<TrackResult>> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        bail!(ConfigError::new(format!("{source}: unexpected header")));
    }
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let bad = |msg: String| ConfigError::new(format!("{source}, row {}: {msg}", n + 1));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            let s = &row[i];
            match s {
                "NaN" => Ok(f64::NAN),
                _ => s.parse::<f64>().map_err(|_| bad(format!("bad {}", RESULT_COLUMNS[i]))),
            }
        };
        out.push(TrackResult {
            target_id: row[0].to_string(),
            family: row[1].parse().map_err(|_| bad(format!("unknown family '{}'", &row[1])))?,
            period: parse_opt(&row[2]).map_err(&bad)?,
            rmse_pos_km: num(3)?,
            rmse_vec_pos_km: num(4)?,
            rmse_vel_kms: num(5)?,
            visibility_fraction: num(6)?,
            error: (!row[7].is_empty()).then(|| row[7].to_string()),
            track: TrackRecord { epochs: Vec::new(), error: None },
        });
    }
    Ok(out)
}

/// Per-epoch track table: truth, estimate, covariance diagonal, visibility.
pub fn write_track(path: &Path, track: &TrackRecord) -> Result<()> {
    let mut wtr = create(path)?;
    let mut header = vec!["t_tu".to_string()];
    for prefix in ["truth", "est"] {
        header.extend(["x", "y", "z", "vx", "vy", "vz"].iter().map(|c| format!("{prefix}_{c}")));
    }
    header.extend((0..6).map(|i| format!("p{i}{i}")));
    header.extend(["visible_mask", "corrected", "max_innovation_rad"].map(String::from));
    wtr.write_record(&header)?;
    for e in &track.epochs {
        let mut f = vec![sig9(e.t)];
        f.extend(e.truth.as_array().iter().map(|&v| sig9(v)));
        f.extend(e.estimate.as_array().iter().map(|&v| sig9(v)));
        f.extend(e.p_diag().iter().map(|&v| sig9(v)));
        f.push(e.visible_mask.to_string());
        f.push(u8::from(e.corrected).to_string());
        f.push(sig9(e.max_innovation));
        wtr.write_record(&f)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Error and 3-sigma envelope series in km and km/s.
pub fn write_sigma(path: &Path, rows: &[SigmaRow], c: &CanonicalConstants) -> Result<()> {
    let mut wtr = create(path)?;
    let axes = ["x", "y", "z"];
    let mut header = vec!["t_tu".to_string()];
    header.extend(axes.iter().map(|a| format!("err_{a}_km")));
    header.extend(axes.iter().map(|a| format!("sigma3_{a}_km")));
    header.extend(axes.iter().map(|a| format!("err_v{a}_kms")));
    header.extend(axes.iter().map(|a| format!("sigma3_v{a}_kms")));
    header.push("unobserved".into());
    wtr.write_record(&header)?;
    for r in rows {
        let mut f = vec![sig9(r.t)];
        f.extend((0..3).map(|i| sig9(c.du_to_km(r.error[i]))));
        f.extend((0..3).map(|i| sig9(c.du_to_km(r.three_sigma[i]))));
        f.extend((3..6).map(|i| sig9(c.du_per_tu_to_km_per_s(r.error[i]))));
        f.extend((3..6).map(|i| sig9(c.du_per_tu_to_km_per_s(r.three_sigma[i]))));
        f.push(u8::from(r.unobserved).to_string());
        wtr.write_record(&f)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_examples() {
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.123456789012), "0.123456789");
        assert_eq!(sig9(-2.5e-12), "-2.5e-12");
        assert_eq!(sig9(123456789012.0), "1.23456789e11");
        assert_eq!(sig9(f64::NAN), "NaN");
        assert_eq!(sig9(0.0), "0");
    }

    #[test]
    fn catalog_rows_and_errors() {
        let text = "stp,id,family,x,y,z,vx,vy,vz,period_tu,stability_index\n\
                    stp-a,a,DRO,0.9,0,0,0,0.5,0,3.1,1.0\n\
                    stp-a,t,L1TT,0,-0.3,0.04,1.9,-0.27,-0.33,N/A,\n";
        let rows = parse_catalog(text.as_bytes(), "mem").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].tag("stp"), Some("stp-a"));
        assert_eq!(rows[1].record.period, None);
        assert_eq!(rows[1].record.family, OrbitFamily::L1Tt);
        let broken = "id,family,x,y,z,vx,vy,vz,period_tu,stability_index\na,DRO,0.9,0,zz,0,0,0,1,1\n";
        let err = parse_catalog(broken.as_bytes(), "mem").unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        let missing = "id,family,x,y,z,vx,vy,period_tu,stability_index\n";
        assert!(parse_catalog(missing.as_bytes(), "mem").unwrap_err().to_string().contains("'vz'"));
    }
}
