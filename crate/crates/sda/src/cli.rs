//! The `sda` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use cislunar_core::catalog::{
    filter_catalog, generate_slots, generate_transfers, verify_record, FilterCriteria, OrbitRecord, OrbitalSlot,
    Target, TargetSet, TargetSetKind, TransferConfig, VerifyCriteria, VerifyOutcome,
};
use cislunar_core::harness::{evaluate_target, three_sigma_series, TrackResult};
use cislunar_core::measurement::Fidelity;
use cislunar_core::optimizer::{exhaustive_search, GaRun, StopReason, EXHAUSTIVE_CAP};
use cislunar_core::seeding::hash_str;
use cislunar_core::tasking::Procedure;
use cislunar_core::StateVector;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checkpoint::{slot_refs, Checkpoint, SlotRef};
use crate::config::{fixture, RunConfig};
use crate::error::{exit_code, ConfigError, EXIT_CONFIG, EXIT_OK};
use crate::experiment::{
    family_counts, load_constellation, report, slots_from_catalog, stratified_targets, Evaluator, SlotFitness,
};
use crate::io::{
    read_catalog, read_catalog_rows, read_results, read_slots, sig9, write_catalog, write_catalog_file, write_results,
    write_sigma, write_slots, write_track, CatalogRow,
};
use crate::output::{write_json, write_report};

#[derive(Debug, Parser)]
#[command(name = "sda", version, about = "Cislunar observer-constellation design and analysis")]
pub struct Cli {
    /// TOML config with [run], [sensor] and [ga] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Global seed; overrides the config and SDA_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a catalog, report family counts and write candidate slots.
    Catalog(CatalogArgs),
    /// Track one target with a fixed constellation.
    Track(TrackArgs),
    /// Place observers with the genetic algorithm.
    Optimize(OptimizeArgs),
    /// Evaluate a constellation against a validation target set.
    Validate(ValidateArgs),
    /// Rebuild statistics and histograms from a results directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Maximum stability index (inclusive).
    #[arg(long)]
    pub si_max: Option<f64>,
    /// Maximum period in TU (inclusive).
    #[arg(long)]
    pub period_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Tasking procedure: baseline, stp-a, stp-b or stp-c.
    #[arg(long)]
    pub procedure: Option<Procedure>,
    /// Sensor fidelity: low or high.
    #[arg(long, value_parser = parse_fidelity)]
    pub fidelity: Option<Fidelity>,
    /// Angle noise in arcseconds, overriding the fidelity.
    #[arg(long)]
    pub sigma_angle: Option<f64>,
    /// Scale of the initial estimate perturbation (1 = nominal).
    #[arg(long)]
    pub init_error: Option<f64>,
    /// Unmodeled acceleration standard deviation, DU/TU^2.
    #[arg(long)]
    pub sigma_dyn: Option<f64>,
    /// Simulation horizon, TU.
    #[arg(long)]
    pub horizon: Option<f64>,
}

fn parse_fidelity(s: &str) -> std::result::Result<Fidelity, String> {
    match s.to_ascii_lowercase().as_str() {
        "low" => Ok(Fidelity::Low),
        "high" => Ok(Fidelity::High),
        _ => Err(format!("unknown fidelity '{s}' (expected low or high)")),
    }
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Catalog CSV (default: bundled pooled validation catalog).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Evenly phased slots generated per periodic orbit.
    #[arg(long)]
    pub slots_per_orbit: Option<usize>,
    /// Check one-period closure and primary clearance; failing rows are dropped.
    #[arg(long)]
    pub verify: bool,
    /// One-period closure tolerance for --verify (state max-norm).
    #[arg(long, default_value_t = 1e-5)]
    pub closure_tol: f64,
    /// Generate transfers onto this halo record and append them.
    #[arg(long)]
    pub transfers_from: Option<String>,
    /// Number of transfers to generate.
    #[arg(long, default_value_t = 19)]
    pub transfer_count: usize,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Target catalog (default: bundled low-fidelity best/worst targets).
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Target id; required when the catalog has several rows.
    #[arg(long)]
    pub target_id: Option<String>,
    /// Constellation file (default: bundled baseline NRHO).
    #[arg(long)]
    pub constellation: Option<PathBuf>,
    /// Row group in the constellation file (`stp` column).
    #[arg(long)]
    pub group: Option<String>,
    /// Start the target at a random phase instead of its catalog state.
    #[arg(long)]
    pub random_phase: bool,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Optimization target set (default: bundled 39-target set).
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Catalog the candidate slots are generated from.
    #[arg(long)]
    pub observer_catalog: Option<PathBuf>,
    /// Explicit slot file, e.g. the `slots.csv` written by `catalog`.
    #[arg(long)]
    pub slots: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Evenly phased slots generated per periodic orbit.
    #[arg(long)]
    pub slots_per_orbit: Option<usize>,
    /// Number of observers.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// GA population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// Hard generation cap.
    #[arg(long)]
    pub max_generations: Option<usize>,
    /// Stop after this many generations without improvement.
    #[arg(long)]
    pub stall_generations: Option<usize>,
    /// Re-evaluate duplicate genomes instead of reusing cached fitness.
    #[arg(long)]
    pub no_cache: bool,
    /// Also enumerate every constellation and compare.
    #[arg(long)]
    pub exhaustive_check: bool,
    /// Continue from a checkpoint file.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Constellation file (e.g. a `best_constellation.csv`).
    #[arg(long)]
    pub constellation: Option<PathBuf>,
    /// Row group in the constellation file (`stp` column).
    #[arg(long)]
    pub group: Option<String>,
    /// Validation catalog (default: bundled pooled catalog).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Evaluate a family-stratified subsample of this many targets.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Weight the subsample's families by this catalog's composition.
    #[arg(long)]
    pub strata_from: Option<PathBuf>,
    /// Split DRO statistics at this period, TU.
    #[arg(long)]
    pub dro_split: Option<f64>,
    /// Report DROs as one family.
    #[arg(long)]
    pub no_dro_split: bool,
    /// Histogram bin count.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding a `per_target.csv`.
    #[arg(long)]
    pub results: PathBuf,
    /// Add DRO rows split at this period.
    #[arg(long)]
    pub dro_split: Option<f64>,
    /// Histogram bin count.
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

struct Context_ {
    cfg: RunConfig,
    out: PathBuf,
}

fn load_config(cli: &Cli) -> Result<Context_> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.run.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.run.output = o.clone();
    }
    if let Some(n) = cfg.run.threads {
        if n == 0 {
            bail!(ConfigError::new("--threads must be at least 1"));
        }
        // A pool may already exist when called in-process more than once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cfg.run.output.clone();
    Ok(Context_ { cfg, out })
}

fn apply_filter(cfg: &mut RunConfig, f: &FilterArgs) {
    if let Some(v) = f.si_max {
        cfg.run.si_max = v;
    }
    if let Some(v) = f.period_max {
        cfg.run.period_max = v;
    }
}

fn apply_scenario(cfg: &mut RunConfig, s: &ScenarioArgs) {
    if let Some(p) = s.procedure {
        cfg.run.procedure = p;
    }
    if let Some(f) = s.fidelity {
        cfg.sensor.fidelity = f;
    }
    if let Some(a) = s.sigma_angle {
        cfg.sensor.sigma_angle_arcsec = Some(a);
    }
    if let Some(v) = s.init_error {
        cfg.run.init_error_scale = v;
    }
    if let Some(v) = s.sigma_dyn {
        cfg.run.sigma_dyn = v;
    }
    if let Some(v) = s.horizon {
        cfg.run.horizon_tu = v;
    }
}

fn filter_criteria(cfg: &RunConfig) -> FilterCriteria {
    FilterCriteria { si_max: cfg.run.si_max, period_max: cfg.run.period_max, include_transfers: false }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn file_stem_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    started_unix_s: u64,
    elapsed_s: f64,
    threads: usize,
}

/// Timestamps live only in this sidecar so the result files stay reproducible.
fn write_meta(dir: &Path, command: &str, started: SystemTime, clock: Instant) -> Result<()> {
    let meta = RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_s: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_s: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    write_json(&dir.join("run_meta.json"), &meta)
}

fn execute(cli: Cli) -> Result<()> {
    let mut ctx = load_config(&cli)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let name = match &cli.command {
        Command::Catalog(a) => {
            apply_filter(&mut ctx.cfg, &a.filter);
            if let Some(n) = a.slots_per_orbit {
                ctx.cfg.run.slots_per_orbit = n;
            }
            ctx.cfg.validate()?;
            cmd_catalog(&ctx, a)?;
            "catalog"
        }
        Command::Track(a) => {
            apply_scenario(&mut ctx.cfg, &a.scenario);
            ctx.cfg.validate()?;
            cmd_track(&ctx, a)?;
            "track"
        }
        Command::Optimize(a) => {
            apply_filter(&mut ctx.cfg, &a.filter);
            apply_scenario(&mut ctx.cfg, &a.scenario);
            if let Some(n) = a.slots_per_orbit {
                ctx.cfg.run.slots_per_orbit = n;
            }
            if let Some(n) = a.n {
                ctx.cfg.run.n_observers = n;
            }
            if let Some(p) = a.population {
                ctx.cfg.ga.population = p;
            }
            if let Some(g) = a.max_generations {
                ctx.cfg.ga.max_generations = Some(g);
            }
            if let Some(g) = a.stall_generations {
                ctx.cfg.ga.stall_generations = g;
            }
            if a.no_cache {
                ctx.cfg.ga.use_cache = false;
            }
            ctx.cfg.validate()?;
            cmd_optimize(&ctx, a)?;
            "optimize"
        }
        Command::Validate(a) => {
            apply_scenario(&mut ctx.cfg, &a.scenario);
            if a.no_dro_split {
                ctx.cfg.run.dro_split = None;
            } else if let Some(s) = a.dro_split {
                ctx.cfg.run.dro_split = Some(s);
            }
            ctx.cfg.validate()?;
            cmd_validate(&ctx, a)?;
            "validate"
        }
        Command::Report(a) => {
            cmd_report(&ctx, a)?;
            "report"
        }
    };
    let dir = match &cli.command {
        Command::Report(a) if cli.out.is_none() => a.results.clone(),
        _ => ctx.out.clone(),
    };
    write_meta(&dir, name, started, clock)
}

#[derive(Serialize)]
struct VerifyRow {
    id: String,
    closure: Option<f64>,
    min_earth_distance: Option<f64>,
    min_moon_distance: Option<f64>,
    outcome: String,
}

fn cmd_catalog(ctx: &Context_, a: &CatalogArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let path = a
        .catalog
        .clone()
        .or_else(|| cfg.run.validation_catalog.clone())
        .unwrap_or_else(|| fixture("validation_pooled.csv"));
    let records = read_catalog(&path)?;
    let prop = cfg.propagator();
    ensure_dir(&ctx.out)?;
    let mut periodic = filter_catalog(&records, &filter_criteria(cfg));
    let mut transfers: Vec<OrbitRecord> = records.iter().filter(|r| r.family.is_transfer()).cloned().collect();
    if a.verify {
        let crit = VerifyCriteria { closure_tol: a.closure_tol };
        let mut w = csv::Writer::from_path(ctx.out.join("verify.csv"))?;
        w.write_record(["id", "closure", "min_earth_distance_du", "min_moon_distance_du", "outcome"])?;
        let mut kept = Vec::new();
        for r in periodic {
            let rep = verify_record(&r, &prop, &crit);
            let row = VerifyRow {
                id: rep.id.clone(),
                closure: rep.closure,
                min_earth_distance: rep.min_earth_distance,
                min_moon_distance: rep.min_moon_distance,
                outcome: format!("{:?}", rep.outcome),
            };
            let o = |v: Option<f64>| v.map(sig9).unwrap_or_default();
            w.write_record([row.id, o(row.closure), o(row.min_earth_distance), o(row.min_moon_distance), row.outcome])?;
            if rep.outcome == VerifyOutcome::Accepted {
                kept.push(r);
            } else {
                eprintln!("excluded {}: {:?}", rep.id, rep.outcome);
            }
        }
        w.flush()?;
        periodic = kept;
    }
    if let Some(id) = &a.transfers_from {
        let halo = records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| ConfigError::new(format!("no record '{id}' in {}", path.display())))?;
        let tcfg = TransferConfig { count: a.transfer_count, ..Default::default() };
        let generated = generate_transfers(halo, &tcfg, &prop)?;
        write_catalog_file(&ctx.out.join("transfers.csv"), &generated)?;
        transfers.extend(generated);
    }
    let mut kept = periodic.clone();
    kept.extend(transfers);
    write_catalog_file(&ctx.out.join("filtered_catalog.csv"), &kept)?;
    let slots = generate_slots(&periodic, cfg.run.slots_per_orbit, &prop)?;
    write_slots(&ctx.out.join("slots.csv"), &slots)?;
    let counts = family_counts(&kept);
    let mut w = csv::Writer::from_path(ctx.out.join("family_counts.csv"))?;
    w.write_record(["family", "orbits"])?;
    println!("{:<8} {:>7}", "family", "orbits");
    for (f, n) in &counts {
        w.write_record([f.label(), &n.to_string()])?;
        println!("{:<8} {:>7}", f.label(), n);
    }
    w.flush()?;
    println!("{} orbits kept of {}, {} slots", kept.len(), records.len(), slots.len());
    Ok(())
}

/// Observer states and the procedure implied by a constellation group.
fn constellation_observers(
    cfg: &mut RunConfig,
    path: &Path,
    group: Option<&str>,
    procedure_given: bool,
) -> Result<Vec<StateVector>> {
    let rows = load_constellation(path, group)?;
    if !procedure_given {
        if let Some(p) = group.and_then(|g| g.parse::<Procedure>().ok()) {
            cfg.run.procedure = p;
        }
    }
    Ok(rows.iter().map(|r| r.record.ic).collect())
}

fn cmd_track(ctx: &Context_, a: &TrackArgs) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    let tpath = a.targets.clone().unwrap_or_else(|| fixture("best_worst_lofi.csv"));
    let rows = read_catalog_rows(&tpath)?;
    let row = match &a.target_id {
        Some(id) => rows
            .iter()
            .find(|r| &r.record.id == id)
            .ok_or_else(|| ConfigError::new(format!("no target '{id}' in {}", tpath.display())))?,
        None if rows.len() == 1 => &rows[0],
        None => bail!(ConfigError::new(format!("{} has several targets; pass --target-id", tpath.display()))),
    };
    let cpath = a
        .constellation
        .clone()
        .or_else(|| cfg.run.constellation.clone())
        .unwrap_or_else(|| fixture("baseline_nrho.csv"));
    let group = a.group.clone().or_else(|| cfg.run.constellation_group.clone());
    let observers = constellation_observers(&mut cfg, &cpath, group.as_deref(), a.scenario.procedure.is_some())?;
    let setup = cfg.track_setup(observers.len())?;
    let prop = cfg.propagator();
    let target = if a.random_phase && row.record.period.is_some() {
        TargetSet::sample(TargetSetKind::Validation, std::slice::from_ref(&row.record), cfg.run.seed, &prop)?
            .members
            .remove(0)
    } else {
        Target { record: row.record.clone(), phase_fraction: 0.0, state: row.record.ic }
    };
    let result = evaluate_target(&setup, &observers, &target, cfg.run.seed);
    ensure_dir(&ctx.out)?;
    let stem = file_stem_safe(&target.record.id);
    write_track(&ctx.out.join(format!("track_{stem}.csv")), &result.track)?;
    write_sigma(&ctx.out.join(format!("sigma_{stem}.csv")), &three_sigma_series(&result.track), &cfg.constants())?;
    write_results(&ctx.out.join("per_target.csv"), std::slice::from_ref(&result))?;
    println!(
        "target {} ({}): rmse_pos {} km, rmse_vec {} km, rmse_vel {} km/s, visibility {}",
        result.target_id,
        result.family,
        sig9(result.rmse_pos_km),
        sig9(result.rmse_vec_pos_km),
        sig9(result.rmse_vel_kms),
        sig9(result.visibility_fraction)
    );
    if let Some(e) = &result.track.error {
        return Err(anyhow::Error::from(e.clone()).context(format!("track of {} failed", result.target_id)));
    }
    Ok(())
}

#[derive(Serialize)]
struct ExhaustiveSummary {
    evaluations: usize,
    best: Vec<SlotRef>,
    best_fitness_km: f64,
    ga_relative_gap: f64,
    within_5_percent: bool,
}

#[derive(Serialize)]
struct OptimizeSummary {
    procedure: &'static str,
    n_observers: usize,
    n_slots: usize,
    n_targets: usize,
    seed: u64,
    best: Vec<SlotRef>,
    best_fitness_km: f64,
    generations: usize,
    evaluations: u64,
    cache_hits: u64,
    stop: StopReason,
    exhaustive: Option<ExhaustiveSummary>,
}

fn candidate_slots(cfg: &RunConfig, a: &OptimizeArgs) -> Result<(Vec<OrbitalSlot>, Vec<OrbitRecord>)> {
    let prop = cfg.propagator();
    if let Some(p) = a.slots.clone().or_else(|| cfg.run.slots.clone()) {
        return Ok((read_slots(&p)?, Vec::new()));
    }
    let path = a.observer_catalog.clone().unwrap_or_else(|| cfg.observer_catalog_path());
    let records = read_catalog(&path)?;
    let slots = slots_from_catalog(&records, &filter_criteria(cfg), cfg.run.slots_per_orbit, &prop)?;
    Ok((slots, records))
}

fn constellation_rows(
    g: &[usize],
    slots: &[OrbitalSlot],
    catalog: &[OrbitRecord],
    procedure: Procedure,
) -> Vec<CatalogRow> {
    g.iter()
        .map(|&i| {
            let s = &slots[i];
            let si = catalog.iter().find(|r| r.id == s.orbit_id).and_then(|r| r.stability_index);
            let record = OrbitRecord {
                id: s.orbit_id.clone(),
                family: s.family,
                ic: s.epoch_state,
                period: Some(s.period),
                stability_index: si,
            };
            let tags = [
                ("stp".to_string(), procedure.token().to_string()),
                ("slot".to_string(), i.to_string()),
                ("phase_index".to_string(), s.phase_index.to_string()),
            ]
            .into_iter()
            .collect();
            CatalogRow { record, tags }
        })
        .collect()
}

fn cmd_optimize(ctx: &Context_, a: &OptimizeArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let prop = cfg.propagator();
    let tpath = a.targets.clone().unwrap_or_else(|| cfg.targets_path());
    let target_records = read_catalog(&tpath)?;
    let targets = TargetSet::sample(TargetSetKind::Optimization, &target_records, cfg.run.seed, &prop)?.members;
    let (slots, observer_catalog) = candidate_slots(cfg, a)?;
    let n = cfg.run.n_observers;
    let setup = cfg.track_setup(n)?;
    let fitness = SlotFitness {
        eval: Evaluator { setup: &setup, targets: &targets, seed: cfg.run.seed, penalty: cfg.run.failure_penalty_km },
        slots: &slots,
    };
    let ga = cfg.ga_config();
    let fingerprint = {
        let mut c = cfg.clone();
        c.run.output = PathBuf::new();
        c.run.threads = None;
        let text = format!("{}|{:?}|{:?}", toml::to_string(&c)?, slots, targets);
        format!("{:016x}", hash_str(&text))
    };
    ensure_dir(&ctx.out)?;
    let ckpt_dir = ctx.out.join("checkpoints");
    ensure_dir(&ckpt_dir)?;
    let mut run = match &a.resume {
        Some(p) => Checkpoint::read(p)?.resume(&fingerprint)?,
        None => {
            let r = GaRun::new(slots.len(), n, ga, &fitness)?;
            Checkpoint::new(&r, &slots, &fingerprint).write(&ckpt_dir)?;
            r
        }
    };
    while !run.step(&fitness) {
        Checkpoint::new(&run, &slots, &fingerprint).write(&ckpt_dir)?;
    }
    Checkpoint::new(&run, &slots, &fingerprint).write(&ckpt_dir)?;
    let outcome = run.outcome();
    let mut h = csv::Writer::from_path(ctx.out.join("history.csv"))?;
    h.write_record(["generation", "best_fitness_km"])?;
    for (g, f) in outcome.history.iter().enumerate() {
        h.write_record([g.to_string(), sig9(*f)])?;
    }
    h.flush()?;
    write_slots(&ctx.out.join("slots.csv"), &slots)?;
    let rows = constellation_rows(outcome.best.slots(), &slots, &observer_catalog, cfg.run.procedure);
    let f = std::fs::File::create(ctx.out.join("best_constellation.csv"))?;
    write_catalog(f, &rows, &["stp", "slot", "phase_index"])?;
    let best_obs = fitness.observers(&outcome.best);
    write_results(&ctx.out.join("per_target.csv"), &fitness.eval.results(&best_obs))?;
    let exhaustive = if a.exhaustive_check {
        let ex = exhaustive_search(slots.len(), n, &fitness, EXHAUSTIVE_CAP)?;
        let mut w = csv::Writer::from_path(ctx.out.join("exhaustive.csv"))?;
        w.write_record(["slots", "fitness_km"])?;
        for (g, v) in &ex.table {
            let ids: Vec<String> = g.slots().iter().map(|i| i.to_string()).collect();
            w.write_record([ids.join(" "), sig9(*v)])?;
        }
        w.flush()?;
        let gap = (outcome.best_fitness - ex.best_fitness) / ex.best_fitness;
        println!(
            "exhaustive best {} km over {} constellations; GA gap {}",
            sig9(ex.best_fitness),
            ex.table.len(),
            sig9(gap)
        );
        Some(ExhaustiveSummary {
            evaluations: ex.table.len(),
            best: slot_refs(&ex.best, &slots),
            best_fitness_km: ex.best_fitness,
            ga_relative_gap: gap,
            within_5_percent: gap <= 0.05,
        })
    } else {
        None
    };
    let summary = OptimizeSummary {
        procedure: cfg.run.procedure.token(),
        n_observers: n,
        n_slots: slots.len(),
        n_targets: targets.len(),
        seed: cfg.run.seed,
        best: slot_refs(&outcome.best, &slots),
        best_fitness_km: outcome.best_fitness,
        generations: outcome.generations,
        evaluations: outcome.evaluations,
        cache_hits: outcome.cache_hits,
        stop: outcome.stop,
        exhaustive,
    };
    write_json(&ctx.out.join("result.json"), &summary)?;
    println!(
        "best {} km after {} generations ({:?}); slots {:?}",
        sig9(outcome.best_fitness),
        outcome.generations,
        outcome.stop,
        outcome.best.slots()
    );
    Ok(())
}

fn cmd_validate(ctx: &Context_, a: &ValidateArgs) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    let cpath = a
        .constellation
        .clone()
        .or_else(|| cfg.run.constellation.clone())
        .ok_or_else(|| ConfigError::new("validate needs --constellation"))?;
    let group = a.group.clone().or_else(|| cfg.run.constellation_group.clone());
    let observers = constellation_observers(&mut cfg, &cpath, group.as_deref(), a.scenario.procedure.is_some())?;
    let setup = cfg.track_setup(observers.len())?;
    let prop = cfg.propagator();
    let vpath = a.catalog.clone().unwrap_or_else(|| cfg.validation_catalog_path());
    let records = read_catalog(&vpath)?;
    let targets = match a.subsample {
        Some(n) => {
            let strata = match &a.strata_from {
                Some(p) => Some(family_counts(&read_catalog(p)?)),
                None => None,
            };
            stratified_targets(&records, strata.as_ref(), n, cfg.run.seed, &prop)?
        }
        None => TargetSet::sample(TargetSetKind::Validation, &records, cfg.run.seed, &prop)?.members,
    };
    let eval = Evaluator { setup: &setup, targets: &targets, seed: cfg.run.seed, penalty: cfg.run.failure_penalty_km };
    let results = eval.results(&observers);
    ensure_dir(&ctx.out)?;
    write_results(&ctx.out.join("per_target.csv"), &results)?;
    write_sigma_extremes(&ctx.out, &results, &targets, &eval, &observers)?;
    let rep = report(results, cfg.run.dro_split, a.bins)?;
    write_report(&ctx.out, &rep)?;
    println!("{} targets evaluated, {} failed", rep.results.len(), rep.skipped);
    for s in &rep.family_stats {
        println!(
            "{:<16} n={:<5} median {} km  mean {} km  visibility {}",
            s.family,
            s.rmse_pos_km.count,
            sig9(s.rmse_pos_km.median),
            sig9(s.rmse_pos_km.mean),
            sig9(s.mean_visibility)
        );
    }
    Ok(())
}

/// Sigma series for the best and worst tracked targets.
fn write_sigma_extremes(
    dir: &Path,
    results: &[TrackResult],
    targets: &[Target],
    eval: &Evaluator<'_>,
    observers: &[StateVector],
) -> Result<()> {
    let ok: Vec<(usize, &TrackResult)> = results.iter().enumerate().filter(|(_, r)| !r.failed()).collect();
    let best = ok.iter().min_by(|a, b| a.1.rmse_pos_km.total_cmp(&b.1.rmse_pos_km));
    let worst = ok.iter().max_by(|a, b| a.1.rmse_pos_km.total_cmp(&b.1.rmse_pos_km));
    for (i, _) in best.into_iter().chain(worst) {
        let full = evaluate_target(eval.setup, observers, &targets[*i], eval.seed);
        let path = dir.join(format!("sigma_{}.csv", file_stem_safe(&full.target_id)));
        write_sigma(&path, &three_sigma_series(&full.track), eval.setup.propagator.constants())?;
    }
    Ok(())
}

fn cmd_report(ctx: &Context_, a: &ReportArgs) -> Result<()> {
    let path = a.results.join("per_target.csv");
    if !path.exists() {
        bail!(ConfigError::new(format!("{}: no per_target.csv found", a.results.display())));
    }
    let results = read_results(&path)?;
    if results.is_empty() {
        bail!(ConfigError::new(format!("{} holds no results", path.display())));
    }
    let out = if ctx.out == ctx.cfg.run.output && ctx.out == RunConfig::default().run.output {
        a.results.clone()
    } else {
        ctx.out.clone()
    };
    ensure_dir(&out)?;
    let rep = report(results, a.dro_split, a.bins)?;
    write_report(&out, &rep)?;
    println!("{} family entries written to {}", rep.family_stats.len(), out.display());
    Ok(())
}
