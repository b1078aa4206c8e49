//! Pipeline orchestration: simulate, train, detect, evaluate, and the bundled
//! reproduction profiles. Every stage is a pure function of the run config and
//! its input files; one master seed derives every sub-seed, so reruns produce
//! byte-identical checkpoints, verdicts, and reports.
//!
//! All paths stored inside artifacts are relative to the output directory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::dataset::{
    assemble_split, read_csv, read_sidecar, read_split, schema_for, write_csv, write_sidecar,
    Label, LabelMode, LabeledTrajectory, Sidecar, SplitEntry,
};
use crate::error::{Error, Result};
use crate::eval::{build_report, GroupKey, PathScores, Report, ScoredVerdict, VariantGroupScores};
use crate::scenario::{
    run_scenario, validate_spec, ActuatorMode, DisturbanceKind, DisturbanceSpec, Maneuver,
    ScenarioSpec, StartTime, WaypointSpec, ZigzagSpec,
};
use crate::seed::{derive_seed, stream_rng};
use crate::twin::{
    detect_scores, load_checkpoint, save_checkpoint, train_twin, TrainConfig, Variant,
};
use crate::vessel::{make_preset, EnvCondition, VesselParams};
use rand::Rng;

/// Default ocean-current speed for presets that support it.
pub const DEFAULT_CURRENT_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    Waypoint,
    Zigzag,
}

impl ManeuverKind {
    pub fn label(&self) -> &'static str {
        match self {
            ManeuverKind::Waypoint => "waypoint",
            ManeuverKind::Zigzag => "zigzag",
        }
    }
}

/// Disturbance family; the magnitude list in the config instantiates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceClass {
    SensorNoise,
    ActuatorExtreme,
    CurrentSpike,
}

impl DisturbanceClass {
    pub fn label(&self) -> &'static str {
        match self {
            DisturbanceClass::SensorNoise => "sensor_noise",
            DisturbanceClass::ActuatorExtreme => "actuator_extreme",
            DisturbanceClass::CurrentSpike => "current_spike",
        }
    }

    fn kind_for(&self, magnitude: f64) -> DisturbanceKind {
        match self {
            DisturbanceClass::SensorNoise => DisturbanceKind::SensorNoise { sigma_m: magnitude },
            DisturbanceClass::ActuatorExtreme => {
                DisturbanceKind::ActuatorExtreme { rudder_deg: magnitude }
            }
            DisturbanceClass::CurrentSpike => {
                DisturbanceKind::CurrentSpike { current_speed: magnitude }
            }
        }
    }

    fn magnitude_tag(&self, magnitude: f64) -> String {
        match self {
            DisturbanceClass::SensorNoise => format!("m{magnitude}"),
            DisturbanceClass::ActuatorExtreme => format!("deg{magnitude}"),
            DisturbanceClass::CurrentSpike => format!("vc{magnitude}"),
        }
    }
}

fn default_zigzag_angles() -> Vec<f64> {
    vec![10.0, 15.0, 20.0, 30.0]
}

fn default_train_paths() -> usize {
    20
}

fn default_test_paths() -> usize {
    10
}

fn default_duration() -> f64 {
    420.0
}

fn default_disturbance_duration() -> f64 {
    120.0
}

/// One experiment: vessel, maneuver family, disturbance matrix, split sizes,
/// twin config, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub vessel: String,
    pub maneuver: ManeuverKind,
    /// Waypoint geometry override; the per-preset default is used otherwise.
    #[serde(default)]
    pub waypoint_override: Option<WaypointSpec>,
    /// Normal zigzag rudder angles cycled over training/test paths.
    #[serde(default = "default_zigzag_angles")]
    pub zigzag_angles_deg: Vec<f64>,
    /// Heading-deviation trigger; defaults to the rudder angle (delta/delta).
    #[serde(default)]
    pub zigzag_trigger_deg: Option<f64>,
    pub disturbance: DisturbanceClass,
    pub magnitudes: Vec<f64>,
    #[serde(default = "default_disturbance_duration")]
    pub disturbance_duration_s: f64,
    #[serde(default = "default_train_paths")]
    pub train_paths: usize,
    #[serde(default = "default_test_paths")]
    pub test_paths: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    /// Base current speed; defaults to 0.5 for supporting presets, 0 otherwise.
    #[serde(default)]
    pub base_current_speed: Option<f64>,
    pub train: TrainConfig,
    #[serde(default)]
    pub label_mode: LabelMode,
    #[serde(default)]
    pub actuator_mode: ActuatorMode,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn scenarios_dir(&self) -> PathBuf {
        self.out_dir.join("scenarios")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("checkpoint.json")
    }

    pub fn verdicts_dir(&self, variant: Variant) -> PathBuf {
        self.out_dir.join("verdicts").join(variant.label())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("report")
    }

    fn resolved_current(&self, params: &VesselParams) -> f64 {
        match self.base_current_speed {
            Some(v) => v,
            None if params.supports_current => DEFAULT_CURRENT_SPEED,
            None => 0.0,
        }
    }
}

/// Load a run config from JSON.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn write_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(cfg)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

/// Built-in waypoint geometry per preset, scaled to each vessel's speed so a
/// run covers several legs.
pub fn default_waypoint_spec(params: &VesselParams) -> Result<WaypointSpec> {
    let spec = match params.name.as_str() {
        "mariner" => WaypointSpec {
            n_waypoints: 6,
            r_switch_m: 200.0,
            min_distance_m: Some(600.0),
            x_range_m: (0.0, 2200.0),
            y_range_m: (0.0, 2200.0),
            z_range_m: None,
            propeller: params.default_propeller,
        },
        "remus100" => WaypointSpec {
            n_waypoints: 6,
            r_switch_m: 10.0,
            min_distance_m: Some(80.0),
            x_range_m: (0.0, 300.0),
            y_range_m: (0.0, 300.0),
            z_range_m: Some((5.0, 30.0)),
            propeller: params.default_propeller,
        },
        "nps_auv" => WaypointSpec {
            n_waypoints: 7,
            r_switch_m: 15.0,
            min_distance_m: Some(100.0),
            x_range_m: (0.0, 500.0),
            y_range_m: (0.0, 500.0),
            z_range_m: Some((5.0, 40.0)),
            propeller: params.default_propeller,
        },
        "otter" => WaypointSpec {
            n_waypoints: 7,
            r_switch_m: 12.0,
            min_distance_m: Some(80.0),
            x_range_m: (0.0, 350.0),
            y_range_m: (0.0, 350.0),
            z_range_m: None,
            propeller: params.default_propeller,
        },
        other => {
            return Err(Error::IncompatibleScenario(format!(
                "no default waypoint geometry for preset {other}"
            )))
        }
    };
    Ok(spec)
}

struct ScenarioItem {
    stem: String,
    spec: ScenarioSpec,
    kind: Option<String>,
    magnitude: Option<f64>,
    index: usize,
}

fn propeller_factor(master: u64, stage: &str, index: u64) -> f64 {
    let mut rng = stream_rng(master, stage, index);
    rng.random_range(0.9..1.1)
}

fn env_for(cfg: &RunConfig, params: &VesselParams, stage: &str, index: u64) -> EnvCondition {
    let speed = cfg.resolved_current(params);
    let direction = if params.supports_current {
        let mut rng = stream_rng(cfg.master_seed, stage, index);
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    } else {
        0.0
    };
    EnvCondition { current_speed: speed, current_direction: direction }
}

fn maneuver_for(cfg: &RunConfig, params: &VesselParams, stage_prop: &str, index: u64) -> Result<Maneuver> {
    let factor = propeller_factor(cfg.master_seed, stage_prop, index);
    Ok(match cfg.maneuver {
        ManeuverKind::Waypoint => {
            let mut spec = match &cfg.waypoint_override {
                Some(w) => w.clone(),
                None => default_waypoint_spec(params)?,
            };
            spec.propeller *= factor;
            Maneuver::Waypoint(spec)
        }
        ManeuverKind::Zigzag => {
            let angles = &cfg.zigzag_angles_deg;
            let rudder_deg = angles[(index as usize) % angles.len()];
            Maneuver::Zigzag(ZigzagSpec {
                rudder_deg,
                trigger_deg: cfg.zigzag_trigger_deg.unwrap_or(rudder_deg),
                propeller: params.default_propeller * factor,
            })
        }
    })
}

fn build_scenarios(cfg: &RunConfig) -> Result<Vec<ScenarioItem>> {
    let params = make_preset(&cfg.vessel)?;
    if cfg.magnitudes.is_empty() {
        return Err(Error::InvalidSpec("disturbance magnitude list is empty".into()));
    }
    if cfg.train_paths == 0 || cfg.test_paths == 0 {
        return Err(Error::InvalidSpec("train_paths and test_paths must be positive".into()));
    }
    let mut items = Vec::new();

    for i in 0..cfg.train_paths {
        let spec = ScenarioSpec {
            vessel: cfg.vessel.clone(),
            maneuver: maneuver_for(cfg, &params, "prop-train", i as u64)?,
            disturbance: None,
            environment: env_for(cfg, &params, "env-dir-train", i as u64),
            seed: derive_seed(cfg.master_seed, "sim-train", i as u64),
            geometry_seed: None,
            duration_s: cfg.duration_s,
            tail_margin_s: cfg.train.horizon as f64,
            actuator_mode: cfg.actuator_mode,
        };
        items.push(ScenarioItem {
            stem: format!("train_{i:02}"),
            spec,
            kind: None,
            magnitude: None,
            index: i,
        });
    }

    for &magnitude in &cfg.magnitudes {
        let tag = cfg.disturbance.magnitude_tag(magnitude);
        for j in 0..cfg.test_paths {
            let spec = ScenarioSpec {
                vessel: cfg.vessel.clone(),
                maneuver: maneuver_for(cfg, &params, "prop-test", j as u64)?,
                disturbance: Some(DisturbanceSpec {
                    kind: cfg.disturbance.kind_for(magnitude),
                    start: StartTime::Random,
                    duration_s: cfg.disturbance_duration_s,
                }),
                environment: env_for(cfg, &params, "env-dir-test", j as u64),
                seed: derive_seed(cfg.master_seed, &format!("sim-test-{tag}"), j as u64),
                // Shared geometry across magnitudes so per-path metrics are
                // comparable between noise levels.
                geometry_seed: Some(derive_seed(cfg.master_seed, "test-geometry", j as u64)),
                duration_s: cfg.duration_s,
                tail_margin_s: cfg.train.horizon as f64,
                actuator_mode: cfg.actuator_mode,
            };
            items.push(ScenarioItem {
                stem: format!("test_{tag}_{j:02}"),
                spec,
                kind: Some(cfg.disturbance.label().to_string()),
                magnitude: Some(magnitude),
                index: j,
            });
        }
    }
    Ok(items)
}

/// Generate the scenario matrix, simulate every run, and write the split
/// manifest. Every spec is validated before any simulation starts.
pub fn run_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let items = build_scenarios(cfg)?;
    for item in &items {
        validate_spec(&item.spec)?;
    }

    std::fs::create_dir_all(cfg.scenarios_dir())?;
    write_config(cfg, &cfg.out_dir.join("config.json"))?;

    let results: Vec<(usize, Option<(f64, f64)>)> = items
        .par_iter()
        .enumerate()
        .map(|(idx, item)| -> Result<(usize, Option<(f64, f64)>)> {
            let traj = run_scenario(&item.spec)?;
            let csv_path = cfg.scenarios_dir().join(format!("{}.csv", item.stem));
            write_csv(&traj, &csv_path)?;
            let sidecar = Sidecar {
                spec: item.spec.clone(),
                disturbance_interval: traj.disturbance_interval,
            };
            write_sidecar(&sidecar, &cfg.scenarios_dir().join(format!("{}.json", item.stem)))?;
            Ok((idx, traj.disturbance_interval))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut intervals = vec![None; items.len()];
    for (idx, interval) in results {
        intervals[idx] = interval;
    }

    let entry = |item: &ScenarioItem, interval: Option<(f64, f64)>| SplitEntry {
        csv: format!("scenarios/{}.csv", item.stem),
        sidecar: format!("scenarios/{}.json", item.stem),
        seed: item.spec.seed,
        scenario_index: item.index,
        kind: item.kind.clone(),
        magnitude: item.magnitude,
        disturbance_interval: interval,
    };
    let train: Vec<SplitEntry> = items
        .iter()
        .zip(&intervals)
        .filter(|(i, _)| i.kind.is_none())
        .map(|(i, &iv)| entry(i, iv))
        .collect();
    let test: Vec<SplitEntry> = items
        .iter()
        .zip(&intervals)
        .filter(|(i, _)| i.kind.is_some())
        .map(|(i, &iv)| entry(i, iv))
        .collect();
    let split = assemble_split(&cfg.vessel, train, test)?;
    let manifest = cfg.manifest_path();
    crate::dataset::write_split(&split, &manifest)?;
    Ok(manifest)
}

fn load_entry(cfg: &RunConfig, entry: &SplitEntry) -> Result<LabeledTrajectory> {
    let params = make_preset(&cfg.vessel)?;
    let schema = schema_for(&params);
    let mut traj = read_csv(&cfg.out_dir.join(&entry.csv), &schema)?;
    let sidecar = read_sidecar(&cfg.out_dir.join(&entry.sidecar))?;
    traj.disturbance_interval = sidecar.disturbance_interval;
    Ok(traj)
}

/// Train DTM and DTC from the manifest and write the checkpoint plus the
/// loss-curve log.
pub fn run_train(cfg: &RunConfig) -> Result<PathBuf> {
    let split = read_split(&cfg.manifest_path())?;
    if split.preset != cfg.vessel {
        return Err(Error::Pipeline(format!(
            "manifest preset {} does not match config vessel {}",
            split.preset, cfg.vessel
        )));
    }
    let train_trajs: Vec<LabeledTrajectory> = split
        .train
        .iter()
        .map(|e| load_entry(cfg, e))
        .collect::<Result<Vec<_>>>()?;

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(cfg.master_seed, "train", 0);
    let (checkpoint, log) = train_twin(&cfg.vessel, &train_trajs, &train_cfg)?;

    let path = cfg.checkpoint_path();
    save_checkpoint(&checkpoint, &path)?;

    let mut log_csv = String::from("phase,epoch,loss\n");
    for row in &log {
        log_csv.push_str(&format!("{},{},{}\n", row.phase, row.epoch, row.loss));
    }
    std::fs::write(cfg.out_dir.join("training_log.csv"), log_csv)?;
    Ok(path)
}

/// Verdict-file listing for one detection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictManifest {
    pub variant: String,
    pub entries: Vec<VerdictEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub verdicts: String,
    pub source: String,
    pub kind: String,
    pub magnitude: f64,
    pub path_index: usize,
}

fn write_verdict_csv(rows: &[crate::twin::DetectionRow], path: &Path) -> Result<()> {
    let mut out = String::from("anchor_time_s,score,decision,label\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.anchor_time, r.score, r.decision, r.label));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_label(s: &str, row: usize) -> Result<Label> {
    match s {
        "IND" => Ok(Label::Ind),
        "OOD" => Ok(Label::Ood),
        other => Err(Error::CsvFormat { row, message: format!("unknown label `{other}`") }),
    }
}

fn read_verdict_csv(path: &Path) -> Result<Vec<ScoredVerdict>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "anchor_time_s,score,decision,label" {
                return Err(Error::CsvFormat { row: 1, message: "bad verdict header".into() });
            }
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::CsvFormat { row, message: "expected 4 cells".into() });
        }
        let score: f64 = cells[1]
            .parse()
            .map_err(|_| Error::CsvFormat { row, message: format!("bad score `{}`", cells[1]) })?;
        rows.push(ScoredVerdict {
            score,
            decision: parse_label(cells[2], row)?,
            label: parse_label(cells[3], row)?,
        });
    }
    Ok(rows)
}

/// Score every test trajectory with one method and write per-trajectory
/// verdict CSVs plus a manifest.
pub fn run_detect(cfg: &RunConfig, variant: Variant) -> Result<PathBuf> {
    let twin = load_checkpoint(&cfg.checkpoint_path())?;
    if twin.preset != cfg.vessel {
        return Err(Error::Pipeline(format!(
            "checkpoint preset {} does not match config vessel {}",
            twin.preset, cfg.vessel
        )));
    }
    let split = read_split(&cfg.manifest_path())?;
    let dir = cfg.verdicts_dir(variant);
    std::fs::create_dir_all(&dir)?;

    let entries: Vec<VerdictEntry> = split
        .test
        .par_iter()
        .map(|entry| -> Result<VerdictEntry> {
            let traj = load_entry(cfg, entry)?;
            let rows = detect_scores(&twin, &traj, variant, cfg.label_mode)?;
            let stem = Path::new(&entry.csv)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("trajectory")
                .to_string();
            let rel = format!("verdicts/{}/{stem}.csv", variant.label());
            write_verdict_csv(&rows, &cfg.out_dir.join(&rel))?;
            Ok(VerdictEntry {
                verdicts: rel,
                source: entry.csv.clone(),
                kind: entry.kind.clone().unwrap_or_default(),
                magnitude: entry.magnitude.unwrap_or(f64::NAN),
                path_index: entry.scenario_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = VerdictManifest { variant: variant.label().to_string(), entries };
    let path = dir.join("manifest.json");
    let mut out = serde_json::to_vec_pretty(&manifest)?;
    out.push(b'\n');
    std::fs::write(&path, out)?;
    Ok(path)
}

/// Standalone detection over explicit trajectory CSVs (sidecars must sit next
/// to them). Used by the CLI's file-list mode.
pub fn detect_files(
    checkpoint: &Path,
    files: &[PathBuf],
    variant: Variant,
    out_dir: &Path,
    label_mode: LabelMode,
) -> Result<Vec<PathBuf>> {
    let twin = load_checkpoint(checkpoint)?;
    let params = make_preset(&twin.preset)?;
    let schema = schema_for(&params);
    std::fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    for file in files {
        let mut traj = read_csv(file, &schema)?;
        let sidecar_path = file.with_extension("json");
        if sidecar_path.exists() {
            traj.disturbance_interval = read_sidecar(&sidecar_path)?.disturbance_interval;
        }
        let rows = detect_scores(&twin, &traj, variant, label_mode)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
        let out = out_dir.join(format!("{stem}_{}.csv", variant.label()));
        write_verdict_csv(&rows, &out)?;
        outputs.push(out);
    }
    Ok(outputs)
}

/// Group verdicts by (kind, magnitude) per variant and build the metric
/// report; writes report.json and report.csv.
pub fn run_evaluate(cfg: &RunConfig, variants: &[Variant]) -> Result<Report> {
    let mut cells: Vec<VariantGroupScores> = Vec::new();
    for &variant in variants {
        let manifest_path = cfg.verdicts_dir(variant).join("manifest.json");
        let manifest: VerdictManifest = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
        // Group by magnitude, preserving the config's magnitude order.
        for &magnitude in &cfg.magnitudes {
            let mut paths: Vec<PathScores> = Vec::new();
            for e in manifest.entries.iter().filter(|e| e.magnitude == magnitude) {
                let verdicts = read_verdict_csv(&cfg.out_dir.join(&e.verdicts))?;
                paths.push(PathScores { path: format!("path{:02}", e.path_index), verdicts });
            }
            if paths.is_empty() {
                continue;
            }
            cells.push(VariantGroupScores {
                key: GroupKey {
                    vessel: cfg.vessel.clone(),
                    maneuver: cfg.maneuver.label().to_string(),
                    kind: cfg.disturbance.label().to_string(),
                    magnitude,
                },
                variant: variant.label().to_string(),
                paths,
            });
        }
    }
    let report = build_report(&cells);

    let dir = cfg.report_dir();
    std::fs::create_dir_all(&dir)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("report.csv"), crate::eval::report_to_csv(&report))?;
    Ok(report)
}

/// Simulate, train, detect with every variant, and evaluate.
pub fn run_all(cfg: &RunConfig) -> Result<Report> {
    run_simulate(cfg)?;
    run_train(cfg)?;
    for variant in Variant::ALL {
        run_detect(cfg, variant)?;
    }
    run_evaluate(cfg, &Variant::ALL)
}

// ---------------------------------------------------------------------------
// Reproduction profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sensor,
    Actuator,
    Current,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Sensor => "sensor",
            Experiment::Actuator => "actuator",
            Experiment::Current => "current",
        }
    }

    pub fn default_vessels(&self) -> Vec<&'static str> {
        match self {
            Experiment::Sensor => vec!["mariner", "nps_auv"],
            Experiment::Actuator => vec!["mariner"],
            Experiment::Current => vec!["remus100"],
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensor" => Ok(Experiment::Sensor),
            "actuator" => Ok(Experiment::Actuator),
            "current" => Ok(Experiment::Current),
            other => Err(Error::InvalidSpec(format!(
                "unknown repro profile `{other}`; expected sensor, actuator or current"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleProfile {
    Desk,
    Paper,
}

impl std::str::FromStr for ScaleProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(ScaleProfile::Desk),
            "paper" => Ok(ScaleProfile::Paper),
            other => Err(Error::InvalidSpec(format!(
                "unknown scale profile `{other}`; expected desk or paper"
            ))),
        }
    }
}

/// Build the run config for one (experiment, vessel) pair.
pub fn repro_config(
    experiment: Experiment,
    vessel: &str,
    profile: ScaleProfile,
    out_dir: PathBuf,
    master_seed: u64,
) -> RunConfig {
    let train = match profile {
        ScaleProfile::Desk => TrainConfig::desk(0),
        ScaleProfile::Paper => TrainConfig::paper(0),
    };
    let duration = match profile {
        ScaleProfile::Desk => 420.0,
        ScaleProfile::Paper => 3600.0,
    };
    let (maneuver, disturbance, magnitudes) = match experiment {
        Experiment::Sensor => (
            ManeuverKind::Waypoint,
            DisturbanceClass::SensorNoise,
            vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        ),
        Experiment::Actuator => (
            ManeuverKind::Zigzag,
            DisturbanceClass::ActuatorExtreme,
            vec![40.0, 45.0, 50.0],
        ),
        Experiment::Current => {
            (ManeuverKind::Waypoint, DisturbanceClass::CurrentSpike, vec![0.65])
        }
    };
    RunConfig {
        vessel: vessel.to_string(),
        maneuver,
        waypoint_override: None,
        zigzag_angles_deg: default_zigzag_angles(),
        zigzag_trigger_deg: None,
        disturbance,
        magnitudes,
        disturbance_duration_s: 120.0,
        train_paths: 20,
        test_paths: 10,
        duration_s: duration,
        base_current_speed: None,
        train,
        label_mode: LabelMode::Predictive,
        actuator_mode: ActuatorMode::Replace,
        master_seed,
        out_dir,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VesselOutcome {
    pub vessel: String,
    pub out_dir: PathBuf,
    pub report: Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproSummary {
    pub experiment: String,
    pub outcomes: Vec<VesselOutcome>,
}

impl ReproSummary {
    /// Human-readable per-group summary lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.experiment));
        for o in &self.outcomes {
            for g in &o.report.groups {
                out.push_str(&format!(
                    "{} {} {} {}: {} AUROC {:.4} TNR@TPR95 {:.4} ({} IND / {} OOD)\n",
                    g.key.vessel,
                    g.key.maneuver,
                    g.key.kind,
                    g.key.magnitude,
                    g.variant,
                    g.auroc,
                    g.tnr_at_tpr95,
                    g.n_ind,
                    g.n_ood
                ));
            }
            for c in &o.report.correlations {
                if let Some(r) = c.spearman {
                    out.push_str(&format!(
                        "{} {} {}: {} spearman r_s {:.4} over {} per-path points\n",
                        c.vessel, c.maneuver, c.kind, c.variant, r, c.n_points
                    ));
                }
            }
            for cmp in &o.report.comparisons {
                out.push_str(&format!(
                    "{} {} {}: {} vs {} A12 {:.4} ({}) Cohen's h {:.4}\n",
                    cmp.key.vessel,
                    cmp.key.kind,
                    cmp.key.magnitude,
                    cmp.variant_a,
                    cmp.variant_b,
                    cmp.a12.a12,
                    cmp.a12.magnitude,
                    cmp.cohens_h
                ));
            }
        }
        out
    }
}

/// Run one full experiment profile (optionally restricted to given vessels).
pub fn run_repro(
    experiment: Experiment,
    profile: ScaleProfile,
    out_root: &Path,
    master_seed: u64,
    vessels: Option<&[String]>,
) -> Result<ReproSummary> {
    let defaults = experiment.default_vessels();
    let vessel_list: Vec<String> = match vessels {
        Some(v) if !v.is_empty() => v.to_vec(),
        _ => defaults.iter().map(|s| s.to_string()).collect(),
    };
    let mut outcomes = Vec::new();
    for vessel in &vessel_list {
        let out_dir = out_root.join(vessel);
        std::fs::create_dir_all(&out_dir)?;
        let cfg = repro_config(experiment, vessel, profile, out_dir.clone(), master_seed);
        let report = run_all(&cfg)?;
        outcomes.push(VesselOutcome { vessel: vessel.clone(), out_dir, report });
    }
    Ok(ReproSummary { experiment: experiment.label().to_string(), outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = repro_config(
            Experiment::Sensor,
            "mariner",
            ScaleProfile::Desk,
            PathBuf::from("/tmp/x"),
            42,
        );
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn incompatible_matrix_fails_before_simulation() {
        // Current spike on the mariner (no ocean-current support) must fail
        // during validation, before any file is written.
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = repro_config(
            Experiment::Current,
            "mariner",
            ScaleProfile::Desk,
            dir.path().join("run"),
            1,
        );
        cfg.duration_s = 300.0;
        let err = run_simulate(&cfg).unwrap_err();
        assert!(err.to_string().contains("current"), "{err}");
        assert!(!cfg.out_dir.join("scenarios").exists());
    }

    #[test]
    fn magnitude_tags_are_stable() {
        assert_eq!(DisturbanceClass::SensorNoise.magnitude_tag(2.0), "m2");
        assert_eq!(DisturbanceClass::ActuatorExtreme.magnitude_tag(40.0), "deg40");
        assert_eq!(DisturbanceClass::CurrentSpike.magnitude_tag(0.65), "vc0.65");
    }

    #[test]
    fn experiment_and_profile_parse() {
        assert_eq!("sensor".parse::<Experiment>().unwrap(), Experiment::Sensor);
        assert_eq!("desk".parse::<ScaleProfile>().unwrap(), ScaleProfile::Desk);
        assert!("warp".parse::<Experiment>().is_err());
        assert!("galaxy".parse::<ScaleProfile>().is_err());
    }
}
