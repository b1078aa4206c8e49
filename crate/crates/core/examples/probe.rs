//! Diagnostic sweep: waypoint completion rates per preset and rough stage
//! timings at desk scale. Handy when retuning guidance gains or budgets.
//!
//! Run with `cargo run --release -p vesseltwin --example probe`.

use std::time::Instant;

use vesseltwin::pipeline::{
    default_waypoint_spec, repro_config, run_simulate, Experiment, ScaleProfile,
};
use vesseltwin::scenario::{run_scenario_with_diagnostics, Maneuver, ScenarioSpec};
use vesseltwin::seed::derive_seed;

fn completion_sweep() {
    println!("== waypoint completion (undisturbed, desk duration) ==");
    for vessel in ["mariner", "remus100", "nps_auv", "otter"] {
        let params = vesseltwin::vessel::make_preset(vessel).unwrap();
        let geometry = default_waypoint_spec(&params).unwrap();
        let env = vesseltwin::vessel::EnvCondition {
            current_speed: if params.supports_current { 0.5 } else { 0.0 },
            current_direction: 0.8,
        };
        let mut completed = 0;
        let mut reached = 0;
        let mut total = 0;
        for i in 0..12u64 {
            let spec = ScenarioSpec {
                vessel: vessel.into(),
                maneuver: Maneuver::Waypoint(geometry.clone()),
                disturbance: None,
                environment: env,
                seed: derive_seed(7, "probe", i),
                geometry_seed: None,
                duration_s: 420.0,
                tail_margin_s: 30.0,
                actuator_mode: Default::default(),
            };
            let (_, diag) = run_scenario_with_diagnostics(&spec).unwrap();
            completed += usize::from(diag.path_completed());
            reached += diag.waypoints_reached;
            total += diag.n_waypoints;
        }
        println!("{vessel}: {completed}/12 complete, {reached}/{total} waypoints reached");
    }
}

fn timing_probe(experiment: Experiment, vessel: &str) {
    println!("== stage timings (desk, {} profile on {vessel}) ==", experiment.label());
    let dir = tempfile_dir();
    let cfg = repro_config(experiment, vessel, ScaleProfile::Desk, dir.clone(), 7);
    let t = Instant::now();
    run_simulate(&cfg).unwrap();
    println!("simulate: {:.1}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    vesseltwin::pipeline::run_train(&cfg).unwrap();
    println!("train: {:.1}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    for v in vesseltwin::twin::Variant::ALL {
        vesseltwin::pipeline::run_detect(&cfg, v).unwrap();
    }
    println!("detect(all variants): {:.1}s", t.elapsed().as_secs_f64());
    let report =
        vesseltwin::pipeline::run_evaluate(&cfg, &vesseltwin::twin::Variant::ALL).unwrap();
    for g in &report.groups {
        println!(
            "{} {} {}: AUROC {:.4} TNR {:.4} (IND {} / OOD {})",
            g.variant, g.key.kind, g.key.magnitude, g.auroc, g.tnr_at_tpr95, g.n_ind, g.n_ood
        );
    }
    for c in &report.correlations {
        println!(
            "{} {}: spearman {:?} over {} points",
            c.variant, c.kind, c.spearman, c.n_points
        );
    }
    std::fs::remove_dir_all(&dir).ok();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("vesseltwin-probe-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn diagnose() {
    use vesseltwin::dataset::{read_csv, read_split, schema_for, Label};
    use vesseltwin::twin::{detect, load_checkpoint};

    let dir = tempfile_dir();
    let cfg = repro_config(Experiment::Sensor, "mariner", ScaleProfile::Desk, dir.clone(), 7);
    run_simulate(&cfg).unwrap();
    let t = Instant::now();
    vesseltwin::pipeline::run_train(&cfg).unwrap();
    println!("train: {:.1}s", t.elapsed().as_secs_f64());

    // Loss curve tail.
    let log = std::fs::read_to_string(cfg.out_dir.join("training_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    println!("-- loss head/tail --");
    for l in lines.iter().skip(1).take(3) { println!("{l}"); }
    for l in lines.iter().rev().take(3).rev() { println!("{l}"); }
    for l in lines.iter().filter(|l| l.starts_with("train,")).take(3) { println!("{l}"); }
    for l in lines.iter().filter(|l| l.starts_with("train,")).rev().take(3) { println!("{l}"); }

    let twin = load_checkpoint(&cfg.checkpoint_path()).unwrap();
    println!("threshold: mean {:.5} std {:.5} T {:.5}", twin.threshold.mean, twin.threshold.std, twin.threshold.t_ood);

    let split = read_split(&cfg.manifest_path()).unwrap();
    let params = vesseltwin::vessel::make_preset("mariner").unwrap();
    let schema = schema_for(&params);
    // One sigma=2 test path: locate score mass vs window and yaw wraps.
    let entry = split.test.iter().find(|e| e.magnitude == Some(2.0)).unwrap();
    let mut traj = read_csv(&cfg.out_dir.join(&entry.csv), &schema).unwrap();
    traj.disturbance_interval = entry.disturbance_interval;
    let (s, e) = entry.disturbance_interval.unwrap();
    println!("window [{s}, {e})");
    let verdicts = detect(&twin, &traj, Default::default()).unwrap();
    // Yaw wrap rows.
    let yaw_col = 3;
    let mut wraps = Vec::new();
    for r in 1..traj.features.nrows() {
        if (traj.features[[r, yaw_col]] - traj.features[[r - 1, yaw_col]]).abs() > 3.0 {
            wraps.push(traj.times[r]);
        }
    }
    println!("yaw wraps at {wraps:?}");
    let mut top: Vec<(f64, f64, Label)> = verdicts.iter().map(|v| (v.max_error, v.anchor_time, v.label)).collect();
    top.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    println!("-- top 15 anchors by score --");
    for (score, t, label) in top.iter().take(15) {
        println!("t {t} score {score:.4} label {label:?}");
    }
    let ood: Vec<f64> = verdicts.iter().filter(|v| v.label == Label::Ood).map(|v| v.max_error).collect();
    let ind: Vec<f64> = verdicts.iter().filter(|v| v.label == Label::Ind).map(|v| v.max_error).collect();
    let med = |mut v: Vec<f64>| { v.sort_by(|a,b| a.partial_cmp(b).unwrap()); v[v.len()/2] };
    println!("median OOD {:.4} median IND {:.4}", med(ood), med(ind));
    std::fs::remove_dir_all(&dir).ok();
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("current");
    match mode {
        "completion" => completion_sweep(),
        "diagnose" => diagnose(),
        "sensor" => timing_probe(Experiment::Sensor, args.get(2).map(String::as_str).unwrap_or("mariner")),
        "actuator" => timing_probe(Experiment::Actuator, "mariner"),
        _ => timing_probe(Experiment::Current, "remus100"),
    }
}
