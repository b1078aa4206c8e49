//! Maneuver controllers, waypoint path generation, disturbance injection, and
//! the deterministic scenario runner.
//!
//! A [`ScenarioSpec`] plus its seed fully determines a run: waypoint layout,
//! disturbance window placement, sensor-noise draws, and the recorded
//! measurement jitter each come from independent streams derived from the
//! seed, so a disturbed run is bitwise identical to its undisturbed twin up to
//! the window start.
//!
//! Simulation integrates at a 0.01 s substep and records one row per second.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{schema_for, LabeledTrajectory};
use crate::error::{Error, Result};
use crate::seed::stream_rng;
use crate::vessel::{
    make_preset, saturate, step, twin_thrust_split, wrap_angle, ControlInput, EnvCondition,
    Propulsion, PropulsionLimits, VesselParams, VesselState,
};

/// Recording period. Rows are sampled once per second.
pub const SAMPLE_PERIOD_S: f64 = 1.0;
/// Internal integration substep.
pub const SUBSTEP_S: f64 = 0.01;
const SUBSTEPS_PER_SAMPLE: usize = 100;
/// Std-dev of the recorded current-speed measurement jitter, m/s.
const CURRENT_MEASUREMENT_JITTER: f64 = 0.005;

/// Zigzag maneuver: rudder of `rudder_deg` flipping each time the heading
/// deviates `trigger_deg` from the initial course.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZigzagSpec {
    pub rudder_deg: f64,
    pub trigger_deg: f64,
    pub propeller: f64,
}

/// Randomized waypoint path with a radius of acceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSpec {
    pub n_waypoints: usize,
    pub r_switch_m: f64,
    #[serde(default)]
    pub min_distance_m: Option<f64>,
    pub x_range_m: (f64, f64),
    pub y_range_m: (f64, f64),
    #[serde(default)]
    pub z_range_m: Option<(f64, f64)>,
    pub propeller: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Maneuver {
    Zigzag(ZigzagSpec),
    Waypoint(WaypointSpec),
}

/// What gets injected during the disturbance window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// Gaussian noise of the given std-dev added to the position estimate the
    /// guidance loop consumes. Recorded features are untouched; the noise
    /// shows up through corrective control activity.
    SensorNoise { sigma_m: f64 },
    /// Extreme rudder angle that replaces (or is added to) the zigzag angle.
    ActuatorExtreme { rudder_deg: f64 },
    /// Elevated ocean-current speed.
    CurrentSpike { current_speed: f64 },
}

impl DisturbanceKind {
    pub fn label(&self) -> &'static str {
        match self {
            DisturbanceKind::SensorNoise { .. } => "sensor_noise",
            DisturbanceKind::ActuatorExtreme { .. } => "actuator_extreme",
            DisturbanceKind::CurrentSpike { .. } => "current_spike",
        }
    }

    /// Scalar magnitude used for grouping in reports.
    pub fn magnitude(&self) -> f64 {
        match *self {
            DisturbanceKind::SensorNoise { sigma_m } => sigma_m,
            DisturbanceKind::ActuatorExtreme { rudder_deg } => rudder_deg,
            DisturbanceKind::CurrentSpike { current_speed } => current_speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartTime {
    At(f64),
    Random,
}

fn default_disturbance_duration() -> f64 {
    120.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    #[serde(flatten)]
    pub kind: DisturbanceKind,
    pub start: StartTime,
    #[serde(default = "default_disturbance_duration")]
    pub duration_s: f64,
}

/// How an extreme rudder angle combines with the zigzag angle. `Replace` is
/// canonical; `Add` (literal arithmetic addition) is kept for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    #[default]
    Replace,
    Add,
}

fn default_tail_margin() -> f64 {
    60.0
}

/// A reproducible maneuver run, optionally with one disturbance window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub vessel: String,
    pub maneuver: Maneuver,
    #[serde(default)]
    pub disturbance: Option<DisturbanceSpec>,
    pub environment: EnvCondition,
    pub seed: u64,
    /// Separate stream for the waypoint layout so the same geometry can be
    /// reused across disturbance magnitudes. Defaults to `seed`.
    #[serde(default)]
    pub geometry_seed: Option<u64>,
    pub duration_s: f64,
    /// Tail margin kept free after a random window so every windowed sample
    /// has a well-defined label. Set this to the detection horizon.
    #[serde(default = "default_tail_margin")]
    pub tail_margin_s: f64,
    #[serde(default)]
    pub actuator_mode: ActuatorMode,
}

/// Zigzag controller memory: the reference course and current rudder side.
#[derive(Debug, Clone, Copy)]
pub struct ZigzagPhase {
    pub initial_course: f64,
    pub rudder_sign: f64,
}

impl ZigzagPhase {
    pub fn new(initial_course: f64) -> Self {
        ZigzagPhase { initial_course, rudder_sign: 1.0 }
    }
}

/// Rudder command for a zigzag maneuver. The first command is `+magnitude`;
/// the sign flips whenever the heading deviation from the initial course
/// reaches the trigger angle on the side the rudder is currently driving.
pub fn zigzag_controller(
    state: &VesselState,
    trigger_rad: f64,
    magnitude_rad: f64,
    phase: &mut ZigzagPhase,
) -> f64 {
    let deviation = wrap_angle(state.yaw - phase.initial_course);
    if phase.rudder_sign > 0.0 && deviation >= trigger_rad {
        phase.rudder_sign = -1.0;
    } else if phase.rudder_sign < 0.0 && deviation <= -trigger_rad {
        phase.rudder_sign = 1.0;
    }
    phase.rudder_sign * magnitude_rad
}

const WAYPOINT_ATTEMPTS: usize = 10_000;

/// Draw `n_waypoints` uniform points inside the spec ranges, rejecting
/// candidates closer than `min_distance` to their predecessor.
pub fn generate_waypoints(spec: &WaypointSpec, rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 3]>> {
    let mut points: Vec<[f64; 3]> = Vec::with_capacity(spec.n_waypoints);
    for index in 0..spec.n_waypoints {
        let mut accepted = None;
        for _ in 0..WAYPOINT_ATTEMPTS {
            let x = rng.random_range(spec.x_range_m.0..spec.x_range_m.1);
            let y = rng.random_range(spec.y_range_m.0..spec.y_range_m.1);
            let z = match spec.z_range_m {
                Some((lo, hi)) => rng.random_range(lo..hi),
                None => 0.0,
            };
            let candidate = [x, y, z];
            let ok = match (points.last(), spec.min_distance_m) {
                (Some(prev), Some(min_d)) => distance(prev, &candidate) >= min_d,
                _ => true,
            };
            if ok {
                accepted = Some(candidate);
                break;
            }
        }
        match accepted {
            Some(p) => points.push(p),
            None => return Err(Error::WaypointRejection { attempts: WAYPOINT_ATTEMPTS, index }),
        }
    }
    Ok(points)
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn horizontal_distance(pos: &[f64], wp: &[f64; 3]) -> f64 {
    ((wp[0] - pos[0]).powi(2) + (wp[1] - pos[1]).powi(2)).sqrt()
}

/// Line-of-sight guidance toward the active waypoint.
///
/// Advances the index when the (possibly noisy) position estimate enters the
/// radius of acceptance; the terminal waypoint never advances. Returns the
/// heading command, the depth command for 3D paths, and the new index.
pub fn los_guidance(
    position_estimate: &[f64],
    waypoints: &[[f64; 3]],
    active_index: usize,
    r_switch: f64,
) -> (f64, Option<f64>, usize) {
    let mut index = active_index.min(waypoints.len() - 1);
    if horizontal_distance(position_estimate, &waypoints[index]) <= r_switch
        && index + 1 < waypoints.len()
    {
        index += 1;
    }
    let wp = &waypoints[index];
    let heading = (wp[1] - position_estimate[1]).atan2(wp[0] - position_estimate[0]);
    let depth = (position_estimate.len() > 2).then_some(wp[2]);
    (heading, depth, index)
}

/// Proportional heading autopilot with yaw-rate damping.
pub fn heading_autopilot(params: &VesselParams, heading_cmd: f64, state: &VesselState) -> f64 {
    let g = &params.guidance;
    g.heading_kp * wrap_angle(heading_cmd - state.yaw) - g.yaw_damping * state.yaw_rate
}

/// Proportional depth autopilot with pitch damping, commanding the stern plane.
pub fn depth_autopilot(params: &VesselParams, depth_cmd: f64, state: &VesselState) -> f64 {
    let g = &params.guidance;
    g.depth_kp * (depth_cmd - state.z) - g.pitch_damping * state.pitch
}

/// Gaussian position-sensor noise (per axis): `x + sigma * randn`.
pub fn inject_sensor_noise(true_position: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    true_position
        .iter()
        .map(|&x| {
            let draw: f64 = rng.sample(StandardNormal);
            x + sigma * draw
        })
        .collect()
}

fn validate(spec: &ScenarioSpec, params: &VesselParams) -> Result<()> {
    if spec.duration_s <= 0.0 || spec.duration_s.fract() != 0.0 {
        return Err(Error::InvalidSpec(format!(
            "scenario duration must be a positive whole number of seconds, got {}",
            spec.duration_s
        )));
    }
    if spec.tail_margin_s < 0.0 {
        return Err(Error::InvalidSpec("tail margin must be non-negative".into()));
    }
    if spec.environment.current_speed < 0.0 {
        return Err(Error::InvalidSpec("current speed must be non-negative".into()));
    }
    if spec.environment.current_speed > 0.0 && !params.supports_current {
        return Err(Error::IncompatibleScenario(format!(
            "preset {} does not support ocean current",
            params.name
        )));
    }
    match &spec.maneuver {
        Maneuver::Zigzag(z) => {
            if !params.zigzag_capable {
                return Err(Error::IncompatibleScenario(format!(
                    "preset {} does not support zigzag maneuvers",
                    params.name
                )));
            }
            if z.rudder_deg <= 0.0 || z.trigger_deg <= 0.0 {
                return Err(Error::InvalidSpec("zigzag angles must be positive".into()));
            }
        }
        Maneuver::Waypoint(w) => {
            if !params.waypoint_capable {
                return Err(Error::IncompatibleScenario(format!(
                    "preset {} does not support waypoint maneuvers",
                    params.name
                )));
            }
            if w.n_waypoints < 2 {
                return Err(Error::InvalidSpec("need at least 2 waypoints".into()));
            }
            if w.r_switch_m <= 0.0 {
                return Err(Error::InvalidSpec("R_switch must be positive".into()));
            }
            if let Some(d) = w.min_distance_m {
                if d <= 2.0 * w.r_switch_m {
                    return Err(Error::InvalidSpec(format!(
                        "min_distance {d} must exceed 2*R_switch = {}",
                        2.0 * w.r_switch_m
                    )));
                }
            }
            let degenerate = |r: (f64, f64)| r.1 <= r.0;
            if degenerate(w.x_range_m) || degenerate(w.y_range_m) {
                return Err(Error::InvalidSpec("waypoint ranges must be non-degenerate".into()));
            }
            if let Some(zr) = w.z_range_m {
                if degenerate(zr) {
                    return Err(Error::InvalidSpec("z range must be non-degenerate".into()));
                }
            }
            if w.z_range_m.is_some() != params.waypoints_3d {
                return Err(Error::IncompatibleScenario(format!(
                    "preset {} expects {} waypoint paths",
                    params.name,
                    if params.waypoints_3d { "3D" } else { "2D" }
                )));
            }
        }
    }
    if let Some(d) = &spec.disturbance {
        if d.duration_s <= 0.0 || d.duration_s.fract() != 0.0 {
            return Err(Error::InvalidSpec(
                "disturbance duration must be a positive whole number of seconds".into(),
            ));
        }
        match d.kind {
            DisturbanceKind::SensorNoise { sigma_m } => {
                if sigma_m <= 0.0 {
                    return Err(Error::InvalidSpec("sensor noise sigma must be positive".into()));
                }
                if !matches!(spec.maneuver, Maneuver::Waypoint(_)) {
                    return Err(Error::IncompatibleScenario(
                        "sensor_noise applies to waypoint maneuvers only".into(),
                    ));
                }
            }
            DisturbanceKind::ActuatorExtreme { rudder_deg } => {
                if rudder_deg <= 0.0 {
                    return Err(Error::InvalidSpec("extreme rudder angle must be positive".into()));
                }
                if !matches!(spec.maneuver, Maneuver::Zigzag(_)) {
                    return Err(Error::IncompatibleScenario(
                        "actuator_extreme applies to zigzag maneuvers only".into(),
                    ));
                }
            }
            DisturbanceKind::CurrentSpike { current_speed } => {
                if current_speed < 0.0 {
                    return Err(Error::InvalidSpec("spike current must be non-negative".into()));
                }
                if !params.supports_current {
                    return Err(Error::IncompatibleScenario(format!(
                        "current_spike requires ocean-current support, preset {} has none",
                        params.name
                    )));
                }
            }
        }
        match d.start {
            StartTime::At(s) => {
                if s < 0.0 || s + d.duration_s > spec.duration_s {
                    return Err(Error::InvalidSpec(format!(
                        "disturbance window [{s}, {}) does not fit in duration {}",
                        s + d.duration_s,
                        spec.duration_s
                    )));
                }
            }
            StartTime::Random => {
                if spec.duration_s - d.duration_s - spec.tail_margin_s < 0.0 {
                    return Err(Error::InvalidSpec(
                        "duration too short for a random disturbance window plus tail margin"
                            .into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Validate a scenario spec against its preset without running it.
pub fn validate_spec(spec: &ScenarioSpec) -> Result<()> {
    let params = make_preset(&spec.vessel)?;
    validate(spec, &params)
}

fn resolve_interval(spec: &ScenarioSpec) -> Option<(f64, f64)> {
    let d = spec.disturbance.as_ref()?;
    let start = match d.start {
        StartTime::At(s) => s,
        StartTime::Random => {
            let hi = (spec.duration_s - d.duration_s - spec.tail_margin_s).floor() as u64;
            let mut rng = stream_rng(spec.seed, "disturbance-start", 0);
            rng.random_range(0..=hi) as f64
        }
    };
    Some((start, start + d.duration_s))
}

/// Introspection counters from a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioDiagnostics {
    /// Waypoints entered (radius of acceptance reached), terminal included.
    pub waypoints_reached: usize,
    pub n_waypoints: usize,
}

impl ScenarioDiagnostics {
    pub fn path_completed(&self) -> bool {
        self.waypoints_reached == self.n_waypoints
    }
}

/// Run one scenario and return the recorded, labeled trajectory.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<LabeledTrajectory> {
    Ok(run_scenario_with_diagnostics(spec)?.0)
}

/// [`run_scenario`] plus waypoint-progress counters.
pub fn run_scenario_with_diagnostics(
    spec: &ScenarioSpec,
) -> Result<(LabeledTrajectory, ScenarioDiagnostics)> {
    let params = make_preset(&spec.vessel)?;
    validate(spec, &params)?;
    let schema = schema_for(&params);

    let interval = resolve_interval(spec);
    let geometry_seed = spec.geometry_seed.unwrap_or(spec.seed);
    let mut rng_noise = stream_rng(spec.seed, "sensor-noise", 0);
    let mut rng_env = stream_rng(spec.seed, "env-jitter", 0);

    let waypoints = match &spec.maneuver {
        Maneuver::Waypoint(w) => {
            let mut rng_wp = stream_rng(geometry_seed, "waypoints", 0);
            Some(generate_waypoints(w, &mut rng_wp)?)
        }
        Maneuver::Zigzag(_) => None,
    };

    // Initial condition: cruising at the propeller equilibrium. Waypoint runs
    // start at the origin pointing at the first waypoint; zigzag runs start on
    // course zero. 3D runs start mid z-range (zigzag: depth hold at 10 m).
    let cruise = match &spec.maneuver {
        Maneuver::Zigzag(z) => z.propeller,
        Maneuver::Waypoint(w) => w.propeller,
    };
    let mut state = VesselState::at_rest();
    state.surge = params.surge_gain * cruise;
    let mut hold_depth = 0.0;
    match &spec.maneuver {
        Maneuver::Zigzag(_) => {
            if params.pitch_heave.is_some() {
                hold_depth = 10.0;
                state.z = hold_depth;
            }
        }
        Maneuver::Waypoint(w) => {
            let wp0 = waypoints.as_ref().unwrap()[0];
            state.yaw = wp0[1].atan2(wp0[0]);
            if let Some((lo, hi)) = w.z_range_m {
                state.z = 0.5 * (lo + hi);
            }
        }
    }

    let mut zig_phase = ZigzagPhase::new(state.yaw);
    let mut active_index = 0usize;
    let mut hold_course: Option<f64> = None;
    let mut prev_control = ControlInput {
        rudder: 0.0,
        stern_plane: params.pitch_heave.is_some().then_some(0.0),
        port_bow_plane: None,
        starboard_plane: None,
        propulsion: Propulsion::Propeller(cruise),
    };

    let n_rows = spec.duration_s as usize;
    let mut rows: Vec<f64> = Vec::with_capacity(n_rows * schema.feature_count());
    let mut times = Vec::with_capacity(n_rows);

    for tick in 0..n_rows {
        let t = tick as f64;
        let in_window = interval.is_some_and(|(s, e)| t >= s && t < e);

        let mut env_now = spec.environment;
        if in_window {
            if let Some(DisturbanceSpec { kind: DisturbanceKind::CurrentSpike { current_speed }, .. }) =
                spec.disturbance
            {
                env_now.current_speed = current_speed;
            }
        }

        // Controller tick (zero-order hold over the coming second).
        let (rudder_cmd, stern_cmd) = match &spec.maneuver {
            Maneuver::Zigzag(z) => {
                let mut magnitude = z.rudder_deg.to_radians();
                if in_window {
                    if let Some(DisturbanceSpec {
                        kind: DisturbanceKind::ActuatorExtreme { rudder_deg },
                        ..
                    }) = spec.disturbance
                    {
                        magnitude = match spec.actuator_mode {
                            ActuatorMode::Replace => rudder_deg.to_radians(),
                            ActuatorMode::Add => (z.rudder_deg + rudder_deg).to_radians(),
                        };
                    }
                }
                let rudder =
                    zigzag_controller(&state, z.trigger_deg.to_radians(), magnitude, &mut zig_phase);
                let stern = params
                    .pitch_heave
                    .is_some()
                    .then(|| depth_autopilot(&params, hold_depth, &state));
                (rudder, stern)
            }
            Maneuver::Waypoint(w) => {
                let wps = waypoints.as_ref().unwrap();
                let true_pos: Vec<f64> = if w.z_range_m.is_some() {
                    vec![state.x, state.y, state.z]
                } else {
                    vec![state.x, state.y]
                };
                let pos_est = match (in_window, spec.disturbance.as_ref().map(|d| d.kind)) {
                    (true, Some(DisturbanceKind::SensorNoise { sigma_m })) => {
                        inject_sensor_noise(&true_pos, sigma_m, &mut rng_noise)
                    }
                    _ => true_pos,
                };
                let (heading_cmd, depth_cmd, new_index) =
                    los_guidance(&pos_est, wps, active_index, w.r_switch_m);
                active_index = new_index;
                if active_index + 1 == wps.len()
                    && hold_course.is_none()
                    && horizontal_distance(&pos_est, &wps[active_index]) <= w.r_switch_m
                {
                    hold_course = Some(state.yaw);
                }
                let heading_cmd = hold_course.unwrap_or(heading_cmd);
                let rudder = heading_autopilot(&params, heading_cmd, &state);
                let stern = match (depth_cmd, params.pitch_heave.is_some()) {
                    (Some(zc), true) => Some(depth_autopilot(&params, zc, &state)),
                    _ => None,
                };
                (rudder, stern)
            }
        };

        // NPS AUV auxiliary planes assist the stern plane and trim roll.
        let (port_bow, starboard) = if spec.vessel == "nps_auv" {
            let s = stern_cmd.unwrap_or(0.0);
            (Some(-0.4 * s + 0.3 * state.roll), Some(-0.4 * s - 0.3 * state.roll))
        } else {
            (None, None)
        };

        let candidate = ControlInput {
            rudder: rudder_cmd,
            stern_plane: stern_cmd,
            port_bow_plane: port_bow,
            starboard_plane: starboard,
            propulsion: Propulsion::Propeller(cruise),
        };
        let mut control = saturate(&candidate, &prev_control, &params, SAMPLE_PERIOD_S);
        if let PropulsionLimits::TwinThrust { max_per_side } = params.limits.propulsion {
            if let Propulsion::TwinThrust { left, right } =
                twin_thrust_split(control.propulsion.net(), control.rudder, &params)
            {
                control.propulsion = Propulsion::TwinThrust {
                    left: left.clamp(-max_per_side, max_per_side),
                    right: right.clamp(-max_per_side, max_per_side),
                };
            }
        }
        prev_control = control;

        // Recorded current speed carries small measurement jitter so the
        // column is informative rather than constant.
        let mut env_measured = env_now;
        if params.supports_current {
            let draw: f64 = rng_env.sample(StandardNormal);
            env_measured.current_speed += CURRENT_MEASUREMENT_JITTER * draw;
        }

        times.push(t);
        schema.push_row(&mut rows, &params, &state, &control, &env_measured);

        for _ in 0..SUBSTEPS_PER_SAMPLE {
            state = step(&params, &state, &control, &env_now, SUBSTEP_S)?;
        }
    }

    let features = Array2::from_shape_vec((n_rows, schema.feature_count()), rows)
        .expect("row buffer matches schema width");
    let diagnostics = match &waypoints {
        // The index advances when a waypoint is entered, so it counts the
        // waypoints reached; the terminal one only sets hold_course.
        Some(wps) => ScenarioDiagnostics {
            waypoints_reached: if hold_course.is_some() { wps.len() } else { active_index },
            n_waypoints: wps.len(),
        },
        None => ScenarioDiagnostics { waypoints_reached: 0, n_waypoints: 0 },
    };
    Ok((
        LabeledTrajectory { schema, times, features, disturbance_interval: interval },
        diagnostics,
    ))
}
