//! Reduced-order vessel maneuvering dynamics.
//!
//! Five presets (Mariner, Container, Remus 100, NPS AUV, Otter) share one
//! dynamics core: first-order surge toward the propeller equilibrium, a
//! first-order Nomoto yaw response, algebraic sway coupled to yaw rate,
//! second-order roll (4/6 DoF), and first-order pitch with algebraic heave
//! driven by the stern plane (6 DoF). Ocean current enters the position
//! kinematics only, so for fixed controls a current changes nothing but the
//! integrated drift.
//!
//! Coefficients live in `data/presets.json`, shipped with the crate as
//! versioned read-only reference data. The Otter's twin propellers are mapped
//! to an equivalent (net thrust, effective rudder) pair so the same core
//! serves all presets.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Degrees of freedom a preset maneuvers in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dof {
    Three,
    Four,
    Six,
}

impl TryFrom<u8> for Dof {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            3 => Ok(Dof::Three),
            4 => Ok(Dof::Four),
            6 => Ok(Dof::Six),
            other => Err(format!("dof must be 3, 4 or 6, got {other}")),
        }
    }
}

impl From<Dof> for u8 {
    fn from(d: Dof) -> u8 {
        match d {
            Dof::Three => 3,
            Dof::Four => 4,
            Dof::Six => 6,
        }
    }
}

/// Second-order roll response parameters (4 and 6 DoF presets).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RollParams {
    pub natural_frequency_rad_s: f64,
    pub damping_ratio: f64,
    pub rudder_to_roll_gain: f64,
}

/// First-order pitch plus algebraic heave parameters (6 DoF with stern plane).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PitchHeaveParams {
    pub stern_plane_to_pitch_gain: f64,
    pub pitch_time_constant_s: f64,
    pub heave_gain: f64,
}

/// Propulsion actuator range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropulsionLimits {
    Propeller { min: f64, max: f64 },
    TwinThrust { max_per_side: f64 },
}

/// Actuator saturation limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActuatorLimits {
    pub max_rudder_rad: f64,
    pub max_rudder_rate_rad_s: f64,
    /// Stern/bow plane deflection limit; zero when the preset has no planes.
    pub max_plane_rad: f64,
    pub propulsion: PropulsionLimits,
}

/// Autopilot constants, tuned once per preset so undisturbed waypoint runs
/// complete their paths.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GuidanceGains {
    pub heading_kp: f64,
    pub yaw_damping: f64,
    pub depth_kp: f64,
    pub pitch_damping: f64,
}

/// Control channels a preset records, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlChannel {
    Rudder,
    SternPlane,
    PortBowPlane,
    StarboardPlane,
    Propeller,
    LeftPropeller,
    RightPropeller,
}

/// Fixed coefficients for one vessel preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VesselParams {
    pub name: String,
    pub dof: Dof,
    pub length_m: f64,
    pub mass_kg: f64,
    /// Equilibrium surge per unit propeller setting, (m/s)/rpm.
    pub surge_gain: f64,
    pub surge_time_constant_s: f64,
    /// Nomoto steady yaw rate per unit rudder, (rad/s)/rad.
    pub nomoto_gain: f64,
    pub nomoto_time_constant_s: f64,
    /// Algebraic sway per unit yaw rate, m.
    pub sway_coupling_m: f64,
    pub roll: Option<RollParams>,
    pub pitch_heave: Option<PitchHeaveParams>,
    pub limits: ActuatorLimits,
    pub supports_current: bool,
    pub zigzag_capable: bool,
    pub waypoint_capable: bool,
    pub waypoints_3d: bool,
    pub default_waypoints: usize,
    pub default_propeller: f64,
    pub control_channels: Vec<ControlChannel>,
    pub guidance: GuidanceGains,
}

impl VesselParams {
    fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "preset {}: {what} must be strictly positive, got {v}",
                    self.name
                )))
            }
        };
        pos(self.surge_time_constant_s, "surge time constant")?;
        pos(self.nomoto_time_constant_s, "nomoto time constant")?;
        pos(self.limits.max_rudder_rad, "max rudder")?;
        pos(self.limits.max_rudder_rate_rad_s, "max rudder rate")?;
        if let Some(r) = &self.roll {
            pos(r.natural_frequency_rad_s, "roll natural frequency")?;
            pos(r.damping_ratio, "roll damping ratio")?;
        }
        if let Some(p) = &self.pitch_heave {
            pos(p.pitch_time_constant_s, "pitch time constant")?;
        }
        match self.limits.propulsion {
            PropulsionLimits::Propeller { min, max } => {
                if max <= min {
                    return Err(Error::InvalidSpec(format!(
                        "preset {}: propeller range [{min}, {max}] is empty",
                        self.name
                    )));
                }
            }
            PropulsionLimits::TwinThrust { max_per_side } => {
                pos(max_per_side, "thrust per side")?;
            }
        }
        Ok(())
    }
}

/// Full kinematic/dynamic state. Fields outside the preset's DoF stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselState {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    /// Depth, positive down. Used by 6 DoF presets only.
    pub z: f64,
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
    pub surge: f64,
    pub sway: f64,
    pub heave: f64,
    pub yaw_rate: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
}

impl VesselState {
    pub fn at_rest() -> Self {
        VesselState {
            time: 0.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
            yaw: 0.0,
            roll: 0.0,
            pitch: 0.0,
            surge: 0.0,
            sway: 0.0,
            heave: 0.0,
            yaw_rate: 0.0,
            roll_rate: 0.0,
            pitch_rate: 0.0,
        }
    }

    fn all_finite(&self) -> bool {
        [
            self.time,
            self.x,
            self.y,
            self.z,
            self.yaw,
            self.roll,
            self.pitch,
            self.surge,
            self.sway,
            self.heave,
            self.yaw_rate,
            self.roll_rate,
            self.pitch_rate,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Propulsion command: single propeller or a twin thrust pair (Otter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propulsion {
    Propeller(f64),
    TwinThrust { left: f64, right: f64 },
}

impl Propulsion {
    /// Net drive on the surge axis.
    pub fn net(&self) -> f64 {
        match *self {
            Propulsion::Propeller(n) => n,
            Propulsion::TwinThrust { left, right } => 0.5 * (left + right),
        }
    }

    fn all_finite(&self) -> bool {
        match *self {
            Propulsion::Propeller(n) => n.is_finite(),
            Propulsion::TwinThrust { left, right } => left.is_finite() && right.is_finite(),
        }
    }
}

/// Actuator command for one tick. `rudder` is the effective rudder for all
/// presets; for the Otter it is realized through differential thrust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub rudder: f64,
    pub stern_plane: Option<f64>,
    pub port_bow_plane: Option<f64>,
    pub starboard_plane: Option<f64>,
    pub propulsion: Propulsion,
}

impl ControlInput {
    pub fn with_propeller(rudder: f64, propeller: f64) -> Self {
        ControlInput {
            rudder,
            stern_plane: None,
            port_bow_plane: None,
            starboard_plane: None,
            propulsion: Propulsion::Propeller(propeller),
        }
    }

    fn all_finite(&self) -> bool {
        self.rudder.is_finite()
            && self.stern_plane.is_none_or(f64::is_finite)
            && self.port_bow_plane.is_none_or(f64::is_finite)
            && self.starboard_plane.is_none_or(f64::is_finite)
            && self.propulsion.all_finite()
    }
}

/// Ambient ocean current (earth frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCondition {
    pub current_speed: f64,
    pub current_direction: f64,
}

impl EnvCondition {
    pub fn calm() -> Self {
        EnvCondition { current_speed: 0.0, current_direction: 0.0 }
    }
}

#[derive(Deserialize)]
struct PresetFile {
    version: u32,
    presets: Vec<VesselParams>,
}

static PRESETS: OnceLock<Vec<VesselParams>> = OnceLock::new();

fn presets() -> &'static [VesselParams] {
    PRESETS.get_or_init(|| {
        let file: PresetFile = serde_json::from_str(include_str!("../data/presets.json"))
            .expect("bundled presets.json must parse");
        assert_eq!(file.version, 1, "unsupported preset file version");
        for p in &file.presets {
            p.validate().expect("bundled preset must satisfy its invariants");
        }
        file.presets
    })
}

/// Names of all available presets, in file order.
pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name.as_str()).collect()
}

/// Look up a vessel preset by name.
pub fn make_preset(name: &str) -> Result<VesselParams> {
    presets()
        .iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            valid: preset_names().join(", "),
        })
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

/// Clamp a control command to the preset's limits and rate-limit the rudder
/// against the previously applied command.
pub fn saturate(control: &ControlInput, prev: &ControlInput, params: &VesselParams, dt: f64) -> ControlInput {
    let lim = &params.limits;
    let mut rudder = control.rudder.clamp(-lim.max_rudder_rad, lim.max_rudder_rad);
    let max_step = lim.max_rudder_rate_rad_s * dt;
    rudder = rudder.clamp(prev.rudder - max_step, prev.rudder + max_step);

    let clamp_plane = |p: Option<f64>| p.map(|v| v.clamp(-lim.max_plane_rad, lim.max_plane_rad));

    let propulsion = match (control.propulsion, lim.propulsion) {
        (Propulsion::Propeller(n), PropulsionLimits::Propeller { min, max }) => {
            Propulsion::Propeller(n.clamp(min, max))
        }
        (Propulsion::TwinThrust { left, right }, PropulsionLimits::TwinThrust { max_per_side }) => {
            Propulsion::TwinThrust {
                left: left.clamp(-max_per_side, max_per_side),
                right: right.clamp(-max_per_side, max_per_side),
            }
        }
        // Mismatched propulsion kind: clamp magnitude symmetrically.
        (Propulsion::Propeller(n), PropulsionLimits::TwinThrust { max_per_side }) => {
            Propulsion::Propeller(n.clamp(-max_per_side, max_per_side))
        }
        (Propulsion::TwinThrust { left, right }, PropulsionLimits::Propeller { min, max }) => {
            Propulsion::TwinThrust { left: left.clamp(min, max), right: right.clamp(min, max) }
        }
    };

    ControlInput {
        rudder,
        stern_plane: clamp_plane(control.stern_plane),
        port_bow_plane: clamp_plane(control.port_bow_plane),
        starboard_plane: clamp_plane(control.starboard_plane),
        propulsion,
    }
}

/// Map an effective rudder plus net setting to the Otter's thrust pair.
/// Full rudder shifts 80% of the net setting between the two sides.
pub fn twin_thrust_split(net: f64, rudder: f64, params: &VesselParams) -> Propulsion {
    let share = 0.8 * rudder / params.limits.max_rudder_rad;
    Propulsion::TwinThrust { left: net * (1.0 - share), right: net * (1.0 + share) }
}

// ODE state layout used by the integrator.
const N_ODE: usize = 9;
type Ode = [f64; N_ODE];
const IX: usize = 0;
const IY: usize = 1;
const IZ: usize = 2;
const IYAW: usize = 3;
const IROLL: usize = 4;
const IPITCH: usize = 5;
const ISURGE: usize = 6;
const IYAWRATE: usize = 7;
const IROLLRATE: usize = 8;

fn derivs(params: &VesselParams, s: &Ode, control: &ControlInput, env: &EnvCondition) -> Ode {
    let rudder = control.rudder;
    let surge = s[ISURGE];
    let yaw_rate = s[IYAWRATE];
    let sway = params.sway_coupling_m * yaw_rate;

    let d_surge =
        (params.surge_gain * control.propulsion.net() - surge) / params.surge_time_constant_s;
    let d_yaw_rate = (params.nomoto_gain * rudder - yaw_rate) / params.nomoto_time_constant_s;

    let (d_roll, d_roll_rate) = match &params.roll {
        Some(r) => {
            let wn = r.natural_frequency_rad_s;
            let acc = wn * wn * (r.rudder_to_roll_gain * rudder - s[IROLL])
                - 2.0 * r.damping_ratio * wn * s[IROLLRATE];
            (s[IROLLRATE], acc)
        }
        None => (0.0, 0.0),
    };

    let (d_pitch, heave) = match &params.pitch_heave {
        Some(p) => {
            let stern = control.stern_plane.unwrap_or(0.0);
            let d_pitch =
                (p.stern_plane_to_pitch_gain * stern - s[IPITCH]) / p.pitch_time_constant_s;
            (d_pitch, p.heave_gain * s[IPITCH])
        }
        None => (0.0, 0.0),
    };

    let (sy, cy) = s[IYAW].sin_cos();
    let dx = surge * cy - sway * sy + env.current_speed * env.current_direction.cos();
    let dy = surge * sy + sway * cy + env.current_speed * env.current_direction.sin();

    let mut d = [0.0; N_ODE];
    d[IX] = dx;
    d[IY] = dy;
    d[IZ] = heave;
    d[IYAW] = yaw_rate;
    d[IROLL] = d_roll;
    d[IPITCH] = d_pitch;
    d[ISURGE] = d_surge;
    d[IYAWRATE] = d_yaw_rate;
    d[IROLLRATE] = d_roll_rate;
    d
}

/// Advance the state by one fixed RK4 step of size `dt`.
///
/// The control is held constant over the step; callers integrate at a fine
/// substep (0.01 s in the scenario runner) and sample at 1 Hz.
pub fn step(
    params: &VesselParams,
    state: &VesselState,
    control: &ControlInput,
    env: &EnvCondition,
    dt: f64,
) -> Result<VesselState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidSpec(format!("step dt must be positive and finite, got {dt}")));
    }
    if !state.all_finite() {
        return Err(Error::NonFinite("vessel state".into()));
    }
    if !control.all_finite() {
        return Err(Error::NonFinite("control input".into()));
    }
    if !(env.current_speed.is_finite() && env.current_direction.is_finite()) {
        return Err(Error::NonFinite("environment condition".into()));
    }

    let mut s: Ode = [
        state.x,
        state.y,
        state.z,
        state.yaw,
        state.roll,
        state.pitch,
        state.surge,
        state.yaw_rate,
        state.roll_rate,
    ];

    let k1 = derivs(params, &s, control, env);
    let mut s2 = s;
    for i in 0..N_ODE {
        s2[i] = s[i] + 0.5 * dt * k1[i];
    }
    let k2 = derivs(params, &s2, control, env);
    let mut s3 = s;
    for i in 0..N_ODE {
        s3[i] = s[i] + 0.5 * dt * k2[i];
    }
    let k3 = derivs(params, &s3, control, env);
    let mut s4 = s;
    for i in 0..N_ODE {
        s4[i] = s[i] + dt * k3[i];
    }
    let k4 = derivs(params, &s4, control, env);
    for i in 0..N_ODE {
        s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    let pitch_rate = match &params.pitch_heave {
        Some(p) => {
            let stern = control.stern_plane.unwrap_or(0.0);
            (p.stern_plane_to_pitch_gain * stern - s[IPITCH]) / p.pitch_time_constant_s
        }
        None => 0.0,
    };
    let heave = params.pitch_heave.as_ref().map_or(0.0, |p| p.heave_gain * s[IPITCH]);

    let next = VesselState {
        time: state.time + dt,
        x: s[IX],
        y: s[IY],
        z: s[IZ],
        yaw: wrap_angle(s[IYAW]),
        roll: wrap_angle(s[IROLL]),
        pitch: wrap_angle(s[IPITCH]),
        surge: s[ISURGE],
        sway: params.sway_coupling_m * s[IYAWRATE],
        heave,
        yaw_rate: s[IYAWRATE],
        roll_rate: s[IROLLRATE],
        pitch_rate,
    };
    if !next.all_finite() {
        return Err(Error::NonFinite("integrated vessel state".into()));
    }
    Ok(next)
}
