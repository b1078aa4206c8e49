//! Trajectory persistence, Min-Max scaling, windowing, and split assembly.
//!
//! The recorded schema per preset mirrors the vessel's degrees of freedom and
//! control channels: motion features (velocities, rates, angles), then the
//! commanded controls, then the measured ocean-current speed for presets that
//! support it. Time is the first CSV column but is never a model feature.
//!
//! CSV cells use Rust's shortest round-trip float formatting, so write/read is
//! lossless and the determinism guarantees survive persistence.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{ScenarioSpec, SAMPLE_PERIOD_S};
use crate::vessel::{ControlChannel, ControlInput, Dof, EnvCondition, Propulsion, VesselParams, VesselState};

/// IND/OOD ground-truth or decision label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Ind,
    Ood,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Ind => "IND",
            Label::Ood => "OOD",
        })
    }
}

/// Ordered column layout for one preset: time, states, controls, environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub preset: String,
    /// All column names including the leading time column.
    pub columns: Vec<String>,
    pub state_dim: usize,
    /// Actuator channels plus environment columns; everything the models treat
    /// as commanded/ambient input.
    pub control_dim: usize,
}

impl ColumnSchema {
    pub fn feature_count(&self) -> usize {
        self.state_dim + self.control_dim
    }

    /// Append one row of features (state, controls, environment) to `buf`.
    pub fn push_row(
        &self,
        buf: &mut Vec<f64>,
        params: &VesselParams,
        state: &VesselState,
        control: &ControlInput,
        env: &EnvCondition,
    ) {
        match params.dof {
            Dof::Three => {
                buf.extend_from_slice(&[state.surge, state.sway, state.yaw_rate, state.yaw]);
            }
            Dof::Four => {
                buf.extend_from_slice(&[
                    state.surge,
                    state.sway,
                    state.yaw_rate,
                    state.yaw,
                    state.roll_rate,
                    state.roll,
                ]);
            }
            Dof::Six => {
                buf.extend_from_slice(&[
                    state.surge,
                    state.sway,
                    state.heave,
                    state.roll_rate,
                    state.pitch_rate,
                    state.yaw_rate,
                    state.roll,
                    state.pitch,
                    state.yaw,
                ]);
            }
        }
        for channel in &params.control_channels {
            buf.push(match channel {
                ControlChannel::Rudder => control.rudder,
                ControlChannel::SternPlane => control.stern_plane.unwrap_or(0.0),
                ControlChannel::PortBowPlane => control.port_bow_plane.unwrap_or(0.0),
                ControlChannel::StarboardPlane => control.starboard_plane.unwrap_or(0.0),
                ControlChannel::Propeller => match control.propulsion {
                    Propulsion::Propeller(n) => n,
                    Propulsion::TwinThrust { .. } => control.propulsion.net(),
                },
                ControlChannel::LeftPropeller => match control.propulsion {
                    Propulsion::TwinThrust { left, .. } => left,
                    Propulsion::Propeller(n) => n,
                },
                ControlChannel::RightPropeller => match control.propulsion {
                    Propulsion::TwinThrust { right, .. } => right,
                    Propulsion::Propeller(n) => n,
                },
            });
        }
        if params.supports_current {
            buf.push(env.current_speed);
        }
    }
}

fn state_column_names(dof: Dof) -> Vec<&'static str> {
    match dof {
        Dof::Three => vec!["surge_velocity_mps", "sway_velocity_mps", "yaw_rate_radps", "yaw_angle_rad"],
        Dof::Four => vec![
            "surge_velocity_mps",
            "sway_velocity_mps",
            "yaw_rate_radps",
            "yaw_angle_rad",
            "roll_rate_radps",
            "roll_angle_rad",
        ],
        Dof::Six => vec![
            "surge_velocity_mps",
            "sway_velocity_mps",
            "heave_velocity_mps",
            "roll_rate_radps",
            "pitch_rate_radps",
            "yaw_rate_radps",
            "roll_angle_rad",
            "pitch_angle_rad",
            "yaw_angle_rad",
        ],
    }
}

fn control_column_name(c: ControlChannel) -> &'static str {
    match c {
        ControlChannel::Rudder => "rudder_angle_rad",
        ControlChannel::SternPlane => "stern_plane_angle_rad",
        ControlChannel::PortBowPlane => "port_bow_plane_angle_rad",
        ControlChannel::StarboardPlane => "starboard_plane_angle_rad",
        ControlChannel::Propeller => "propeller_rpm",
        ControlChannel::LeftPropeller => "left_propeller_rpm",
        ControlChannel::RightPropeller => "right_propeller_rpm",
    }
}

/// Build the recording schema for a preset. Pure function of the preset.
pub fn schema_for(params: &VesselParams) -> ColumnSchema {
    let mut columns = vec!["time_s".to_string()];
    let state_names = state_column_names(params.dof);
    let state_dim = state_names.len();
    columns.extend(state_names.into_iter().map(str::to_string));
    let mut control_dim = params.control_channels.len();
    columns.extend(params.control_channels.iter().map(|&c| control_column_name(c).to_string()));
    if params.supports_current {
        columns.push("ocean_current_speed_mps".to_string());
        control_dim += 1;
    }
    ColumnSchema { preset: params.name.clone(), columns, state_dim, control_dim }
}

/// A recorded run: 1 Hz rows of features plus the ground-truth window.
#[derive(Debug, Clone)]
pub struct LabeledTrajectory {
    pub schema: ColumnSchema,
    pub times: Vec<f64>,
    /// Rows x features, time excluded.
    pub features: Array2<f64>,
    pub disturbance_interval: Option<(f64, f64)>,
}

fn format_cell(buf: &mut String, v: f64) {
    buf.clear();
    write!(buf, "{v}").expect("formatting f64 cannot fail");
}

/// Write a trajectory as CSV with the schema header. Lossless.
pub fn write_csv(traj: &LabeledTrajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&traj.schema.columns)?;
    let mut cell = String::new();
    for (i, row) in traj.features.rows().into_iter().enumerate() {
        format_cell(&mut cell, traj.times[i]);
        w.write_field(&cell)?;
        for &v in row {
            format_cell(&mut cell, v);
            w.write_field(&cell)?;
        }
        w.write_record(None::<&[u8]>)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory written by [`write_csv`]. The disturbance interval lives
/// in the JSON sidecar, not the CSV; the caller attaches it afterwards.
pub fn read_csv(path: &Path, schema: &ColumnSchema) -> Result<LabeledTrajectory> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = r.headers()?.clone();
    let expected: Vec<&str> = schema.columns.iter().map(String::as_str).collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::CsvFormat {
            row: 1,
            message: format!(
                "header mismatch for preset {}: got [{}]",
                schema.preset,
                headers.iter().collect::<Vec<_>>().join(", ")
            ),
        });
    }
    let width = schema.columns.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 2; // 1-based, header is row 1
        let record = record?;
        if record.len() != width {
            return Err(Error::CsvFormat {
                row,
                message: format!("expected {width} cells, got {}", record.len()),
            });
        }
        let mut parsed = record.iter().map(|cell| {
            cell.trim().parse::<f64>().map_err(|_| Error::CsvFormat {
                row,
                message: format!("non-numeric cell `{cell}`"),
            })
        });
        let t = parsed.next().unwrap()?;
        if !t.is_finite() {
            return Err(Error::CsvFormat { row, message: "non-finite time".into() });
        }
        times.push(t);
        for cell in parsed {
            let v = cell?;
            if !v.is_finite() {
                return Err(Error::CsvFormat { row, message: "non-finite value".into() });
            }
            values.push(v);
        }
    }
    for i in 1..times.len() {
        if (times[i] - times[i - 1] - SAMPLE_PERIOD_S).abs() > 1e-9 {
            return Err(Error::CsvFormat {
                row: i + 2,
                message: format!(
                    "non-uniform timestamps: {} after {}",
                    times[i],
                    times[i - 1]
                ),
            });
        }
    }
    let n = times.len();
    let features = Array2::from_shape_vec((n, width - 1), values)
        .expect("cell count is rows * features by construction");
    Ok(LabeledTrajectory {
        schema: schema.clone(),
        times,
        features,
        disturbance_interval: None,
    })
}

/// JSON sidecar stored next to each trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec: ScenarioSpec,
    pub disturbance_interval: Option<(f64, f64)>,
}

pub fn write_sidecar(sidecar: &Sidecar, path: &Path) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(sidecar)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Per-column Min-Max parameters fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.mins.len()
    }

    /// Scale one value. Training columns map into [0, 1]; test-time values may
    /// fall outside, deliberately unclamped. Constant columns map to 0.5.
    pub fn apply_value(&self, col: usize, x: f64) -> f64 {
        let span = self.maxs[col] - self.mins[col];
        if span == 0.0 {
            0.5
        } else {
            (x - self.mins[col]) / span
        }
    }

    pub fn invert_value(&self, col: usize, y: f64) -> f64 {
        let span = self.maxs[col] - self.mins[col];
        if span == 0.0 {
            self.mins[col]
        } else {
            self.mins[col] + y * span
        }
    }

    pub fn apply_matrix(&self, rows: &Array2<f64>) -> Array2<f64> {
        let mut out = rows.clone();
        for (c, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| self.apply_value(c, x));
        }
        out
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(c, &y)| self.invert_value(c, y)).collect()
    }
}

/// Fit per-column min/max over the feature rows of the given trajectories.
pub fn fit_scaler<'a, I>(feature_sets: I) -> Result<ScalerParams>
where
    I: IntoIterator<Item = &'a Array2<f64>>,
{
    let mut mins: Vec<f64> = Vec::new();
    let mut maxs: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for m in feature_sets {
        if mins.is_empty() {
            mins = vec![f64::INFINITY; m.ncols()];
            maxs = vec![f64::NEG_INFINITY; m.ncols()];
        } else if m.ncols() != mins.len() {
            return Err(Error::ShapeMismatch(format!(
                "scaler fit: {} columns after {}",
                m.ncols(),
                mins.len()
            )));
        }
        rows += m.nrows();
        for row in m.rows() {
            for (c, &v) in row.iter().enumerate() {
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
    }
    if rows < 2 {
        return Err(Error::InsufficientData(format!(
            "scaler fit needs at least 2 rows, got {rows}"
        )));
    }
    Ok(ScalerParams { mins, maxs })
}

/// How window labels are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// OOD iff the forward horizon (t, t+H] intersects the disturbance window.
    #[default]
    Predictive,
    /// OOD iff the disturbance is active at the anchor time itself.
    Active,
}

/// One training/inference sample: a scaled input window, the commanded
/// controls over the horizon, and the scaled target states.
#[derive(Debug, Clone)]
pub struct WindowedSample {
    pub input: Array2<f64>,
    pub future_controls: Array2<f64>,
    pub target: Array2<f64>,
    pub anchor_time: f64,
    pub label: Label,
}

/// Label for an anchor time under the given mode.
pub fn label_for_anchor(
    anchor_time: f64,
    horizon_s: f64,
    interval: Option<(f64, f64)>,
    mode: LabelMode,
) -> Label {
    match interval {
        None => Label::Ind,
        Some((start, end)) => {
            let ood = match mode {
                LabelMode::Predictive => anchor_time + horizon_s >= start && anchor_time < end,
                LabelMode::Active => anchor_time >= start && anchor_time < end,
            };
            if ood {
                Label::Ood
            } else {
                Label::Ind
            }
        }
    }
}

/// Slice a scaled trajectory into `L - W - H + 1` windowed samples.
pub fn make_windows(
    traj: &LabeledTrajectory,
    scaler: &ScalerParams,
    window: usize,
    horizon: usize,
    mode: LabelMode,
) -> Result<Vec<WindowedSample>> {
    if window == 0 || horizon == 0 {
        return Err(Error::InvalidSpec("window and horizon must be at least 1".into()));
    }
    let rows = traj.features.nrows();
    if rows < window + horizon {
        return Err(Error::InsufficientData(format!(
            "trajectory has {rows} rows, need at least window + horizon = {}",
            window + horizon
        )));
    }
    let scaled = scaler.apply_matrix(&traj.features);
    let state_dim = traj.schema.state_dim;
    let horizon_s = horizon as f64 * SAMPLE_PERIOD_S;
    let mut samples = Vec::with_capacity(rows - window - horizon + 1);
    for last_in in (window - 1)..(rows - horizon) {
        let first_in = last_in + 1 - window;
        let input = scaled.slice(s![first_in..=last_in, ..]).to_owned();
        let future = scaled.slice(s![last_in + 1..=last_in + horizon, ..]);
        let target = future.slice(s![.., ..state_dim]).to_owned();
        let future_controls = future.slice(s![.., state_dim..]).to_owned();
        let anchor_time = traj.times[last_in];
        samples.push(WindowedSample {
            input,
            future_controls,
            target,
            anchor_time,
            label: label_for_anchor(anchor_time, horizon_s, traj.disturbance_interval, mode),
        });
    }
    Ok(samples)
}

/// One trajectory reference inside a split manifest. Paths are relative to the
/// manifest's directory so artifacts stay byte-identical across output roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub csv: String,
    pub sidecar: String,
    pub seed: u64,
    pub scenario_index: usize,
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub magnitude: Option<f64>,
    #[serde(default)]
    pub disturbance_interval: Option<(f64, f64)>,
}

/// Train/test assignment with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub version: u32,
    pub preset: String,
    pub train: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
}

pub const SPLIT_VERSION: u32 = 1;

/// Assemble a split. Training entries must be disturbance-free and no
/// trajectory may appear on both sides.
pub fn assemble_split(
    preset: &str,
    train: Vec<SplitEntry>,
    test: Vec<SplitEntry>,
) -> Result<DatasetSplit> {
    for e in &train {
        if e.disturbance_interval.is_some() {
            return Err(Error::InvalidSpec(format!(
                "disturbed trajectory {} offered for training",
                e.csv
            )));
        }
    }
    for e in &train {
        if test.iter().any(|t| t.csv == e.csv) {
            return Err(Error::InvalidSpec(format!(
                "trajectory {} appears in both train and test",
                e.csv
            )));
        }
    }
    Ok(DatasetSplit { version: SPLIT_VERSION, preset: preset.to_string(), train, test })
}

pub fn write_split(split: &DatasetSplit, path: &Path) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(split)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<DatasetSplit> {
    let split: DatasetSplit = serde_json::from_slice(&std::fs::read(path)?)?;
    if split.version != SPLIT_VERSION {
        return Err(Error::InvalidSpec(format!(
            "unsupported split manifest version {}",
            split.version
        )));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vessel::make_preset;
    use ndarray::Array;
    use proptest::prelude::*;

    fn mariner_schema() -> ColumnSchema {
        schema_for(&make_preset("mariner").unwrap())
    }

    fn synthetic_traj(schema: ColumnSchema, rows: usize) -> LabeledTrajectory {
        let f = schema.feature_count();
        let features = Array::from_shape_fn((rows, f), |(r, c)| {
            (r as f64 * 0.37 + c as f64 * 1.13).sin() * 3.0 + c as f64
        });
        LabeledTrajectory {
            schema,
            times: (0..rows).map(|t| t as f64).collect(),
            features,
            disturbance_interval: None,
        }
    }

    #[test]
    fn mariner_header_matches_vessel_table() {
        let schema = mariner_schema();
        assert_eq!(
            schema.columns,
            vec![
                "time_s",
                "surge_velocity_mps",
                "sway_velocity_mps",
                "yaw_rate_radps",
                "yaw_angle_rad",
                "rudder_angle_rad"
            ]
        );
        assert_eq!(schema.state_dim, 4);
        assert_eq!(schema.control_dim, 1);
    }

    #[test]
    fn schemas_are_stable_per_preset() {
        for name in ["mariner", "container", "remus100", "nps_auv", "otter"] {
            let p = make_preset(name).unwrap();
            assert_eq!(schema_for(&p), schema_for(&p));
        }
        let remus = schema_for(&make_preset("remus100").unwrap());
        assert_eq!(remus.state_dim, 9);
        assert_eq!(remus.control_dim, 4); // rudder, stern, propeller + current
        assert_eq!(remus.columns.last().unwrap(), "ocean_current_speed_mps");
        let otter = schema_for(&make_preset("otter").unwrap());
        assert!(otter.columns.contains(&"left_propeller_rpm".to_string()));
        assert!(!otter.columns.contains(&"rudder_angle_rad".to_string()));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let traj = synthetic_traj(mariner_schema(), 17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&traj, &path).unwrap();
        let back = read_csv(&path, &traj.schema).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.features, traj.features);
    }

    #[test]
    fn csv_errors_carry_row_numbers() {
        let schema = mariner_schema();
        let dir = tempfile::tempdir().unwrap();

        // Short row.
        let path = dir.path().join("short.csv");
        std::fs::write(
            &path,
            "time_s,surge_velocity_mps,sway_velocity_mps,yaw_rate_radps,yaw_angle_rad,rudder_angle_rad\n\
             0,1,2,3,4,5\n\
             1,1,2,3,4\n",
        )
        .unwrap();
        match read_csv(&path, &schema).unwrap_err() {
            Error::CsvFormat { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error {other}"),
        }

        // Non-numeric cell.
        let path = dir.path().join("alpha.csv");
        std::fs::write(
            &path,
            "time_s,surge_velocity_mps,sway_velocity_mps,yaw_rate_radps,yaw_angle_rad,rudder_angle_rad\n\
             0,1,2,three,4,5\n",
        )
        .unwrap();
        match read_csv(&path, &schema).unwrap_err() {
            Error::CsvFormat { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("three"));
            }
            other => panic!("unexpected error {other}"),
        }

        // Non-uniform timestamps.
        let path = dir.path().join("gap.csv");
        std::fs::write(
            &path,
            "time_s,surge_velocity_mps,sway_velocity_mps,yaw_rate_radps,yaw_angle_rad,rudder_angle_rad\n\
             0,1,2,3,4,5\n\
             2,1,2,3,4,5\n",
        )
        .unwrap();
        assert!(matches!(read_csv(&path, &schema).unwrap_err(), Error::CsvFormat { row: 3, .. }));

        // Wrong header.
        let path = dir.path().join("hdr.csv");
        std::fs::write(&path, "a,b,c,d,e,f\n0,1,2,3,4,5\n").unwrap();
        assert!(matches!(read_csv(&path, &schema).unwrap_err(), Error::CsvFormat { row: 1, .. }));
    }

    #[test]
    fn scaler_maps_training_columns_to_unit_interval() {
        let m = Array2::from_shape_vec((3, 1), vec![0.0, 5.0, 10.0]).unwrap();
        let scaler = fit_scaler([&m]).unwrap();
        let scaled = scaler.apply_matrix(&m);
        assert_eq!(scaled.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn scaler_constant_column_maps_to_midpoint() {
        let m = Array2::from_shape_vec((3, 1), vec![7.5, 7.5, 7.5]).unwrap();
        let scaler = fit_scaler([&m]).unwrap();
        assert_eq!(scaler.apply_value(0, 7.5), 0.5);
        assert_eq!(scaler.invert_value(0, scaler.apply_value(0, 7.5)), 7.5);
    }

    #[test]
    fn scaler_rejects_empty_fit() {
        let m = Array2::<f64>::zeros((0, 3));
        assert!(fit_scaler([&m]).is_err());
        assert!(fit_scaler(std::iter::empty::<&Array2<f64>>()).is_err());
    }

    proptest! {
        #[test]
        fn scaler_inversion_is_exact(values in proptest::collection::vec(-1e6f64..1e6, 4..40)) {
            let n = values.len();
            let m = Array2::from_shape_vec((n, 1), values.clone()).unwrap();
            let scaler = fit_scaler([&m]).unwrap();
            // 1e-12 relative to the column scale; absolute 1e-12 is below
            // f64 resolution once the span reaches ~1e4.
            let span = scaler.maxs[0] - scaler.mins[0];
            for &x in &values {
                let y = scaler.apply_value(0, x);
                let tol = 1e-12 * span.max(x.abs()).max(1.0);
                prop_assert!((scaler.invert_value(0, y) - x).abs() <= tol);
            }
        }

        #[test]
        fn window_count_formula_holds(
            w in 1usize..8,
            h in 1usize..8,
            extra in 0usize..30,
        ) {
            let rows = w + h + extra;
            let traj = synthetic_traj(mariner_schema(), rows);
            let scaler = fit_scaler([&traj.features]).unwrap();
            let samples = make_windows(&traj, &scaler, w, h, LabelMode::Predictive).unwrap();
            prop_assert_eq!(samples.len(), rows - w - h + 1);
        }
    }

    #[test]
    fn window_basics() {
        let traj = synthetic_traj(mariner_schema(), 10);
        let scaler = fit_scaler([&traj.features]).unwrap();
        let samples = make_windows(&traj, &scaler, 3, 2, LabelMode::Predictive).unwrap();
        assert_eq!(samples.len(), 6);
        assert_eq!(samples[0].anchor_time, 2.0);
        assert_eq!(samples[0].input.dim(), (3, 5));
        assert_eq!(samples[0].target.dim(), (2, 4));
        assert_eq!(samples[0].future_controls.dim(), (2, 1));

        let minimal = synthetic_traj(mariner_schema(), 2);
        let scaler = fit_scaler([&minimal.features]).unwrap();
        let samples = make_windows(&minimal, &scaler, 1, 1, LabelMode::Predictive).unwrap();
        assert_eq!(samples.len(), 1);

        let short = synthetic_traj(mariner_schema(), 4);
        let scaler = fit_scaler([&short.features]).unwrap();
        assert!(make_windows(&short, &scaler, 3, 2, LabelMode::Predictive).is_err());
    }

    #[test]
    fn predictive_labels_cover_horizon_intersections() {
        let mut traj = synthetic_traj(mariner_schema(), 600);
        traj.disturbance_interval = Some((300.0, 420.0));
        let scaler = fit_scaler([&traj.features]).unwrap();
        let samples = make_windows(&traj, &scaler, 1, 60, LabelMode::Predictive).unwrap();
        let ood: Vec<f64> = samples
            .iter()
            .filter(|s| s.label == Label::Ood)
            .map(|s| s.anchor_time)
            .collect();
        assert_eq!(*ood.first().unwrap(), 240.0);
        assert_eq!(*ood.last().unwrap(), 419.0);
        assert_eq!(ood.len(), 180);

        let active = make_windows(&traj, &scaler, 1, 60, LabelMode::Active).unwrap();
        let ood_active: Vec<f64> = active
            .iter()
            .filter(|s| s.label == Label::Ood)
            .map(|s| s.anchor_time)
            .collect();
        assert_eq!(*ood_active.first().unwrap(), 300.0);
        assert_eq!(*ood_active.last().unwrap(), 419.0);
    }

    #[test]
    fn split_rejects_disturbed_training_runs() {
        let clean = SplitEntry {
            csv: "a.csv".into(),
            sidecar: "a.json".into(),
            seed: 1,
            scenario_index: 0,
            kind: None,
            magnitude: None,
            disturbance_interval: None,
        };
        let disturbed = SplitEntry {
            csv: "b.csv".into(),
            disturbance_interval: Some((10.0, 130.0)),
            ..clean.clone()
        };
        assert!(assemble_split("mariner", vec![disturbed.clone()], vec![]).is_err());
        let split = assemble_split("mariner", vec![clean.clone()], vec![disturbed]).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.test.len(), 1);
        // Same trajectory on both sides is rejected.
        assert!(assemble_split("mariner", vec![clean.clone()], vec![clean]).is_err());
    }

    #[test]
    fn split_round_trip_is_deterministic() {
        let entry = SplitEntry {
            csv: "t.csv".into(),
            sidecar: "t.json".into(),
            seed: 42,
            scenario_index: 3,
            kind: Some("sensor_noise".into()),
            magnitude: Some(4.0),
            disturbance_interval: Some((100.0, 220.0)),
        };
        let split = assemble_split("remus100", vec![], vec![entry]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        write_split(&split, &path).unwrap();
        let bytes_a = std::fs::read(&path).unwrap();
        write_split(&split, &path).unwrap();
        let bytes_b = std::fs::read(&path).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(read_split(&path).unwrap(), split);
    }
}
