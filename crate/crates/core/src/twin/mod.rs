//! The digital twin: multistep state predictor (DTM), autoencoder capability
//! (DTC) with its OOD threshold, baseline scorers, checkpoint persistence,
//! and the per-anchor detection loop.

pub mod dtc;
pub mod dtm;

pub use dtc::{
    classify, compute_threshold, reconstruction_error, reconstruction_errors, DtcModel,
    DtcTrainConfig, OodThreshold,
};
pub use dtm::{pack_batch, train_dtm, DtmModel, DtmTrainConfig, LogRow};

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::{
    fit_scaler, make_windows, LabelMode, Label, LabeledTrajectory, ScalerParams, WindowedSample,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// How the per-step reconstruction errors collapse into one anchor score.
/// `Max` is canonical (any predicted state over the threshold raises the
/// alarm); `Mean` is kept for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

/// Detection method: the autoencoder capability or one of the two baselines
/// that score DTM predictions against realized states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Oddit,
    DtmR,
    DtmE,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Oddit, Variant::DtmR, Variant::DtmE];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Oddit => "oddit",
            Variant::DtmR => "dtm-r",
            Variant::DtmE => "dtm-e",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oddit" => Ok(Variant::Oddit),
            "dtm-r" => Ok(Variant::DtmR),
            "dtm-e" => Ok(Variant::DtmE),
            other => Err(Error::InvalidSpec(format!(
                "unknown variant `{other}`; expected oddit, dtm-r or dtm-e"
            ))),
        }
    }
}

/// Offline baseline scores over a predicted horizon vs the realized states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Rmse,
    Euclid,
}

/// RMSE or Euclidean distance between predicted and realized state blocks.
pub fn baseline_score(
    kind: BaselineKind,
    predicted: &Array2<f64>,
    realized: &Array2<f64>,
) -> Result<f64> {
    if predicted.dim() != realized.dim() {
        return Err(Error::ShapeMismatch(format!(
            "baseline score: predicted {:?} vs realized {:?}",
            predicted.dim(),
            realized.dim()
        )));
    }
    let ss: f64 = predicted
        .iter()
        .zip(realized.iter())
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok(match kind {
        BaselineKind::Rmse => (ss / predicted.len() as f64).sqrt(),
        BaselineKind::Euclid => ss.sqrt(),
    })
}

/// Everything twin training needs, echoed into the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub window: usize,
    pub horizon: usize,
    pub dtm_learning_rate: f64,
    pub dtm_batch_size: usize,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub dtc_learning_rate: f64,
    pub dtc_batch_size: usize,
    pub dtc_epochs: usize,
    /// Stride over window anchors when assembling the training set.
    pub sample_stride: usize,
    /// Stride over horizon steps when assembling autoencoder training
    /// vectors (thresholds always use every vector).
    pub dtc_vector_stride: usize,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl TrainConfig {
    /// CI-friendly scale: short windows, small hidden state, few epochs.
    pub fn desk(seed: u64) -> Self {
        TrainConfig {
            hidden: 64,
            window: 30,
            horizon: 30,
            dtm_learning_rate: 0.001,
            dtm_batch_size: 128,
            pretrain_epochs: 30,
            train_epochs: 60,
            dtc_learning_rate: 0.001,
            dtc_batch_size: 64,
            dtc_epochs: 20,
            sample_stride: 5,
            dtc_vector_stride: 2,
            aggregation: Aggregation::Max,
            seed,
        }
    }

    /// Full-scale settings (hidden 256, window/horizon 60, long schedules).
    pub fn paper(seed: u64) -> Self {
        TrainConfig {
            hidden: 256,
            window: 60,
            horizon: 60,
            dtm_learning_rate: 0.001,
            dtm_batch_size: 128,
            pretrain_epochs: 600,
            train_epochs: 1000,
            dtc_learning_rate: 0.001,
            dtc_batch_size: 64,
            dtc_epochs: 100,
            sample_stride: 1,
            dtc_vector_stride: 1,
            aggregation: Aggregation::Max,
            seed,
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-contained detector state: scaler, DTM, DTC, thresholds, config echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwinCheckpoint {
    pub version: u32,
    pub preset: String,
    pub scaler: ScalerParams,
    pub dtm: DtmModel,
    pub dtc: DtcModel,
    pub threshold: OodThreshold,
    pub baseline_rmse_threshold: OodThreshold,
    pub baseline_euclid_threshold: OodThreshold,
    pub config: TrainConfig,
}

/// Per-anchor detection outcome with the full per-step error profile.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub anchor_time: f64,
    pub step_errors: Vec<f64>,
    pub max_error: f64,
    pub mean_error: f64,
    pub decision: Label,
    pub label: Label,
}

/// Flattened score row shared by all variants.
#[derive(Debug, Clone, Copy)]
pub struct DetectionRow {
    pub anchor_time: f64,
    pub score: f64,
    pub decision: Label,
    pub label: Label,
}

const DETECT_CHUNK: usize = 256;

/// DTM predictions for a slice of samples: one H x state matrix per sample.
fn rollout_predictions(
    dtm: &DtmModel,
    samples: &[&WindowedSample],
) -> Result<Vec<Vec<Array2<f64>>>> {
    // Returns per-step batch matrices per chunk to avoid re-packing.
    let mut out = Vec::new();
    for chunk in samples.chunks(DETECT_CHUNK) {
        let (wsteps, csteps, _) = pack_batch(chunk);
        let preds = dtm.predict_rollout(&wsteps, &csteps)?;
        out.push(preds);
    }
    Ok(out)
}

/// Train DTM and DTC on disturbance-free trajectories and assemble the
/// checkpoint, including the baseline thresholds (same mu + 3 sigma rule over
/// training scores).
pub fn train_twin(
    preset: &str,
    train_trajs: &[LabeledTrajectory],
    cfg: &TrainConfig,
) -> Result<(TwinCheckpoint, Vec<LogRow>)> {
    if train_trajs.is_empty() {
        return Err(Error::InsufficientData("no training trajectories".into()));
    }
    for t in train_trajs {
        if t.disturbance_interval.is_some() {
            return Err(Error::InvalidSpec(
                "disturbed trajectory offered for twin training".into(),
            ));
        }
        if t.schema.preset != preset {
            return Err(Error::ShapeMismatch(format!(
                "trajectory preset {} does not match twin preset {preset}",
                t.schema.preset
            )));
        }
    }
    let schema = &train_trajs[0].schema;
    let state_dim = schema.state_dim;
    let control_dim = schema.control_dim;

    let scaler = fit_scaler(train_trajs.iter().map(|t| &t.features))?;

    let mut samples: Vec<WindowedSample> = Vec::new();
    for t in train_trajs {
        let windows = make_windows(t, &scaler, cfg.window, cfg.horizon, LabelMode::Predictive)?;
        samples.extend(windows.into_iter().step_by(cfg.sample_stride.max(1)));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no windowed samples after striding".into()));
    }

    let dtm_cfg = DtmTrainConfig {
        hidden: cfg.hidden,
        window: cfg.window,
        horizon: cfg.horizon,
        learning_rate: cfg.dtm_learning_rate,
        batch_size: cfg.dtm_batch_size,
        pretrain_epochs: cfg.pretrain_epochs,
        train_epochs: cfg.train_epochs,
        seed: derive_seed(cfg.seed, "dtm", 0),
    };
    let (dtm, mut log) = train_dtm(&samples, state_dim, control_dim, &dtm_cfg)?;

    // The DTC consumes (predicted state, commanded control) vectors produced
    // by running the trained DTM over the training windows.
    let refs: Vec<&WindowedSample> = samples.iter().collect();
    let chunked_preds = rollout_predictions(&dtm, &refs)?;
    let ae_dim = state_dim + control_dim;
    let n_vectors = samples.len() * cfg.horizon;
    let mut vectors = Array2::zeros((n_vectors, ae_dim));
    {
        let mut row = 0usize;
        let mut offset = 0usize;
        for chunk in refs.chunks(DETECT_CHUNK) {
            let preds = &chunked_preds[offset];
            offset += 1;
            for (b, sample) in chunk.iter().enumerate() {
                for j in 0..cfg.horizon {
                    let mut dst = vectors.row_mut(row);
                    let pred = preds[j].row(b);
                    for (k, v) in pred.iter().enumerate() {
                        dst[k] = *v;
                    }
                    let ctrl = sample.future_controls.row(j);
                    for (k, v) in ctrl.iter().enumerate() {
                        dst[state_dim + k] = *v;
                    }
                    row += 1;
                }
            }
        }
        debug_assert_eq!(row, n_vectors);
    }

    let stride = cfg.dtc_vector_stride.max(1);
    let train_vectors = if stride == 1 {
        vectors.clone()
    } else {
        let idx: Vec<usize> = (0..n_vectors).step_by(stride).collect();
        let mut sub = Array2::zeros((idx.len(), ae_dim));
        for (r, &i) in idx.iter().enumerate() {
            sub.row_mut(r).assign(&vectors.row(i));
        }
        sub
    };
    let dtc_cfg = DtcTrainConfig {
        learning_rate: cfg.dtc_learning_rate,
        batch_size: cfg.dtc_batch_size,
        epochs: cfg.dtc_epochs,
        seed: derive_seed(cfg.seed, "dtc", 0),
    };
    let (dtc_model, dtc_log) = dtc::train_autoencoder(&train_vectors, &dtc_cfg)?;
    log.extend(dtc_log);

    // Threshold over every training vector (Chebyshev guarantee applies to
    // exactly this population).
    let recon = dtc_model.reconstruct(&vectors)?;
    let errors = reconstruction_errors(vectors.view(), recon.view())?;
    let threshold = compute_threshold(&errors)?;

    // Baseline thresholds over per-anchor scores vs realized states.
    let mut rmse_scores = Vec::with_capacity(samples.len());
    let mut euclid_scores = Vec::with_capacity(samples.len());
    {
        let mut offset = 0usize;
        for chunk in refs.chunks(DETECT_CHUNK) {
            let preds = &chunked_preds[offset];
            offset += 1;
            for (b, sample) in chunk.iter().enumerate() {
                let mut pred_mat = Array2::zeros((cfg.horizon, state_dim));
                for j in 0..cfg.horizon {
                    pred_mat.row_mut(j).assign(&preds[j].row(b));
                }
                rmse_scores.push(baseline_score(BaselineKind::Rmse, &pred_mat, &sample.target)?);
                euclid_scores.push(baseline_score(BaselineKind::Euclid, &pred_mat, &sample.target)?);
            }
        }
    }
    let baseline_rmse_threshold = compute_threshold(&rmse_scores)?;
    let baseline_euclid_threshold = compute_threshold(&euclid_scores)?;

    let checkpoint = TwinCheckpoint {
        version: CHECKPOINT_VERSION,
        preset: preset.to_string(),
        scaler,
        dtm,
        dtc: dtc_model,
        threshold,
        baseline_rmse_threshold,
        baseline_euclid_threshold,
        config: cfg.clone(),
    };
    Ok((checkpoint, log))
}

fn check_compat(twin: &TwinCheckpoint, traj: &LabeledTrajectory) -> Result<()> {
    if traj.schema.preset != twin.preset {
        return Err(Error::ShapeMismatch(format!(
            "trajectory preset {} does not match checkpoint preset {}",
            traj.schema.preset, twin.preset
        )));
    }
    if traj.features.ncols() != twin.scaler.width() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory has {} features, checkpoint scaler expects {}",
            traj.features.ncols(),
            twin.scaler.width()
        )));
    }
    Ok(())
}

/// Run the full detector over a trajectory: scale, window, predict the
/// horizon, reconstruct each (predicted state, commanded control) vector, and
/// flag anchors whose aggregated reconstruction error exceeds the threshold.
pub fn detect(
    twin: &TwinCheckpoint,
    traj: &LabeledTrajectory,
    label_mode: LabelMode,
) -> Result<Vec<Verdict>> {
    check_compat(twin, traj)?;
    let cfg = &twin.config;
    let samples = make_windows(traj, &twin.scaler, cfg.window, cfg.horizon, label_mode)?;
    let state_dim = traj.schema.state_dim;
    let mut verdicts = Vec::with_capacity(samples.len());

    for chunk in samples.chunks(DETECT_CHUNK) {
        let refs: Vec<&WindowedSample> = chunk.iter().collect();
        let (wsteps, csteps, _) = pack_batch(&refs);
        let preds = twin.dtm.predict_rollout(&wsteps, &csteps)?;
        let batch = refs.len();
        let mut step_errors = vec![vec![0.0; cfg.horizon]; batch];
        for j in 0..cfg.horizon {
            let ae_in = concatenate(Axis(1), &[preds[j].view(), csteps[j].view()])
                .expect("prediction and control batches share row count");
            let recon = twin.dtc.reconstruct(&ae_in)?;
            let errs = reconstruction_errors(ae_in.view(), recon.view())?;
            for (b, e) in errs.into_iter().enumerate() {
                step_errors[b][j] = e;
            }
        }
        let _ = state_dim;
        for (b, sample) in refs.iter().enumerate() {
            let errs = std::mem::take(&mut step_errors[b]);
            let max_error = errs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean_error = errs.iter().sum::<f64>() / errs.len() as f64;
            let score = match cfg.aggregation {
                Aggregation::Max => max_error,
                Aggregation::Mean => mean_error,
            };
            verdicts.push(Verdict {
                anchor_time: sample.anchor_time,
                step_errors: errs,
                max_error,
                mean_error,
                decision: classify(score, &twin.threshold),
                label: sample.label,
            });
        }
    }
    Ok(verdicts)
}

/// Score a trajectory with the chosen method. The baselines reuse the DTM
/// predictions but score against realized states, so they are inherently
/// retrospective; their thresholds come from the checkpoint.
pub fn detect_scores(
    twin: &TwinCheckpoint,
    traj: &LabeledTrajectory,
    variant: Variant,
    label_mode: LabelMode,
) -> Result<Vec<DetectionRow>> {
    match variant {
        Variant::Oddit => {
            let verdicts = detect(twin, traj, label_mode)?;
            Ok(verdicts
                .into_iter()
                .map(|v| {
                    let score = match twin.config.aggregation {
                        Aggregation::Max => v.max_error,
                        Aggregation::Mean => v.mean_error,
                    };
                    DetectionRow {
                        anchor_time: v.anchor_time,
                        score,
                        decision: v.decision,
                        label: v.label,
                    }
                })
                .collect())
        }
        Variant::DtmR | Variant::DtmE => {
            check_compat(twin, traj)?;
            let cfg = &twin.config;
            let samples = make_windows(traj, &twin.scaler, cfg.window, cfg.horizon, label_mode)?;
            let (kind, threshold) = match variant {
                Variant::DtmR => (BaselineKind::Rmse, &twin.baseline_rmse_threshold),
                _ => (BaselineKind::Euclid, &twin.baseline_euclid_threshold),
            };
            let mut rows = Vec::with_capacity(samples.len());
            for chunk in samples.chunks(DETECT_CHUNK) {
                let refs: Vec<&WindowedSample> = chunk.iter().collect();
                let (wsteps, csteps, _) = pack_batch(&refs);
                let preds = twin.dtm.predict_rollout(&wsteps, &csteps)?;
                for (b, sample) in refs.iter().enumerate() {
                    let mut pred_mat = Array2::zeros((cfg.horizon, traj.schema.state_dim));
                    for j in 0..cfg.horizon {
                        pred_mat.row_mut(j).assign(&preds[j].row(b));
                    }
                    let score = baseline_score(kind, &pred_mat, &sample.target)?;
                    rows.push(DetectionRow {
                        anchor_time: sample.anchor_time,
                        score,
                        decision: classify(score, threshold),
                        label: sample.label,
                    });
                }
            }
            Ok(rows)
        }
    }
}

/// Persist a checkpoint as a single JSON document.
pub fn save_checkpoint(twin: &TwinCheckpoint, path: &Path) -> Result<()> {
    let mut out = serde_json::to_vec_pretty(twin)?;
    out.push(b'\n');
    std::fs::write(path, out)?;
    Ok(())
}

/// Load and version-check a checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<TwinCheckpoint> {
    let bytes = std::fs::read(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Checkpoint("checkpoint has no version tag".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))
}
