//! The digital twin model: a two-layer recurrent encoder with a linear head
//! that rolls future states out autoregressively.
//!
//! Given a window of scaled (state, control) rows, the encoder builds up its
//! hidden state; the head then predicts the next state, which is fed back in
//! together with the commanded control for that step until the horizon is
//! filled. Training backpropagates through the whole rollout, feedback path
//! included.

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedSample;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, clip_global_norm, mse_loss, AdamState, Activation, DenseCache, DenseGrads,
    DenseLayer, ForwardMode, RecurrentGrads, RecurrentLayer,
};
use crate::seed::{rng_from_seed, stream_rng};

/// Default gradient clip (global L2 norm) for recurrent training.
pub const DTM_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtmModel {
    pub cells: Vec<RecurrentLayer>,
    pub head: DenseLayer,
    pub window: usize,
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
}

/// Cached forward pass of a full rollout, for backpropagation.
pub struct RolloutCache {
    /// xs[layer][step]: input consumed by `layer` at that step.
    xs: Vec<Vec<Array2<f64>>>,
    /// h_prevs[layer][step].
    h_prevs: Vec<Vec<Array2<f64>>>,
    /// pres[layer][step].
    pres: Vec<Vec<Array2<f64>>>,
    head_caches: Vec<DenseCache>,
}

#[derive(Debug, Clone)]
pub struct DtmGrads {
    pub cells: Vec<RecurrentGrads>,
    pub head: DenseGrads,
}

impl DtmGrads {
    pub fn flatten(&self, out: &mut Vec<f64>) {
        for c in &self.cells {
            c.flatten(out);
        }
        self.head.flatten(out);
    }
}

impl DtmModel {
    pub fn init(
        state_dim: usize,
        control_dim: usize,
        hidden: usize,
        window: usize,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let input_dim = state_dim + control_dim;
        let mut rng = rng_from_seed(seed);
        let cells = vec![
            RecurrentLayer::init(input_dim, hidden, &mut rng),
            RecurrentLayer::init(hidden, hidden, &mut rng),
        ];
        let head = DenseLayer::init(hidden, state_dim, Activation::Identity, &mut rng);
        DtmModel { cells, head, window, horizon, state_dim, control_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.control_dim
    }

    pub fn hidden(&self) -> usize {
        self.cells[0].hidden()
    }

    pub fn param_count(&self) -> usize {
        self.cells.iter().map(|c| c.param_count()).sum::<usize>() + self.head.param_count()
    }

    pub fn flatten_params(&self, out: &mut Vec<f64>) {
        for c in &self.cells {
            c.flatten_params(out);
        }
        self.head.flatten_params(out);
    }

    pub fn load_params(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for c in &mut self.cells {
            rest = c.load_params(rest);
        }
        let rest = self.head.load_params(rest);
        debug_assert!(rest.is_empty(), "parameter vector length mismatch");
    }

    fn check_batch_shapes(&self, window_steps: &[Array2<f64>], control_steps: &[Array2<f64>]) -> Result<()> {
        if window_steps.len() != self.window {
            return Err(Error::ShapeMismatch(format!(
                "dtm: got {} window steps, model expects {}",
                window_steps.len(),
                self.window
            )));
        }
        if control_steps.len() != self.horizon {
            return Err(Error::ShapeMismatch(format!(
                "dtm: got {} future control steps, model expects horizon {}",
                control_steps.len(),
                self.horizon
            )));
        }
        if window_steps[0].ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "dtm: window width {} vs input dim {}",
                window_steps[0].ncols(),
                self.input_dim()
            )));
        }
        if control_steps[0].ncols() != self.control_dim {
            return Err(Error::ShapeMismatch(format!(
                "dtm: control width {} vs control dim {}",
                control_steps[0].ncols(),
                self.control_dim
            )));
        }
        Ok(())
    }

    /// Autoregressive rollout over a batch. Returns `horizon` prediction
    /// matrices (batch x state_dim), plus the cache when `collect` is set.
    fn rollout(
        &self,
        window_steps: &[Array2<f64>],
        control_steps: &[Array2<f64>],
        collect: bool,
    ) -> Result<(Vec<Array2<f64>>, Option<RolloutCache>)> {
        self.check_batch_shapes(window_steps, control_steps)?;
        let batch = window_steps[0].nrows();
        let n_layers = self.cells.len();
        let total_steps = self.window + self.horizon - 1;

        let mut h: Vec<Array2<f64>> =
            self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect();
        let mut xs = vec![Vec::new(); n_layers];
        let mut h_prevs = vec![Vec::new(); n_layers];
        let mut pres = vec![Vec::new(); n_layers];
        let mut head_caches = Vec::new();
        let mut preds: Vec<Array2<f64>> = Vec::with_capacity(self.horizon);

        for step in 0..total_steps {
            let x = if step < self.window {
                window_steps[step].clone()
            } else {
                let j = step - self.window;
                concatenate(Axis(1), &[preds[j].view(), control_steps[j].view()])
                    .expect("pred and control batches share row count")
            };
            let mut layer_input = x;
            for (l, cell) in self.cells.iter().enumerate() {
                let h_prev = h[l].clone();
                let (h_new, pre) = cell.forward_step(&layer_input, &h_prev)?;
                if collect {
                    xs[l].push(layer_input);
                    h_prevs[l].push(h_prev);
                    pres[l].push(pre);
                } else {
                    drop(pre);
                }
                h[l] = h_new.clone();
                layer_input = h_new;
            }
            if step >= self.window - 1 {
                let (pred, cache) = self.head.forward(&h[n_layers - 1], &mut ForwardMode::Eval)?;
                if collect {
                    head_caches.push(cache);
                }
                preds.push(pred);
            }
        }
        let cache = collect.then_some(RolloutCache { xs, h_prevs, pres, head_caches });
        Ok((preds, cache))
    }

    pub fn forward_rollout(
        &self,
        window_steps: &[Array2<f64>],
        control_steps: &[Array2<f64>],
    ) -> Result<(Vec<Array2<f64>>, RolloutCache)> {
        let (preds, cache) = self.rollout(window_steps, control_steps, true)?;
        Ok((preds, cache.expect("cache requested")))
    }

    pub fn predict_rollout(
        &self,
        window_steps: &[Array2<f64>],
        control_steps: &[Array2<f64>],
    ) -> Result<Vec<Array2<f64>>> {
        Ok(self.rollout(window_steps, control_steps, false)?.0)
    }

    /// Backward through the full rollout, feedback path included.
    pub fn backward_rollout(
        &self,
        cache: &RolloutCache,
        dpreds: &[Array2<f64>],
    ) -> Result<DtmGrads> {
        let n_layers = self.cells.len();
        let total_steps = self.window + self.horizon - 1;
        let mut dpred_acc: Vec<Array2<f64>> = dpreds.to_vec();
        let mut grads = DtmGrads {
            cells: self.cells.iter().map(RecurrentGrads::zeros_like).collect(),
            head: DenseGrads::zeros_like(&self.head),
        };
        let batch = cache.xs[0][0].nrows();
        let mut dh_carry: Vec<Array2<f64>> =
            self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect();

        for step in (0..total_steps).rev() {
            // Head emission at this step: gradient flows into the top hidden
            // state. dpred_acc already contains the feedback contribution from
            // step+1 because we walk backwards.
            let mut dh_top_extra: Option<Array2<f64>> = None;
            if step >= self.window - 1 {
                let p = step - (self.window - 1);
                let (hg, dh_top) = self.head.backward(&cache.head_caches[p], &dpred_acc[p])?;
                grads.head.weights += &hg.weights;
                grads.head.bias += &hg.bias;
                dh_top_extra = Some(dh_top);
            }

            let mut from_above: Option<Array2<f64>> = None;
            let mut dx_bottom: Option<Array2<f64>> = None;
            for l in (0..n_layers).rev() {
                let mut dh = dh_carry[l].clone();
                if l == n_layers - 1 {
                    if let Some(extra) = dh_top_extra.take() {
                        dh += &extra;
                    }
                }
                if let Some(above) = from_above.take() {
                    dh += &above;
                }
                let (dx, dh_prev) = self.cells[l].backward_step(
                    &cache.xs[l][step],
                    &cache.h_prevs[l][step],
                    &cache.pres[l][step],
                    &dh,
                    &mut grads.cells[l],
                );
                dh_carry[l] = dh_prev;
                if l == 0 {
                    dx_bottom = Some(dx);
                } else {
                    from_above = Some(dx);
                }
            }

            // Autoregressive feedback: the state part of a rollout step's
            // input is the previous prediction.
            if step >= self.window {
                let j = step - self.window;
                let dx = dx_bottom.expect("layer 0 produced an input gradient");
                let dstate = dx.slice(s![.., ..self.state_dim]).to_owned();
                dpred_acc[j] += &dstate;
            }
        }
        Ok(grads)
    }

    /// Teacher-forced one-step prediction over the window (the pretraining
    /// objective that shapes the hidden states). Emits one prediction per
    /// window step.
    pub fn forward_onestep(
        &self,
        window_steps: &[Array2<f64>],
    ) -> Result<(Vec<Array2<f64>>, RolloutCache)> {
        if window_steps.len() != self.window {
            return Err(Error::ShapeMismatch(format!(
                "dtm pretrain: got {} window steps, expected {}",
                window_steps.len(),
                self.window
            )));
        }
        let batch = window_steps[0].nrows();
        let n_layers = self.cells.len();
        let mut h: Vec<Array2<f64>> =
            self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect();
        let mut xs = vec![Vec::new(); n_layers];
        let mut h_prevs = vec![Vec::new(); n_layers];
        let mut pres = vec![Vec::new(); n_layers];
        let mut head_caches = Vec::new();
        let mut preds = Vec::with_capacity(self.window);
        for x in window_steps {
            let mut layer_input = x.clone();
            for (l, cell) in self.cells.iter().enumerate() {
                let h_prev = h[l].clone();
                let (h_new, pre) = cell.forward_step(&layer_input, &h_prev)?;
                xs[l].push(layer_input);
                h_prevs[l].push(h_prev);
                pres[l].push(pre);
                h[l] = h_new.clone();
                layer_input = h_new;
            }
            let (pred, cache) = self.head.forward(&h[n_layers - 1], &mut ForwardMode::Eval)?;
            head_caches.push(cache);
            preds.push(pred);
        }
        Ok((preds, RolloutCache { xs, h_prevs, pres, head_caches }))
    }

    /// Backward for the one-step objective (head at every step, no feedback).
    pub fn backward_onestep(&self, cache: &RolloutCache, dpreds: &[Array2<f64>]) -> Result<DtmGrads> {
        let n_layers = self.cells.len();
        let steps = cache.xs[0].len();
        let mut grads = DtmGrads {
            cells: self.cells.iter().map(RecurrentGrads::zeros_like).collect(),
            head: DenseGrads::zeros_like(&self.head),
        };
        let batch = cache.xs[0][0].nrows();
        let mut dh_carry: Vec<Array2<f64>> =
            self.cells.iter().map(|c| Array2::zeros((batch, c.hidden()))).collect();
        for step in (0..steps).rev() {
            let (hg, dh_top) = self.head.backward(&cache.head_caches[step], &dpreds[step])?;
            grads.head.weights += &hg.weights;
            grads.head.bias += &hg.bias;
            let mut from_above: Option<Array2<f64>> = Some(dh_top);
            for l in (0..n_layers).rev() {
                let mut dh = dh_carry[l].clone();
                if l == n_layers - 1 {
                    if let Some(extra) = from_above.take() {
                        dh += &extra;
                    }
                } else if let Some(above) = from_above.take() {
                    dh += &above;
                }
                let (dx, dh_prev) = self.cells[l].backward_step(
                    &cache.xs[l][step],
                    &cache.h_prevs[l][step],
                    &cache.pres[l][step],
                    &dh,
                    &mut grads.cells[l],
                );
                dh_carry[l] = dh_prev;
                if l > 0 {
                    from_above = Some(dx);
                }
            }
        }
        Ok(grads)
    }

    /// Predict the horizon for one sample. `window` is W x (state + control)
    /// and `future_controls` must cover at least H rows of commanded controls.
    pub fn predict_horizon(
        &self,
        window: &Array2<f64>,
        future_controls: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        if window.nrows() != self.window || window.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "predict_horizon: window {:?}, expected ({}, {})",
                window.dim(),
                self.window,
                self.input_dim()
            )));
        }
        if future_controls.nrows() != self.horizon || future_controls.ncols() != self.control_dim {
            return Err(Error::ShapeMismatch(format!(
                "predict_horizon: controls {:?}, expected ({}, {})",
                future_controls.dim(),
                self.horizon,
                self.control_dim
            )));
        }
        let window_steps: Vec<Array2<f64>> =
            (0..self.window).map(|s| window.row(s).insert_axis(Axis(0)).to_owned()).collect();
        let control_steps: Vec<Array2<f64>> = (0..self.horizon)
            .map(|j| future_controls.row(j).insert_axis(Axis(0)).to_owned())
            .collect();
        let preds = self.predict_rollout(&window_steps, &control_steps)?;
        let mut out = Array2::zeros((self.horizon, self.state_dim));
        for (j, p) in preds.iter().enumerate() {
            out.row_mut(j).assign(&p.row(0));
        }
        Ok(out)
    }
}

/// Stack samples into per-step batch matrices:
/// window steps (W of batch x input), future controls (H of batch x control),
/// targets (H of batch x state).
pub fn pack_batch(
    samples: &[&WindowedSample],
) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let batch = samples.len();
    let window = samples[0].input.nrows();
    let horizon = samples[0].target.nrows();
    let in_dim = samples[0].input.ncols();
    let ctrl_dim = samples[0].future_controls.ncols();
    let state_dim = samples[0].target.ncols();

    let mut window_steps = vec![Array2::zeros((batch, in_dim)); window];
    let mut control_steps = vec![Array2::zeros((batch, ctrl_dim)); horizon];
    let mut target_steps = vec![Array2::zeros((batch, state_dim)); horizon];
    for (b, sample) in samples.iter().enumerate() {
        for s in 0..window {
            window_steps[s].row_mut(b).assign(&sample.input.row(s));
        }
        for j in 0..horizon {
            control_steps[j].row_mut(b).assign(&sample.future_controls.row(j));
            target_steps[j].row_mut(b).assign(&sample.target.row(j));
        }
    }
    (window_steps, control_steps, target_steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtmTrainConfig {
    pub hidden: usize,
    pub window: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub train_epochs: usize,
    pub seed: u64,
}

/// One loss-curve row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRow {
    pub phase: String,
    pub epoch: usize,
    pub loss: f64,
}

/// Train the predictor: a one-step pretraining phase that shapes hidden
/// states, then full-horizon rollout training. Deterministic in the seed.
pub fn train_dtm(
    samples: &[WindowedSample],
    state_dim: usize,
    control_dim: usize,
    cfg: &DtmTrainConfig,
) -> Result<(DtmModel, Vec<LogRow>)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no windowed samples to train the DTM".into()));
    }
    let mut model = DtmModel::init(
        state_dim,
        control_dim,
        cfg.hidden,
        cfg.window,
        cfg.horizon,
        crate::seed::derive_seed(cfg.seed, "dtm-init", 0),
    );
    let n_params = model.param_count();
    let mut log = Vec::new();
    let mut shuffle_rng = stream_rng(cfg.seed, "dtm-shuffle", 0);

    for phase in ["pretrain", "train"] {
        let epochs = if phase == "pretrain" { cfg.pretrain_epochs } else { cfg.train_epochs };
        let mut adam = AdamState::new(cfg.learning_rate, n_params);
        for epoch in 0..epochs {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            let mut n_batches = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&WindowedSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let (window_steps, control_steps, target_steps) = pack_batch(&batch);

                let (loss, grads) = if phase == "pretrain" {
                    let (preds, cache) = model.forward_onestep(&window_steps)?;
                    // One-step targets: the state part of the next window row,
                    // then the first horizon state.
                    let mut loss = 0.0;
                    let mut dpreds = Vec::with_capacity(preds.len());
                    let steps = preds.len() as f64;
                    for (s, pred) in preds.iter().enumerate() {
                        let target = if s + 1 < window_steps.len() {
                            window_steps[s + 1].slice(s![.., ..state_dim]).to_owned()
                        } else {
                            target_steps[0].clone()
                        };
                        let (l, mut g) = mse_loss(pred, &target)?;
                        loss += l / steps;
                        g.mapv_inplace(|v| v / steps);
                        dpreds.push(g);
                    }
                    (loss, model.backward_onestep(&cache, &dpreds)?)
                } else {
                    let (preds, cache) = model.forward_rollout(&window_steps, &control_steps)?;
                    let mut loss = 0.0;
                    let mut dpreds = Vec::with_capacity(preds.len());
                    let steps = preds.len() as f64;
                    for (j, pred) in preds.iter().enumerate() {
                        let (l, mut g) = mse_loss(pred, &target_steps[j])?;
                        loss += l / steps;
                        g.mapv_inplace(|v| v / steps);
                        dpreds.push(g);
                    }
                    (loss, model.backward_rollout(&cache, &dpreds)?)
                };

                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("dtm {phase} loss at epoch {epoch}")));
                }
                let mut flat_grads = Vec::with_capacity(n_params);
                grads.flatten(&mut flat_grads);
                clip_global_norm(&mut flat_grads, DTM_CLIP_NORM);
                let mut flat_params = Vec::with_capacity(n_params);
                model.flatten_params(&mut flat_params);
                adam_step(&mut adam, &mut flat_params, &flat_grads)?;
                model.load_params(&flat_params);

                epoch_loss += loss;
                n_batches += 1;
            }
            log.push(LogRow {
                phase: phase.to_string(),
                epoch,
                loss: epoch_loss / n_batches.max(1) as f64,
            });
        }
    }
    Ok((model, log))
}
