//! The denoiser contract and a small residual 1D CNN.
//!
//! A complex line of length `L` is split into two real channels (real,
//! imaginary) and passed through a stack of same-padded 1D convolutions with
//! ReLU between layers. Convolutions are evaluated as `kernel` shifted matrix
//! products over a zero-padded activation buffer.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{ComplexImage, SignalLine1D, C64};
use crate::error::{Error, Result};
use crate::formats::{check_payload_len, decode_container, encode_container, push_f64s, read_f64s, MODEL_MAGIC};
use crate::rng::Rng;
use crate::synthdata::DatasetRecord;

pub const DEFAULT_EPOCHS: usize = 200;
pub const DESK_SCALE_EPOCHS: usize = 30;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_LR_DECAY: f64 = 0.99;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Records per gradient work unit; partial sums are reduced in unit order.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiserKind {
    Identity,
    Cnn1d,
}

impl DenoiserKind {
    pub fn name(self) -> &'static str {
        match self {
            DenoiserKind::Identity => "identity",
            DenoiserKind::Cnn1d => "cnn1d",
        }
    }
}

impl std::fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DenoiserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(DenoiserKind::Identity),
            "cnn1d" => Ok(DenoiserKind::Cnn1d),
            other => Err(Error::invalid(format!("unknown denoiser {other:?}"))),
        }
    }
}

/// Anything that maps a complex line to a denoised line of the same length.
pub trait LineDenoiser: Sync {
    fn denoise_line(&self, line: &SignalLine1D) -> Result<SignalLine1D>;

    /// Shortest accepted line.
    fn min_length(&self) -> usize;

    /// Average of an all-rows pass and an all-columns pass over the same input.
    fn denoise_image(&self, img: &ComplexImage) -> Result<ComplexImage> {
        apply_denoiser_2d(self, img)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityDenoiser;

impl LineDenoiser for IdentityDenoiser {
    fn denoise_line(&self, line: &SignalLine1D) -> Result<SignalLine1D> {
        Ok(line.clone())
    }

    fn min_length(&self) -> usize {
        1
    }

    fn denoise_image(&self, img: &ComplexImage) -> Result<ComplexImage> {
        Ok(img.clone())
    }
}

/// `½(rows + columns)`, each pass denoising every line independently.
pub fn apply_denoiser_2d<D: LineDenoiser + ?Sized>(model: &D, img: &ComplexImage) -> Result<ComplexImage> {
    let (h, w) = (img.height(), img.width());
    let k = model.min_length();
    if h < k || w < k {
        return Err(Error::invalid(format!("image {h}x{w} is smaller than the {k}-sample kernel")));
    }
    let rows: Vec<SignalLine1D> = (0..h)
        .into_par_iter()
        .map(|r| model.denoise_line(&SignalLine1D::from_raw(img.row(r).to_vec())))
        .collect::<Result<_>>()?;
    let cols: Vec<SignalLine1D> = (0..w)
        .into_par_iter()
        .map(|c| model.denoise_line(&SignalLine1D::from_raw((0..h).map(|r| img.get(r, c)).collect())))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(h * w);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.data().iter().enumerate() {
            out.push((v + cols[c].data()[r]) * 0.5);
        }
    }
    Ok(ComplexImage::from_raw(h, w, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Channel counts at each layer boundary; `channels.len() = n_layers + 1`.
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub residual: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { channels: vec![2, 64, 64, 64, 64, 2], kernel_size: 3, residual: true }
    }
}

impl Architecture {
    pub fn n_layers(&self) -> usize {
        self.channels.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        if self.channels[0] != 2 || *self.channels.last().expect("nonempty") != 2 {
            return Err(Error::invalid("first and last layers must carry 2 real channels"));
        }
        if self.channels.contains(&0) {
            return Err(Error::invalid("channel counts must be positive"));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.channels.windows(2).map(|p| p[1] * p[0] * self.kernel_size + p[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    /// `out × in × kernel`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            weights: vec![0.0; out_channels * in_channels * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn weight(&self, o: usize, i: usize, j: usize) -> f64 {
        self.weights[(o * self.in_channels + i) * self.kernel_size + j]
    }

    pub fn weight_mut(&mut self, o: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.weights[(o * self.in_channels + i) * self.kernel_size + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub final_val_loss: Option<f64>,
    pub dataset_hash: String,
    pub seed: u64,
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    pub arch: Architecture,
    pub layers: Vec<ConvLayer>,
    pub meta: TrainingMeta,
}

impl DenoiserModel {
    /// All-zero parameters; with `residual` this is the identity map.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch.channels.windows(2).map(|p| ConvLayer::zeros(p[0], p[1], arch.kernel_size)).collect();
        Ok(Self { arch, layers, meta: TrainingMeta::default() })
    }

    /// Uniform fan-in initialisation, `±sqrt(1 / (in · kernel))` for weights
    /// and biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = Rng::stream(seed, 0x1417);
        for layer in &mut model.layers {
            let bound = (1.0 / (layer.in_channels * layer.kernel_size) as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        model.meta.seed = seed;
        Ok(model)
    }

    /// Builds a model from explicit layers, deriving the architecture.
    pub fn from_layers(layers: Vec<ConvLayer>, residual: bool) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::invalid("a model needs at least one layer"))?;
        let kernel_size = first.kernel_size;
        let mut channels = vec![first.in_channels];
        for l in &layers {
            if l.kernel_size != kernel_size || l.in_channels != *channels.last().expect("nonempty") {
                return Err(Error::invalid("layers do not chain"));
            }
            if l.weights.len() != l.out_channels * l.in_channels * l.kernel_size || l.bias.len() != l.out_channels {
                return Err(Error::invalid("layer parameter lengths disagree with its shape"));
            }
            channels.push(l.out_channels);
        }
        let arch = Architecture { channels, kernel_size, residual };
        arch.validate()?;
        Ok(Self { arch, layers, meta: TrainingMeta::default() })
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    /// Parameters flattened as `[W₁, b₁, W₂, b₂, …]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch { left: vec![self.parameter_count()], right: vec![params.len()] });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn max_channels(&self) -> usize {
        *self.arch.channels.iter().max().expect("nonempty")
    }
}

/// `c[o, t] += Σ_{i,j} W[o, i, j] · xpad[i, t + j]` for a row-major
/// `out × l` output and an `in × (l + k − 1)` padded input.
fn conv_accumulate(layer: &ConvLayer, xpad: &[f64], l: usize, out: &mut [f64]) {
    let (ci, co, k) = (layer.in_channels, layer.out_channels, layer.kernel_size);
    let lp = l + k - 1;
    debug_assert!(xpad.len() >= ci * lp && out.len() >= co * l);
    for j in 0..k {
        // SAFETY: strides describe in-bounds views of `weights` (co × ci),
        // `xpad` (ci × l, offset j) and `out` (co × l).
        unsafe {
            matrixmultiply::dgemm(
                co,
                ci,
                l,
                1.0,
                layer.weights.as_ptr().add(j),
                (ci * k) as isize,
                k as isize,
                xpad.as_ptr().add(j),
                lp as isize,
                1,
                1.0,
                out.as_mut_ptr(),
                l as isize,
                1,
            );
        }
    }
}

/// Per-record activations: `pads[n]` is the zero-padded input to layer `n`.
struct Workspace {
    pads: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Workspace {
    fn new(model: &DenoiserModel, l: usize) -> Self {
        let lp = l + model.arch.kernel_size - 1;
        let pads = model.arch.channels[..model.arch.n_layers()].iter().map(|&c| vec![0.0; c * lp]).collect();
        Self { pads, out: vec![0.0; 2 * l] }
    }
}

fn load_input(ws: &mut Workspace, line: &[C64], pad: usize) {
    let l = line.len();
    let lp = l + 2 * pad;
    let buf = &mut ws.pads[0];
    for (t, z) in line.iter().enumerate() {
        buf[pad + t] = z.re;
        buf[lp + pad + t] = z.im;
    }
}

/// Runs the stack on the line loaded in `ws.pads[0]`, leaving the 2 × l
/// output (including the residual) in `ws.out`.
fn forward_into(model: &DenoiserModel, ws: &mut Workspace, l: usize) {
    let k = model.arch.kernel_size;
    let pad = k / 2;
    let lp = l + k - 1;
    let n = model.layers.len();
    let mut z = vec![0.0; model.max_channels() * l];
    for (idx, layer) in model.layers.iter().enumerate() {
        let co = layer.out_channels;
        let z = &mut z[..co * l];
        for (o, row) in z.chunks_exact_mut(l).enumerate() {
            row.fill(layer.bias[o]);
        }
        conv_accumulate(layer, &ws.pads[idx], l, z);
        if idx + 1 < n {
            let next = &mut ws.pads[idx + 1];
            for o in 0..co {
                let dst = &mut next[o * lp + pad..o * lp + pad + l];
                for (d, &v) in dst.iter_mut().zip(&z[o * l..(o + 1) * l]) {
                    *d = v.max(0.0);
                }
            }
        } else {
            ws.out.copy_from_slice(z);
        }
    }
    if model.arch.residual {
        let input = &ws.pads[0];
        for ch in 0..2 {
            for t in 0..l {
                ws.out[ch * l + t] += input[ch * lp + pad + t];
            }
        }
    }
}

fn output_line(ws: &Workspace, l: usize) -> Vec<C64> {
    (0..l).map(|t| C64::new(ws.out[t], ws.out[l + t])).collect()
}

impl LineDenoiser for DenoiserModel {
    fn denoise_line(&self, line: &SignalLine1D) -> Result<SignalLine1D> {
        let l = line.len();
        if l < self.arch.kernel_size {
            return Err(Error::invalid(format!(
                "line of {l} samples is shorter than the {}-sample kernel",
                self.arch.kernel_size
            )));
        }
        let mut ws = Workspace::new(self, l);
        load_input(&mut ws, line.data(), self.arch.kernel_size / 2);
        forward_into(self, &mut ws, l);
        Ok(SignalLine1D::from_raw(output_line(&ws, l)))
    }

    fn min_length(&self) -> usize {
        self.arch.kernel_size
    }
}

/// Runs `model` on one line; `kind = Identity` passes the line through.
pub fn denoise_line(model: Option<&DenoiserModel>, line: &SignalLine1D) -> Result<SignalLine1D> {
    match model {
        Some(m) => m.denoise_line(line),
        None => IdentityDenoiser.denoise_line(line),
    }
}

fn squared_error(ws: &Workspace, clean: &[C64]) -> f64 {
    let l = clean.len();
    clean
        .iter()
        .enumerate()
        .map(|(t, z)| (ws.out[t] - z.re).powi(2) + (ws.out[l + t] - z.im).powi(2))
        .sum()
}

/// Accumulates `scale · ∂(Σ (out − clean)²)/∂θ` for the record currently
/// run forward in `ws` into `grad` (flattened like [`DenoiserModel::params`]).
fn backward_accumulate(model: &DenoiserModel, ws: &Workspace, clean: &[C64], scale: f64, grad: &mut [f64]) {
    let l = clean.len();
    let k = model.arch.kernel_size;
    let pad = k / 2;
    let lp = l + k - 1;
    let n = model.layers.len();

    let mut offsets = Vec::with_capacity(n);
    let mut at = 0;
    for layer in &model.layers {
        offsets.push(at);
        at += layer.weights.len() + layer.bias.len();
    }

    let mc = model.max_channels();
    let mut dz = vec![0.0; mc * l];
    let mut dxpad = vec![0.0; mc * lp];
    for t in 0..l {
        dz[t] = 2.0 * scale * (ws.out[t] - clean[t].re);
        dz[l + t] = 2.0 * scale * (ws.out[l + t] - clean[t].im);
    }

    for idx in (0..n).rev() {
        let layer = &model.layers[idx];
        let (ci, co) = (layer.in_channels, layer.out_channels);
        let xpad = &ws.pads[idx];
        let (gw, gb) = grad[offsets[idx]..offsets[idx] + layer.weights.len() + co].split_at_mut(layer.weights.len());
        for o in 0..co {
            gb[o] += dz[o * l..(o + 1) * l].iter().sum::<f64>();
        }
        for j in 0..k {
            // SAFETY: dW[:, :, j] (co × ci) += dZ (co × l) · xpad[:, j..j+l]ᵀ
            // with in-bounds strides into each buffer.
            unsafe {
                matrixmultiply::dgemm(
                    co,
                    l,
                    ci,
                    1.0,
                    dz.as_ptr(),
                    l as isize,
                    1,
                    xpad.as_ptr().add(j),
                    1,
                    lp as isize,
                    1.0,
                    gw.as_mut_ptr().add(j),
                    (ci * k) as isize,
                    k as isize,
                );
            }
        }
        if idx == 0 {
            break;
        }
        let dxpad = &mut dxpad[..ci * lp];
        dxpad.fill(0.0);
        for j in 0..k {
            // SAFETY: dXpad[:, j..j+l] (ci × l) += W[:, :, j]ᵀ (ci × co) · dZ.
            unsafe {
                matrixmultiply::dgemm(
                    ci,
                    co,
                    l,
                    1.0,
                    layer.weights.as_ptr().add(j),
                    k as isize,
                    (ci * k) as isize,
                    dz.as_ptr(),
                    l as isize,
                    1,
                    1.0,
                    dxpad.as_mut_ptr().add(j),
                    lp as isize,
                    1,
                );
            }
        }
        // Through the ReLU that produced this layer's input.
        for i in 0..ci {
            for t in 0..l {
                let active = xpad[i * lp + pad + t] > 0.0;
                dz[i * l + t] = if active { dxpad[i * lp + pad + t] } else { 0.0 };
            }
        }
    }
}

fn check_batch(model: &DenoiserModel, batch: &[&DatasetRecord]) -> Result<usize> {
    let first = batch.first().ok_or_else(|| Error::invalid("empty batch"))?;
    let l = first.clean.len();
    if batch.iter().any(|r| r.clean.len() != l || r.noisy.len() != l) {
        return Err(Error::invalid("all records in a batch must share one line length"));
    }
    if l < model.arch.kernel_size {
        return Err(Error::invalid("lines are shorter than the kernel"));
    }
    Ok(l)
}

/// Batch-mean squared error and its exact gradient with respect to
/// [`DenoiserModel::params`]. The mean runs over records and all `2L` real
/// samples of each.
pub fn gradients(model: &DenoiserModel, batch: &[&DatasetRecord]) -> Result<(f64, Vec<f64>)> {
    let l = check_batch(model, batch)?;
    let denom = (batch.len() * 2 * l) as f64;
    let scale = 1.0 / denom;
    let np = model.parameter_count();
    let partials: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(model, l);
            let mut g = vec![0.0; np];
            let mut loss = 0.0;
            for rec in chunk {
                load_input(&mut ws, rec.noisy.data(), model.arch.kernel_size / 2);
                forward_into(model, &mut ws, l);
                loss += squared_error(&ws, rec.clean.data());
                backward_accumulate(model, &ws, rec.clean.data(), scale, &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut total = 0.0;
    let mut grad = vec![0.0; np];
    for (loss, g) in partials {
        total += loss;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((total / denom, grad))
}

/// Mean squared error of the model output against the clean lines.
pub fn mean_squared_error(model: &DenoiserModel, records: &[&DatasetRecord]) -> Result<f64> {
    let l = check_batch(model, records)?;
    let partial: Vec<f64> = records
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(model, l);
            chunk
                .iter()
                .map(|rec| {
                    load_input(&mut ws, rec.noisy.data(), model.arch.kernel_size / 2);
                    forward_into(model, &mut ws, l);
                    squared_error(&ws, rec.clean.data())
                })
                .sum()
        })
        .collect();
    Ok(partial.iter().sum::<f64>() / (records.len() * 2 * l) as f64)
}

/// Mean squared error of leaving the noisy lines untouched.
pub fn baseline_mse(records: &[&DatasetRecord]) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for rec in records {
        se += rec.noisy.data().iter().zip(rec.clean.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        n += 2 * rec.clean.len();
    }
    se / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::ShapeMismatch { left: vec![params.len()], right: vec![grads.len(), state.m.len()] });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            lr_decay: DEFAULT_LR_DECAY,
            seed: 0,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn desk_scale() -> Self {
        Self { epochs: DESK_SCALE_EPOCHS, ..Self::default() }
    }

    /// Learning rate used throughout epoch `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("learning-rate decay must lie in (0, 1]"));
        }
        self.arch.validate()
    }
}

/// Trains a fresh model and returns the parameters with the lowest
/// validation loss. `on_epoch` sees each epoch's statistics as they land.
pub fn train_denoiser(
    train: &[&DatasetRecord],
    validation: &[&DatasetRecord],
    config: &TrainConfig,
    dataset_hash: &str,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<DenoiserModel> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::invalid("training and validation splits must both be nonempty"));
    }
    let mut model = DenoiserModel::init(config.arch.clone(), config.seed)?;
    let mut params = model.params();
    let mut adam = AdamState::new(params.len());
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        Rng::stream(config.seed, epoch as u64 + 1).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&DatasetRecord> = idx.iter().map(|&i| train[i]).collect();
            let (loss, grad) = gradients(&model, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("training loss {loss} at epoch {epoch}")));
            }
            adam_step(&mut params, &grad, &mut adam, lr)?;
            model.set_params(&params)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let val = mean_squared_error(&model, validation)?;
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation loss {val} at epoch {epoch}")));
        }
        let stats = EpochStats { epoch, learning_rate: lr, train_loss: loss_sum / seen as f64, validation_loss: val };
        on_epoch(&stats);
        history.push(stats);
        if best.as_ref().is_none_or(|(b, _, _)| val < *b) {
            best = Some((val, epoch, params.clone()));
        }
    }

    let (val, epoch, p) = best.expect("at least one epoch");
    model.set_params(&p)?;
    model.meta = TrainingMeta {
        epochs_run: config.epochs,
        best_epoch: Some(epoch),
        final_val_loss: Some(val),
        dataset_hash: dataset_hash.to_string(),
        seed: config.seed,
        history,
    };
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    arch: Architecture,
    training_meta: TrainingMeta,
    dtype: String,
}

pub fn encode_model(model: &DenoiserModel) -> Result<Vec<u8>> {
    let header = ModelHeader { arch: model.arch.clone(), training_meta: model.meta.clone(), dtype: "f64-le".into() };
    let mut payload = Vec::with_capacity(8 * model.parameter_count());
    push_f64s(&mut payload, model.params());
    encode_container(MODEL_MAGIC, &header, &payload)
}

pub fn decode_model(bytes: &[u8]) -> Result<DenoiserModel> {
    let (header, payload): (ModelHeader, _) = decode_container(MODEL_MAGIC, bytes)?;
    if header.dtype != "f64-le" {
        return Err(Error::Corrupt(format!("unsupported dtype {}", header.dtype)));
    }
    let mut model = DenoiserModel::zeros(header.arch).map_err(|e| Error::Corrupt(e.to_string()))?;
    check_payload_len(payload, 8 * model.parameter_count())?;
    let params = read_f64s(payload);
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Corrupt("non-finite parameter".into()));
    }
    model.set_params(&params)?;
    model.meta = header.training_meta;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &DenoiserModel) -> Result<()> {
    Ok(std::fs::write(path, encode_model(model)?)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DenoiserModel> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_line(l: usize, rng: &mut Rng) -> SignalLine1D {
        SignalLine1D::new((0..l).map(|_| rng.complex_normal(1.0)).collect()).unwrap()
    }

    fn delta_layer(k: usize, gain: f64) -> ConvLayer {
        let mut layer = ConvLayer::zeros(2, 2, k);
        *layer.weight_mut(0, 0, k / 2) = gain;
        *layer.weight_mut(1, 1, k / 2) = gain;
        layer
    }

    fn small_arch() -> Architecture {
        Architecture { channels: vec![2, 5, 2], kernel_size: 3, residual: true }
    }

    /// Direct-summation forward pass.
    fn naive_forward(model: &DenoiserModel, line: &SignalLine1D) -> Vec<C64> {
        let l = line.len();
        let k = model.arch.kernel_size as isize;
        let pad = k / 2;
        let mut x: Vec<Vec<f64>> = vec![line.data().iter().map(|z| z.re).collect(), line.data().iter().map(|z| z.im).collect()];
        for (idx, layer) in model.layers.iter().enumerate() {
            let mut y = vec![vec![0.0; l]; layer.out_channels];
            for (o, row) in y.iter_mut().enumerate() {
                for (t, v) in row.iter_mut().enumerate() {
                    let mut acc = layer.bias[o];
                    for (i, xi) in x.iter().enumerate() {
                        for j in 0..k {
                            let s = t as isize + j - pad;
                            if s >= 0 && (s as usize) < l {
                                acc += layer.weight(o, i, j as usize) * xi[s as usize];
                            }
                        }
                    }
                    *v = if idx + 1 < model.layers.len() { acc.max(0.0) } else { acc };
                }
            }
            x = y;
        }
        (0..l)
            .map(|t| {
                let mut z = C64::new(x[0][t], x[1][t]);
                if model.arch.residual {
                    z += line.data()[t];
                }
                z
            })
            .collect()
    }

    #[test]
    fn identity_kind_is_bit_exact() {
        let line = random_line(17, &mut Rng::new(1));
        assert_eq!(denoise_line(None, &line).unwrap(), line);
    }

    #[test]
    fn zero_residual_model_is_identity() {
        let model = DenoiserModel::zeros(Architecture::default()).unwrap();
        let line = random_line(40, &mut Rng::new(2));
        assert_eq!(model.denoise_line(&line).unwrap(), line);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let model = DenoiserModel::from_layers(vec![delta_layer(3, 1.0)], false).unwrap();
        let line = random_line(33, &mut Rng::new(3));
        let out = model.denoise_line(&line).unwrap();
        for (a, b) in out.data().iter().zip(line.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = Rng::new(4);
        for arch in [small_arch(), Architecture { channels: vec![2, 7, 3, 2], kernel_size: 5, residual: false }] {
            let model = DenoiserModel::init(arch, 9).unwrap();
            for l in [5, 6, 31] {
                let line = random_line(l, &mut rng);
                let fast = model.denoise_line(&line).unwrap();
                let slow = naive_forward(&model, &line);
                for (a, b) in fast.data().iter().zip(&slow) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn short_lines_rejected() {
        let model = DenoiserModel::init(Architecture { kernel_size: 5, ..small_arch() }, 0).unwrap();
        assert!(model.denoise_line(&random_line(4, &mut Rng::new(0))).is_err());
        assert!(apply_denoiser_2d(&model, &ComplexImage::zeros(4, 10)).is_err());
    }

    #[test]
    fn two_dimensional_rule() {
        let mut rng = Rng::new(5);
        let img = ComplexImage::from_fn(12, 9, |_, _| rng.complex_normal(1.0));
        assert_eq!(apply_denoiser_2d(&IdentityDenoiser, &img).unwrap(), img);
        assert_eq!(IdentityDenoiser.denoise_image(&img).unwrap(), img);

        let double = DenoiserModel::from_layers(vec![delta_layer(3, 2.0)], false).unwrap();
        let out = apply_denoiser_2d(&double, &img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b * 2.0).norm() < 1e-12);
        }

        let base = ComplexImage::from_fn(10, 10, |_, _| rng.complex_normal(1.0));
        let sym = base.add(&base.transpose()).unwrap();
        let model = DenoiserModel::init(small_arch(), 3).unwrap();
        let out = apply_denoiser_2d(&model, &sym).unwrap();
        let t = out.transpose();
        for (a, b) in out.data().iter().zip(t.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn record(l: usize, rng: &mut Rng) -> DatasetRecord {
        let clean = random_line(l, rng);
        crate::synthdata::make_pair(&clean, 10.0, rng).unwrap()
    }

    fn batch_loss(model: &DenoiserModel, batch: &[&DatasetRecord]) -> f64 {
        mean_squared_error(model, batch).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(6);
        let rec = record(12, &mut rng);
        let model = DenoiserModel::init(small_arch(), 1).unwrap();
        let (loss, grad) = gradients(&model, &[&rec]).unwrap();
        assert!((loss - batch_loss(&model, &[&rec])).abs() < 1e-14);
        let base = model.params();
        let h = 1e-5;
        let mut probe = model.clone();
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p).unwrap();
            let plus = batch_loss(&probe, &[&rec]);
            p[i] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let minus = batch_loss(&probe, &[&rec]);
            let fd = (plus - minus) / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs()).max(1e-8);
            assert!((grad[i] - fd).abs() / scale < 1e-4, "param {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn perfect_model_has_zero_gradient() {
        let mut rng = Rng::new(7);
        let clean = random_line(10, &mut rng);
        let rec = DatasetRecord { clean: clean.clone(), noisy: clean, snr_db: 40.0 };
        let model = DenoiserModel::zeros(small_arch()).unwrap();
        let (loss, grad) = gradients(&model, &[&rec]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let mut rng = Rng::new(8);
        let recs: Vec<DatasetRecord> = (0..5).map(|_| record(9, &mut rng)).collect();
        let once: Vec<&DatasetRecord> = recs.iter().collect();
        let twice: Vec<&DatasetRecord> = recs.iter().chain(recs.iter()).collect();
        let model = DenoiserModel::init(small_arch(), 2).unwrap();
        let (l1, g1) = gradients(&model, &once).unwrap();
        let (l2, g2) = gradients(&model, &twice).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn adam_examples() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);

        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.1).unwrap();
        // m̂ = 1, v̂ = 1: p = 1 − 0.1 / (1 + 1e-8).
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);

        let mut a = vec![0.5, -0.25];
        let mut b = vec![-0.25, 0.5];
        let (mut sa, mut sb) = (AdamState::new(2), AdamState::new(2));
        for _ in 0..3 {
            adam_step(&mut a, &[0.3, -0.7], &mut sa, 0.01).unwrap();
            adam_step(&mut b, &[-0.7, 0.3], &mut sb, 0.01).unwrap();
        }
        assert_eq!((a[0], a[1]), (b[1], b[0]));
        assert!(adam_step(&mut a, &[0.0], &mut sa, 0.1).is_err());
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.lr_decay), (200, 128, 0.001, 0.99));
        assert!((cfg.learning_rate_at(1) - 0.00099).abs() < 1e-18);
        assert_eq!(TrainConfig::desk_scale().epochs, 30);
        assert!(TrainConfig { epochs: 0, ..cfg }.validate().is_err());
    }

    fn tiny_data(seed: u64) -> Vec<DatasetRecord> {
        use crate::synthdata::{build_dataset, DatasetConfig, MagnitudeSource};
        let cfg = DatasetConfig { total: 96, line_length: 32, seed, lines_per_image: 8, ..Default::default() };
        build_dataset(&MagnitudeSource::Procedural { height: 32, width: 32 }, &cfg).unwrap().0.records
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let recs = tiny_data(1);
        let (train, val): (Vec<&DatasetRecord>, Vec<&DatasetRecord>) = (recs[..80].iter().collect(), recs[80..].iter().collect());
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 16,
            learning_rate: 3e-3,
            arch: Architecture { channels: vec![2, 8, 8, 2], kernel_size: 3, residual: true },
            ..Default::default()
        };
        let mut seen = Vec::new();
        let a = train_denoiser(&train, &val, &cfg, "h", |s| seen.push(*s)).unwrap();
        let b = train_denoiser(&train, &val, &cfg, "h", |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(seen.len(), 4);
        assert_eq!(a.meta.history, seen);
        let best = seen.iter().map(|s| s.validation_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.meta.final_val_loss, Some(best));
        assert!(best < seen[0].validation_loss || a.meta.best_epoch == Some(0));
        assert!((mean_squared_error(&a, &val).unwrap() - best).abs() < 1e-15);
        assert!(train_denoiser(&[], &val, &cfg, "h", |_| {}).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let mut model = DenoiserModel::init(small_arch(), 4).unwrap();
        model.meta.dataset_hash = "abc".into();
        model.meta.final_val_loss = Some(0.125);
        let bytes = encode_model(&model).unwrap();
        assert_eq!(&bytes[..8], b"DNZRv001");
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(encode_model(&back).unwrap(), bytes);

        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        let mut v = bytes.clone();
        v[4..8].copy_from_slice(b"v007");
        let err = decode_model(&v).unwrap_err();
        assert!(err.to_string().contains("v001") && err.to_string().contains("v007"), "{err}");
    }
}
