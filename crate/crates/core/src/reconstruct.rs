//! Plug-and-play proximal gradient reconstruction.
//!
//! Each iteration takes a gradient step on `½‖y − Ax‖²` and hands the result
//! to a denoiser in place of the proximal operator:
//! `r = x + γ Aᴴ(y − Ax)`, `x ← D(r)`.

use crate::array::{l2_norm, relative_change, ComplexImage, KSpaceStack};
use crate::denoiser::LineDenoiser;
use crate::error::{Error, Result};
use crate::forward::{adjoint, forward, CoilMaps};
use crate::sampling::SamplingMask;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconConfig {
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_TOL }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tol must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖y − Ax⁽ᵏ⁾‖₂` over sampled entries.
    pub residual: f64,
    /// `‖x⁽ᵏ⁾ − x⁽ᵏ⁻¹⁾‖ / ‖x⁽ᵏ⁻¹⁾‖`.
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub image: ComplexImage,
    pub iters_run: usize,
    /// Residual of the zero-filled starting point.
    pub initial_residual: f64,
    pub history: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

pub fn zero_filled(y: &KSpaceStack, maps: &CoilMaps, mask: &SamplingMask) -> Result<ComplexImage> {
    adjoint(y, maps, mask)
}

fn masked_difference_norm(y: &KSpaceStack, ax: &KSpaceStack, mask: &SamplingMask) -> f64 {
    let keep = mask.keep();
    let plane = keep.len();
    y.data()
        .iter()
        .zip(ax.data())
        .enumerate()
        .filter(|(i, _)| keep[i % plane] == 1)
        .map(|(_, (a, b))| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `‖y − Ax‖₂` over the sampled entries.
pub fn residual(y: &KSpaceStack, maps: &CoilMaps, mask: &SamplingMask, x: &ComplexImage) -> Result<f64> {
    let ax = forward(x, maps, mask)?;
    if (y.coils(), y.height(), y.width()) != (ax.coils(), ax.height(), ax.width()) {
        return Err(Error::ShapeMismatch {
            left: vec![y.coils(), y.height(), y.width()],
            right: vec![ax.coils(), ax.height(), ax.width()],
        });
    }
    Ok(masked_difference_norm(y, &ax, mask))
}

/// One iteration from `x` given its predicted k-space `ax`.
fn step_with(
    y: &KSpaceStack,
    maps: &CoilMaps,
    mask: &SamplingMask,
    x: &ComplexImage,
    ax: &KSpaceStack,
    gamma: f64,
    denoiser: &(impl LineDenoiser + ?Sized),
) -> Result<ComplexImage> {
    let grad = adjoint(&y.sub(ax)?, maps, mask)?;
    let r = x.axpy(gamma, &grad)?;
    denoiser.denoise_image(&r)
}

/// A single plug-and-play update `D(x + γ Aᴴ(y − Ax))`.
pub fn pnp_step(
    y: &KSpaceStack,
    maps: &CoilMaps,
    mask: &SamplingMask,
    x: &ComplexImage,
    gamma: f64,
    denoiser: &(impl LineDenoiser + ?Sized),
) -> Result<ComplexImage> {
    let ax = forward(x, maps, mask)?;
    step_with(y, maps, mask, x, &ax, gamma, denoiser)
}

/// Runs the iteration from `x⁽⁰⁾ = Aᴴy`. The tolerance test compares two
/// consecutive denoiser outputs, so it first applies at `k = 2`.
pub fn pnp_reconstruct(
    y: &KSpaceStack,
    maps: &CoilMaps,
    mask: &SamplingMask,
    config: &ReconConfig,
    denoiser: &(impl LineDenoiser + ?Sized),
) -> Result<ReconResult> {
    config.validate()?;
    let mut x = zero_filled(y, maps, mask)?;
    let mut ax = forward(&x, maps, mask)?;
    let initial_residual = masked_difference_norm(y, &ax, mask);
    let mut history = Vec::with_capacity(config.max_iters.min(1024));
    let mut stop_reason = StopReason::MaxIters;

    for k in 1..=config.max_iters {
        let next = step_with(y, maps, mask, &x, &ax, config.gamma, denoiser)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteIterate { iter: k });
        }
        let change = relative_change(&next, &x)?;
        ax = forward(&next, maps, mask)?;
        history.push(IterationRecord { iter: k, residual: masked_difference_norm(y, &ax, mask), relative_change: change });
        x = next;
        if k >= 2 && change < config.tol {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }
    Ok(ReconResult { image: x, iters_run: history.len(), initial_residual, history, stop_reason })
}

/// `‖y‖₂`, the residual of the zero image.
pub fn measurement_norm(y: &KSpaceStack) -> f64 {
    l2_norm(y)
}
