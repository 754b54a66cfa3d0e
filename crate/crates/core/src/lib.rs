//! Plug-and-play reconstruction of undersampled multi-coil MRI with a 1D CNN
//! denoiser trained on synthetic complex-valued lines.

pub mod array;
pub mod denoiser;
pub mod error;
pub mod eval;
pub mod formats;
pub mod forward;
pub mod fourier;
pub mod phantom;
pub mod reconstruct;
pub mod rng;
pub mod sampling;
pub mod synthdata;

pub use array::{inner_product, l2_norm, relative_change, ComplexField, ComplexImage, KSpaceStack, RealImage, SignalLine1D, C64};
pub use error::{Error, Result};
pub use rng::{Rng, RNG_ALGORITHM};
