//! Conditional reverse-diffusion sampling for audio bandwidth extension.
//!
//! Super-resolution is treated as inpainting of the missing high band: at every
//! reverse step the low band of the denoised estimate is replaced by the observed
//! low-resolution signal, optionally followed by a manifold-constrained gradient
//! (MCG) correction. The sampler works with any [`predictor::NoisePredictor`].
//!
//! Module map:
//! - [`signal`]: waveforms, orthonormal real FFT, STFT/ISTFT.
//! - [`resample`]: downsampling, upsampling and the composite lowpass `F`.
//! - [`schedule`]: log-SNR schedules and reverse-posterior coefficients.
//! - [`predictor`]: noise predictor contract, Gaussian MMSE predictors, toy UDM.
//! - [`training`]: diffusion losses, VLB, Adam/EMA training loop.
//! - [`sampler`]: unconditional and conditional ancestral sampling.
//! - [`oracle`]: closed-form Gaussian posteriors used as ground truth.
//! - [`metrics`]: LSD, LSD-LF and band energy diagnostics.
//! - [`synth`]: synthetic corpora for desk-scale experiments.

pub mod error;
pub mod metrics;
pub mod oracle;
pub mod predictor;
pub mod resample;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod signal;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use signal::{Spectrum, StftConfig, Waveform, Window};
