//! The noise-predictor contract `ε̂(z; δ)` and its implementations.
//!
//! A predictor maps a latent `z` at log-SNR `δ` to an estimate of the noise that was
//! mixed into it. The denoised estimate follows as `x̂ = (z − σ·ε̂)/α`. Samplers only
//! see this trait, so analytic and neural predictors are interchangeable.

mod checkpoint;
mod gaussian;
mod udm;

pub use checkpoint::{AdamSettings, Checkpoint, CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC};
pub use gaussian::{
    gaussian_mmse_predict, gaussian_mmse_vjp, DenseGaussianPredictor, DiagonalGaussianPredictor,
    GaussianPriorSpec, WhiteGaussianPredictor,
};
pub use udm::{Activation, Real, ToyUdm, ToyUdmConfig};

use crate::error::Result;

/// Reverse-mode closure: maps a cotangent on the prediction to a gradient w.r.t. `z`.
pub type Pullback<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a>;

pub trait NoisePredictor: Send + Sync {
    /// `ε̂(z; δ)`, same length as `z`.
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>>;

    /// Gradient of `⟨predict(z, δ), cotangent⟩` with respect to `z`.
    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>>;

    /// Prediction together with a pullback at the same point. Implementations with an
    /// expensive forward pass override this to reuse it.
    fn predict_with_pullback<'a>(
        &'a self,
        z: &'a [f64],
        delta: f64,
    ) -> Result<(Vec<f64>, Pullback<'a>)> {
        let out = self.predict(z, delta)?;
        Ok((out, Box::new(move |c: &[f64]| self.vjp(z, delta, c))))
    }
}

/// Predictors with trainable parameters.
pub trait ParamGradient: NoisePredictor {
    fn num_params(&self) -> usize;

    /// Runs the forward pass, asks `cotangent` for the gradient of the loss w.r.t. the
    /// prediction, and returns the prediction and the gradient w.r.t. the parameters.
    fn predict_and_param_grad(
        &self,
        z: &[f64],
        delta: f64,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for &P {
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        (**self).predict(z, delta)
    }

    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>> {
        (**self).vjp(z, delta, cotangent)
    }

    fn predict_with_pullback<'a>(
        &'a self,
        z: &'a [f64],
        delta: f64,
    ) -> Result<(Vec<f64>, Pullback<'a>)> {
        (**self).predict_with_pullback(z, delta)
    }
}

/// Always predicts zero noise. The reference point for "beats the trivial predictor".
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&self, z: &[f64], _delta: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; z.len()])
    }

    fn vjp(&self, z: &[f64], _delta: f64, _cotangent: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; z.len()])
    }
}

impl ParamGradient for ZeroPredictor {
    fn num_params(&self) -> usize {
        0
    }

    fn predict_and_param_grad(
        &self,
        z: &[f64],
        _delta: f64,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = vec![0.0; z.len()];
        let _ = cotangent(&out);
        Ok((out, Vec::new()))
    }
}

/// `x̂ = (z − σ·ε̂)/α` with `α² = sigmoid(δ)`, `σ² = sigmoid(−δ)`.
pub fn denoise(z: &[f64], eps_hat: &[f64], delta: f64) -> Vec<f64> {
    let alpha = crate::schedule::sigmoid(delta).sqrt();
    let sigma = crate::schedule::sigmoid(-delta).sqrt();
    z.iter()
        .zip(eps_hat)
        .map(|(z, e)| (z - sigma * e) / alpha)
        .collect()
}
