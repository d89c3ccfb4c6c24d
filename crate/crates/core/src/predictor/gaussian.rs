//! Closed-form MMSE noise predictors for Gaussian priors.
//!
//! If `x ~ N(0, C)` and `z = αx + σε`, the optimal noise estimate is linear in `z`:
//! `ε̂ = σ (α²C + σ²I)⁻¹ z`. It is also symmetric, so its vector-Jacobian product is the
//! same map applied to the cotangent. These predictors are exact, which makes them the
//! ground truth for checking the samplers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use super::{NoisePredictor, ParamGradient};
use crate::error::{ensure, Result};
use crate::rng::normal_vec;
use crate::schedule::sigmoid;
use crate::signal::{irfft_any, rfft_any};

/// Stationary Gaussian prior: independent frequency bins with variances `psd[k]` under the
/// orthonormal DFT of a `frame_length`-sample signal.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPriorSpec {
    psd: Vec<f64>,
    frame_length: usize,
}

impl GaussianPriorSpec {
    pub fn new(psd: Vec<f64>, frame_length: usize) -> Result<Self> {
        ensure!(frame_length >= 1, "frame length must be positive");
        ensure!(
            psd.len() == frame_length / 2 + 1,
            "expected {} psd entries for frame length {frame_length}, got {}",
            frame_length / 2 + 1,
            psd.len()
        );
        ensure!(
            psd.iter().all(|v| v.is_finite() && *v > 0.0),
            "psd entries must be positive and finite"
        );
        Ok(Self { psd, frame_length })
    }

    pub fn white(frame_length: usize, variance: f64) -> Result<Self> {
        Self::new(vec![variance; frame_length / 2 + 1], frame_length)
    }

    /// `low` below bin `split`, `high` from `split` on.
    pub fn two_level(frame_length: usize, split: usize, low: f64, high: f64) -> Result<Self> {
        let psd = (0..=frame_length / 2)
            .map(|k| if k < split { low } else { high })
            .collect();
        Self::new(psd, frame_length)
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn bins(&self) -> usize {
        self.psd.len()
    }

    /// One draw from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let white = normal_vec(rng, self.frame_length);
        let mut bins = rfft_any(&white);
        for (b, v) in bins.iter_mut().zip(&self.psd) {
            *b *= v.sqrt();
        }
        irfft_any(&bins, self.frame_length)
    }

    /// Multiplies bin `k` by `gain(psd[k])`.
    fn apply_diagonal(&self, z: &[f64], gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        ensure!(
            z.len() == self.frame_length,
            "latent length {} does not match prior frame length {}",
            z.len(),
            self.frame_length
        );
        let mut bins = rfft_any(z);
        for (b, v) in bins.iter_mut().zip(&self.psd) {
            *b *= gain(*v);
        }
        Ok(irfft_any(&bins, self.frame_length))
    }
}

/// Per bin, `E[X|Z] = α v Z / (α² v + σ²)` and `ε̂ = (Z − α E[X|Z]) / σ = σ Z / (α² v + σ²)`.
pub fn gaussian_mmse_predict(prior: &GaussianPriorSpec, z: &[f64], delta: f64) -> Result<Vec<f64>> {
    let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
    let s = s2.sqrt();
    prior.apply_diagonal(z, |v| s / (a2 * v + s2))
}

/// Transpose of [`gaussian_mmse_predict`]; the map is a real diagonal in an orthonormal
/// basis, hence self-adjoint.
pub fn gaussian_mmse_vjp(
    prior: &GaussianPriorSpec,
    z: &[f64],
    delta: f64,
    cotangent: &[f64],
) -> Result<Vec<f64>> {
    ensure!(
        z.len() == cotangent.len(),
        "cotangent length {} does not match latent length {}",
        cotangent.len(),
        z.len()
    );
    gaussian_mmse_predict(prior, cotangent, delta)
}

/// [`NoisePredictor`] wrapper around a stationary Gaussian prior.
#[derive(Clone, Debug)]
pub struct DiagonalGaussianPredictor {
    pub prior: GaussianPriorSpec,
}

impl DiagonalGaussianPredictor {
    pub fn new(prior: GaussianPriorSpec) -> Self {
        Self { prior }
    }

    /// `E[x | z]` at log-SNR `delta`.
    pub fn posterior_mean(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
        let a = a2.sqrt();
        self.prior.apply_diagonal(z, |v| a * v / (a2 * v + s2))
    }
}

impl NoisePredictor for DiagonalGaussianPredictor {
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        gaussian_mmse_predict(&self.prior, z, delta)
    }

    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>> {
        gaussian_mmse_vjp(&self.prior, z, delta, cotangent)
    }
}

/// I.i.d. `N(0, variance)` prior; works elementwise on any length, including scalars.
#[derive(Clone, Copy, Debug)]
pub struct WhiteGaussianPredictor {
    pub variance: f64,
}

impl WhiteGaussianPredictor {
    pub fn new(variance: f64) -> Result<Self> {
        ensure!(
            variance.is_finite() && variance > 0.0,
            "prior variance must be positive"
        );
        Ok(Self { variance })
    }

    fn gain(&self, delta: f64) -> f64 {
        let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
        s2.sqrt() / (a2 * self.variance + s2)
    }
}

impl NoisePredictor for WhiteGaussianPredictor {
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        let g = self.gain(delta);
        Ok(z.iter().map(|v| g * v).collect())
    }

    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            z.len() == cotangent.len(),
            "cotangent length {} does not match latent length {}",
            cotangent.len(),
            z.len()
        );
        self.predict(cotangent, delta)
    }
}

/// The single trainable parameter is the prior variance.
impl ParamGradient for WhiteGaussianPredictor {
    fn num_params(&self) -> usize {
        1
    }

    fn predict_and_param_grad(
        &self,
        z: &[f64],
        delta: f64,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.predict(z, delta)?;
        let cot = cotangent(&out);
        ensure!(cot.len() == z.len(), "cotangent length mismatch");
        // d gain / d variance = −σ α² / (α² v + σ²)²
        let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
        let denom = a2 * self.variance + s2;
        let dgain = -s2.sqrt() * a2 / (denom * denom);
        let grad = dgain * z.iter().zip(&cot).map(|(z, c)| z * c).sum::<f64>();
        Ok((out, vec![grad]))
    }
}

/// Gaussian prior with an arbitrary covariance, handled through its eigendecomposition.
/// Low-rank-plus-small-diagonal covariances model signals that live near a subspace,
/// where cross-band structure matters.
#[derive(Clone, Debug)]
pub struct DenseGaussianPredictor {
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl DenseGaussianPredictor {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        ensure!(covariance.is_square(), "covariance must be square");
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        ensure!(
            eig.eigenvalues.iter().all(|v| *v > 0.0),
            "covariance must be positive definite"
        );
        Ok(Self {
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.eigvecs * DMatrix::from_diagonal(&self.eigvals) * self.eigvecs.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w = DVector::from_vec(normal_vec(rng, self.dim()));
        let scaled = w.component_mul(&self.eigvals.map(f64::sqrt));
        (&self.eigvecs * scaled).iter().copied().collect()
    }

    fn apply_spectral(&self, z: &[f64], gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        ensure!(
            z.len() == self.dim(),
            "latent length {} does not match prior dimension {}",
            z.len(),
            self.dim()
        );
        let coords = self.eigvecs.tr_mul(&DVector::from_column_slice(z));
        let scaled = DVector::from_iterator(
            coords.len(),
            coords.iter().zip(self.eigvals.iter()).map(|(c, l)| c * gain(*l)),
        );
        Ok((&self.eigvecs * scaled).iter().copied().collect())
    }

    pub fn posterior_mean(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
        let a = a2.sqrt();
        self.apply_spectral(z, |l| a * l / (a2 * l + s2))
    }
}

impl NoisePredictor for DenseGaussianPredictor {
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        let (a2, s2) = (sigmoid(delta), sigmoid(-delta));
        let s = s2.sqrt();
        self.apply_spectral(z, |l| s / (a2 * l + s2))
    }

    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            z.len() == cotangent.len(),
            "cotangent length {} does not match latent length {}",
            cotangent.len(),
            z.len()
        );
        self.predict(cotangent, delta)
    }
}
