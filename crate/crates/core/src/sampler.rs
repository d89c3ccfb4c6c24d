//! Ancestral sampling, unconditional and conditioned on a low-resolution observation.
//!
//! The conditional sampler is a drop-in replacement for the plain reverse chain: at each
//! step the low band of the denoised estimate is overwritten with the upsampled
//! observation `ŷ`, and optionally the high band of the reverse mean is nudged along the
//! manifold-constrained gradient of `‖ŷ − F(x̂)‖²`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::predictor::NoisePredictor;
use crate::resample::{FilterSpec, LowpassOperator};
use crate::rng::{fill_normal, normal_vec};
use crate::schedule::{NoiseSchedule, ScheduleEndpoints};
use crate::signal::Waveform;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub steps: usize,
    /// MCG step size; 0 disables the correction.
    #[serde(default)]
    pub eta: f64,
    pub filter: FilterSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub endpoints: ScheduleEndpoints,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.steps >= 2, "sampler needs at least two steps, got {}", self.steps);
        ensure!(
            self.eta.is_finite() && self.eta >= 0.0,
            "eta must be finite and non-negative, got {}",
            self.eta
        );
        self.endpoints.validate()?;
        self.filter.validate()
    }

    pub fn mcg_enabled(&self) -> bool {
        self.eta > 0.0
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.endpoints, self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// `‖ŷ − F(x̂)‖₂` before the low band is replaced.
    pub residual: f64,
    /// `‖g‖₂` of the MCG gradient; absent when MCG is off.
    pub grad_norm: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerTrace {
    pub records: Vec<StepRecord>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_finite(z: &[f64], step: usize, what: &str) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step,
            what: what.to_string(),
        })
    }
}

fn final_estimate<P: NoisePredictor + ?Sized>(predictor: &P, schedule: &NoiseSchedule, z: &[f64]) -> Result<Vec<f64>> {
    let delta = schedule.endpoints().delta_max;
    let (a, s) = (schedule.alpha(1), schedule.sigma(1));
    let eps = predictor.predict(z, delta)?;
    let x: Vec<f64> = z.iter().zip(&eps).map(|(z, e)| (z - s * e) / a).collect();
    check_finite(&x, 1, "final estimate")?;
    Ok(x)
}

/// Plain reverse chain from `z_T ~ N(0, I)`; returns the denoised mean at `t = 1`.
pub fn sample_unconditional_slice<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    length: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ensure!(length > 0, "sample length must be positive");
    let mut z = normal_vec(rng, length);
    let mut noise = vec![0.0; length];
    for t in (2..=schedule.steps()).rev() {
        let delta = schedule.delta(t);
        let (a, s) = (schedule.alpha(t), schedule.sigma(t));
        let c = schedule.posterior_coeffs(t)?;
        let eps = predictor.predict(&z, delta)?;
        let sd = c.var.sqrt();
        fill_normal(rng, &mut noise);
        for i in 0..length {
            let x_hat = (z[i] - s * eps[i]) / a;
            z[i] = c.coef_z * z[i] + c.coef_x * x_hat + sd * noise[i];
        }
        check_finite(&z, t - 1, "latent")?;
    }
    final_estimate(predictor, schedule, &z)
}

pub fn sample_unconditional<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    length: usize,
    sample_rate: u32,
    rng: &mut R,
) -> Result<Waveform> {
    Waveform::new(sample_unconditional_slice(predictor, schedule, length, rng)?, sample_rate)
}

/// `g = ∂/∂z ‖ŷ − F(x̂(z))‖²` through the full predictor, with `x̂ = (z − σ ε̂)/α`.
pub fn mcg_gradient<P: NoisePredictor + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    t: usize,
    z: &[f64],
    y_hat: &[f64],
    filter: &LowpassOperator,
) -> Result<Vec<f64>> {
    ensure!(z.len() == y_hat.len(), "latent and observation lengths differ");
    let delta = schedule.delta(t);
    let (a, s) = (schedule.alpha(t), schedule.sigma(t));
    let (eps, pullback) = predictor.predict_with_pullback(z, delta)?;
    let x_hat: Vec<f64> = z.iter().zip(&eps).map(|(z, e)| (z - s * e) / a).collect();
    let fx = filter.apply_slice(&x_hat)?;
    let r: Vec<f64> = y_hat.iter().zip(&fx).map(|(y, f)| y - f).collect();
    gradient_from_residual(&r, a, s, filter, &*pullback)
}

/// `c = −2 Fᵀ r` pulled back through `x̂`; `F` is symmetric so `Fᵀ = F`.
fn gradient_from_residual(
    r: &[f64],
    a: f64,
    s: f64,
    filter: &LowpassOperator,
    pullback: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let c: Vec<f64> = filter.apply_slice(r)?.iter().map(|v| -2.0 * v).collect();
    let jc = pullback(&c)?;
    Ok(c.iter().zip(&jc).map(|(c, j)| (c - s * j) / a).collect())
}

/// Conditional chain on an upsampled observation `ŷ` at the predictor's rate.
/// `on_step` sees one record per reverse step, in order `t = T..2`.
pub fn sample_conditional_slice<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    y_hat: &[f64],
    filter: &LowpassOperator,
    eta: f64,
    rng: &mut R,
    on_step: &mut dyn FnMut(&StepRecord),
) -> Result<Vec<f64>> {
    ensure!(!y_hat.is_empty(), "observation is empty");
    ensure!(eta.is_finite() && eta >= 0.0, "eta must be finite and non-negative");
    let n = y_hat.len();
    let mut z = normal_vec(rng, n);
    let mut noise = vec![0.0; n];
    for t in (2..=schedule.steps()).rev() {
        let delta = schedule.delta(t);
        let (a, s) = (schedule.alpha(t), schedule.sigma(t));
        let c = schedule.posterior_coeffs(t)?;
        let (eps, pullback) = predictor.predict_with_pullback(&z, delta)?;
        let mut x_hat: Vec<f64> = z.iter().zip(&eps).map(|(z, e)| (z - s * e) / a).collect();
        let fx = filter.apply_slice(&x_hat)?;
        let r: Vec<f64> = y_hat.iter().zip(&fx).map(|(y, f)| y - f).collect();
        let g = if eta > 0.0 {
            Some(gradient_from_residual(&r, a, s, filter, &*pullback)?)
        } else {
            None
        };
        drop(pullback);
        on_step(&StepRecord {
            t,
            residual: norm(&r),
            grad_norm: g.as_deref().map(norm),
        });
        // inpainting: low band of x̂ replaced by ŷ
        for i in 0..n {
            x_hat[i] += r[i];
        }
        let mut mu: Vec<f64> = z.iter().zip(&x_hat).map(|(z, x)| c.coef_z * z + c.coef_x * x).collect();
        if let Some(g) = g {
            check_finite(&g, t, "MCG gradient")?;
            let fg = filter.apply_slice(&g)?;
            for i in 0..n {
                mu[i] -= eta * (g[i] - fg[i]);
            }
        }
        let sd = c.var.sqrt();
        fill_normal(rng, &mut noise);
        for i in 0..n {
            z[i] = mu[i] + sd * noise[i];
        }
        check_finite(&z, t - 1, "latent")?;
    }
    final_estimate(predictor, schedule, &z)
}

/// Super-resolves `y` to the filter's source rate.
pub fn sample_conditional<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    y: &Waveform,
    cfg: &SamplerConfig,
    rng: &mut R,
    on_step: &mut dyn FnMut(&StepRecord),
) -> Result<Waveform> {
    cfg.validate()?;
    ensure!(
        y.sample_rate() == cfg.filter.target_rate,
        "observation rate {} does not match filter cutoff rate {}",
        y.sample_rate(),
        cfg.filter.target_rate
    );
    let filter = LowpassOperator::new(cfg.filter.clone())?;
    let y_hat = filter.upsample(y)?;
    let schedule = cfg.schedule()?;
    let x = sample_conditional_slice(predictor, &schedule, y_hat.samples(), &filter, cfg.eta, rng, on_step)?;
    Waveform::new(x, cfg.filter.source_rate)
}
