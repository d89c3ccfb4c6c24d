//! Diffusion losses, the variational bound and the Adam/EMA training loop.
//!
//! Losses are reported in nats. The continuous-time loss is the weighted noise
//! regression `(δmax − δmin)/2 · ‖ε − ε̃(z_υ; υ)‖²` with `υ ~ U(δmin, δmax)`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::predictor::{denoise, AdamSettings, NoisePredictor, ParamGradient, ToyUdm};
use crate::rng::{normal_vec, stream};
use crate::schedule::{continuous_latent, sigmoid, NoiseSchedule, ScheduleEndpoints};
use crate::signal::Waveform;

/// One stochastic draw of the continuous-time loss.
#[derive(Clone, Debug)]
pub struct LossSample {
    pub loss: f64,
    pub upsilon: f64,
    /// Gradient of `loss` w.r.t. the predictor parameters (empty for parameter-free
    /// predictors).
    pub grad: Vec<f64>,
}

/// Continuous-time loss for fixed noise `eps` and log-SNR `upsilon`, with its parameter
/// gradient.
pub fn continuous_diffusion_loss_at<P: ParamGradient + ?Sized>(
    predictor: &P,
    endpoints: &ScheduleEndpoints,
    x: &[f64],
    eps: &[f64],
    upsilon: f64,
) -> Result<LossSample> {
    let z = continuous_latent(endpoints, upsilon, x, eps)?;
    let range = endpoints.range();
    let mut loss = 0.0;
    let (_, grad) = predictor.predict_and_param_grad(&z, upsilon, &mut |pred: &[f64]| {
        loss = 0.5 * range * eps.iter().zip(pred).map(|(e, p)| (e - p).powi(2)).sum::<f64>();
        eps.iter().zip(pred).map(|(e, p)| -range * (e - p)).collect()
    })?;
    Ok(LossSample {
        loss,
        upsilon,
        grad,
    })
}

/// Draws `ε ~ N(0, I)` and `υ ~ U(δmin, δmax)` and evaluates the continuous-time loss.
pub fn continuous_diffusion_loss<P: ParamGradient + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    endpoints: &ScheduleEndpoints,
    x: &[f64],
    rng: &mut R,
) -> Result<LossSample> {
    let eps = normal_vec(rng, x.len());
    let upsilon = rng.random_range(endpoints.delta_min..=endpoints.delta_max);
    continuous_diffusion_loss_at(predictor, endpoints, x, &eps, upsilon)
}

/// Loss value only, for predictors without trainable parameters.
pub fn continuous_diffusion_loss_value<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    endpoints: &ScheduleEndpoints,
    x: &[f64],
    rng: &mut R,
) -> Result<f64> {
    let eps = normal_vec(rng, x.len());
    let upsilon = rng.random_range(endpoints.delta_min..=endpoints.delta_max);
    let z = continuous_latent(endpoints, upsilon, x, &eps)?;
    let pred = predictor.predict(&z, upsilon)?;
    Ok(0.5 * endpoints.range() * eps.iter().zip(&pred).map(|(e, p)| (e - p).powi(2)).sum::<f64>())
}

/// KL between `q(z_{t−1}|z_t, x)` and `p(z_{t−1}|z_t)` for one latent draw. Both share the
/// posterior variance, so only the mean difference contributes.
fn step_kl<P: NoisePredictor + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    t: usize,
    x: &[f64],
    eps: &[f64],
) -> Result<f64> {
    let coeffs = schedule.posterior_coeffs(t)?;
    if !(coeffs.var > 0.0) {
        return Err(Error::Internal(format!(
            "posterior variance {} at step {t} is not positive",
            coeffs.var
        )));
    }
    let z = schedule.forward_marginal(t, x, eps)?;
    let delta = schedule.delta(t);
    let x_hat = denoise(&z, &predictor.predict(&z, delta)?, delta);
    let sq: f64 = x.iter().zip(&x_hat).map(|(a, b)| (coeffs.coef_x * (a - b)).powi(2)).sum();
    Ok(sq / (2.0 * coeffs.var))
}

/// Monte Carlo estimate of `Σ_{t=2}^{T} E_q[KL(q(z_{t−1}|z_t,x) ‖ p(z_{t−1}|z_t))]` using
/// `n_mc` latent draws per step.
pub fn discrete_diffusion_loss<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    x: &[f64],
    rng: &mut R,
    n_mc: usize,
) -> Result<f64> {
    ensure!(n_mc >= 1, "n_mc must be at least 1");
    let mut total = 0.0;
    for t in 2..=schedule.steps() {
        let mut acc = 0.0;
        for _ in 0..n_mc {
            let eps = normal_vec(rng, x.len());
            acc += step_kl(predictor, schedule, t, x, &eps)?;
        }
        total += acc / n_mc as f64;
    }
    Ok(total)
}

/// Terms of the variational bound. `total` is the negative bound (a loss).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VlbReport {
    /// `E_q[log p(x|z_1)]`.
    pub reconstruction_term: f64,
    /// `KL(q(z_T|x) ‖ N(0, I))`.
    pub prior_kl: f64,
    pub diffusion_loss: f64,
    /// `−(reconstruction_term − prior_kl − diffusion_loss)`.
    pub total: f64,
}

/// `log N(x; z_1/α_1, exp(−δmax) I)`.
pub fn log_likelihood_given_z1(endpoints: &ScheduleEndpoints, x: &[f64], z1: &[f64]) -> Result<f64> {
    ensure!(x.len() == z1.len(), "signal and latent lengths differ");
    let d = endpoints.delta_max;
    let alpha = sigmoid(d).sqrt();
    let sq: f64 = x.iter().zip(z1).map(|(x, z)| (x - z / alpha).powi(2)).sum();
    Ok(-0.5 * x.len() as f64 * ((2.0 * PI).ln() - d) - 0.5 * d.exp() * sq)
}

/// `E_{q(z_1|x)}[log p(x|z_1)]` in closed form: with `z_1 = α_1 x + σ_1 ε` the residual
/// `x − z_1/α_1` is `−(σ_1/α_1) ε` and `σ_1²/α_1² = exp(−δmax)`, so the quadratic term
/// averages to `n/2`.
pub fn expected_reconstruction(endpoints: &ScheduleEndpoints, n: usize) -> f64 {
    -0.5 * n as f64 * ((2.0 * PI).ln() - endpoints.delta_max + 1.0)
}

/// `½ Σ (α_T² x² + σ_T² − 1 − log σ_T²)`.
pub fn prior_kl(schedule: &NoiseSchedule, x: &[f64]) -> f64 {
    let t = schedule.steps();
    let (a2, s2) = (schedule.alpha_sq(t), schedule.sigma_sq(t));
    0.5 * x.iter().map(|v| a2 * v * v + s2 - 1.0 - s2.ln()).sum::<f64>()
}

pub fn vlb<P: NoisePredictor + ?Sized, R: Rng + ?Sized>(
    predictor: &P,
    schedule: &NoiseSchedule,
    x: &[f64],
    rng: &mut R,
    n_mc: usize,
) -> Result<VlbReport> {
    let reconstruction_term = expected_reconstruction(&schedule.endpoints(), x.len());
    let prior_kl = prior_kl(schedule, x);
    let diffusion_loss = discrete_diffusion_loss(predictor, schedule, x, rng, n_mc)?;
    Ok(VlbReport {
        reconstruction_term,
        prior_kl,
        diffusion_loss,
        total: -(reconstruction_term - prior_kl - diffusion_loss),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: u64,
    pub batch: usize,
    pub ema_momentum: f64,
    pub segment_length: usize,
    pub seed: u64,
    pub endpoints: ScheduleEndpoints,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Log a record every this many steps (the last step is always logged).
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            steps: 1000,
            batch: 4,
            ema_momentum: 0.9999,
            segment_length: 256,
            seed: 0,
            endpoints: ScheduleEndpoints::default(),
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning rate must be positive"
        );
        ensure!(
            (0.0..1.0).contains(&self.ema_momentum),
            "EMA momentum must be in [0, 1)"
        );
        ensure!(self.batch > 0, "batch must be positive");
        ensure!(self.segment_length > 0, "segment length must be positive");
        ensure!(
            (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2),
            "Adam betas must be in [0, 1)"
        );
        ensure!(self.adam_epsilon > 0.0, "Adam epsilon must be positive");
        ensure!(self.log_every > 0, "log interval must be positive");
        self.endpoints.validate()
    }

    pub fn adam_settings(&self) -> AdamSettings {
        AdamSettings {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    settings: AdamSettings,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(settings: AdamSettings, n: usize) -> Self {
        Self {
            settings,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f32], grad: &[f64]) {
        let s = &self.settings;
        self.step += 1;
        let bc1 = 1.0 - s.beta1.powi(self.step as i32);
        let bc2 = 1.0 - s.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = s.beta1 * *m + (1.0 - s.beta1) * g;
            *v = s.beta2 * *v + (1.0 - s.beta2) * g * g;
            let upd = s.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + s.epsilon);
            *p = (*p as f64 - upd) as f32;
        }
    }
}

/// Exponential moving average of parameters, accumulated in 64-bit.
#[derive(Clone, Debug)]
pub struct Ema {
    momentum: f64,
    values: Vec<f64>,
}

impl Ema {
    pub fn new(momentum: f64, init: &[f32]) -> Self {
        Self {
            momentum,
            values: init.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn update(&mut self, params: &[f32]) {
        let m = self.momentum;
        for (e, p) in self.values.iter_mut().zip(params) {
            *e = m * *e + (1.0 - m) * *p as f64;
        }
    }

    pub fn values(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    /// Mean continuous-time loss over the batch at this step.
    pub loss: f64,
    /// Exponentially smoothed training loss (factor 0.99).
    pub ema_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub raw: ToyUdm<f32>,
    pub ema: ToyUdm<f32>,
    pub history: Vec<LogRecord>,
    pub steps_completed: u64,
    /// Step at which a non-finite loss or gradient stopped training. Parameters are
    /// those from before that step.
    pub diverged_at: Option<u64>,
}

/// Random crop of `len` samples from a random corpus item; shorter items are zero-padded.
fn random_segment<R: Rng + ?Sized>(corpus: &[Waveform], len: usize, rng: &mut R) -> Vec<f64> {
    let item = &corpus[rng.random_range(0..corpus.len())];
    let s = item.samples();
    if s.len() <= len {
        let mut out = s.to_vec();
        out.resize(len, 0.0);
        return out;
    }
    let start = rng.random_range(0..=s.len() - len);
    s[start..start + len].to_vec()
}

/// Trains `model` on random crops of `corpus`. Batch items are processed in parallel,
/// each with its own RNG stream, so results do not depend on the thread count.
pub fn train(
    cfg: &TrainConfig,
    corpus: &[Waveform],
    model: ToyUdm<f32>,
    mut log: impl FnMut(&LogRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure!(!corpus.is_empty(), "training corpus is empty");
    let mut model = model;
    let n = model.params().len();
    let mut adam = Adam::new(cfg.adam_settings(), n);
    let mut ema = Ema::new(cfg.ema_momentum, model.params());
    let mut history = Vec::new();
    let mut smoothed: Option<f64> = None;
    let endpoints = cfg.endpoints;

    for step in 1..=cfg.steps {
        let results: Vec<Result<LossSample>> = (0..cfg.batch)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(cfg.seed, (step - 1) * cfg.batch as u64 + b as u64);
                let x = random_segment(corpus, cfg.segment_length, &mut rng);
                continuous_diffusion_loss(&model, &endpoints, &x, &mut rng)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; n];
        for r in results {
            let r = r?;
            loss += r.loss;
            for (g, v) in grad.iter_mut().zip(&r.grad) {
                *g += v;
            }
        }
        let scale = 1.0 / cfg.batch as f64;
        loss *= scale;
        grad.iter_mut().for_each(|g| *g *= scale);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(TrainOutcome {
                ema: ToyUdm::from_params(model.config().clone(), ema.values())?,
                raw: model,
                history,
                steps_completed: step - 1,
                diverged_at: Some(step),
            });
        }
        let prev = model.params().to_vec();
        adam.update(model.params_mut(), &grad);
        if model.params().iter().any(|p| !p.is_finite()) {
            model.params_mut().copy_from_slice(&prev);
            return Ok(TrainOutcome {
                ema: ToyUdm::from_params(model.config().clone(), ema.values())?,
                raw: model,
                history,
                steps_completed: step - 1,
                diverged_at: Some(step),
            });
        }
        ema.update(model.params());
        let s = match smoothed {
            None => loss,
            Some(s) => 0.99 * s + 0.01 * loss,
        };
        smoothed = Some(s);
        if step % cfg.log_every == 0 || step == cfg.steps {
            let rec = LogRecord {
                step,
                loss,
                ema_loss: s,
            };
            log(&rec);
            history.push(rec);
        }
    }
    Ok(TrainOutcome {
        ema: ToyUdm::from_params(model.config().clone(), ema.values())?,
        raw: model,
        history,
        steps_completed: cfg.steps,
        diverged_at: None,
    })
}

/// Mean continuous-time loss over `draws` fixed (ε, υ) draws per signal, seeded so that
/// different predictors see identical noise.
pub fn evaluate_continuous_loss<P: NoisePredictor + ?Sized>(
    predictor: &P,
    endpoints: &ScheduleEndpoints,
    signals: &[Vec<f64>],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    ensure!(!signals.is_empty() && draws > 0, "need signals and draws");
    let per_signal: Vec<Result<f64>> = signals
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = stream(seed, i as u64);
            let mut acc = 0.0;
            for _ in 0..draws {
                acc += continuous_diffusion_loss_value(predictor, endpoints, x, &mut rng)?;
            }
            Ok(acc / draws as f64)
        })
        .collect();
    let mut total = 0.0;
    for r in per_signal {
        total += r?;
    }
    Ok(total / signals.len() as f64)
}
