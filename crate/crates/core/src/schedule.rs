//! Log-SNR noise schedules and the Gaussian reverse-posterior coefficients.
//!
//! With log-SNR `δ = log(α²/σ²)` and the variance-preserving constraint `α² + σ² = 1`,
//! `α² = sigmoid(δ)` and `σ² = sigmoid(-δ)`. Step `t = 1` is the least noisy
//! (`δ₁ = δ_max`), step `T` the noisiest (`δ_T = δ_min`). All schedule math is f64.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Floor applied to the transition variance `σ̄²_t` to keep it positive under rounding.
pub const MIN_TRANSITION_VARIANCE: f64 = 1e-20;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEndpoints {
    pub delta_max: f64,
    pub delta_min: f64,
}

impl Default for ScheduleEndpoints {
    fn default() -> Self {
        Self {
            delta_max: 10.0,
            delta_min: 0.0,
        }
    }
}

impl ScheduleEndpoints {
    pub fn new(delta_max: f64, delta_min: f64) -> Result<Self> {
        let e = Self {
            delta_max,
            delta_min,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.delta_max.is_finite() && self.delta_min.is_finite(),
            "schedule endpoints must be finite"
        );
        ensure!(
            self.delta_max > self.delta_min,
            "delta_max ({}) must exceed delta_min ({})",
            self.delta_max,
            self.delta_min
        );
        Ok(())
    }

    pub fn range(&self) -> f64 {
        self.delta_max - self.delta_min
    }
}

/// Coefficients of `q(z_{t-1} | z_t, x) = N(coef_z z_t + coef_x x, var I)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorCoeffs {
    pub coef_z: f64,
    pub coef_x: f64,
    pub var: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    endpoints: ScheduleEndpoints,
    /// `delta[t - 1]` is `δ_t`.
    delta: Vec<f64>,
}

/// `δ_t = (t-1)/(T-1)·δ_min + (T-t)/(T-1)·δ_max` for `t = 1..=T`.
pub fn linear_logsnr_schedule(endpoints: ScheduleEndpoints, steps: usize) -> Result<NoiseSchedule> {
    endpoints.validate()?;
    ensure!(steps >= 2, "a schedule needs at least two steps, got {steps}");
    let last = (steps - 1) as f64;
    let delta = (1..=steps)
        .map(|t| {
            if t == 1 {
                endpoints.delta_max
            } else if t == steps {
                endpoints.delta_min
            } else {
                let a = (t - 1) as f64 / last;
                let b = (steps - t) as f64 / last;
                a * endpoints.delta_min + b * endpoints.delta_max
            }
        })
        .collect();
    Ok(NoiseSchedule { endpoints, delta })
}

impl NoiseSchedule {
    pub fn linear(endpoints: ScheduleEndpoints, steps: usize) -> Result<Self> {
        linear_logsnr_schedule(endpoints, steps)
    }

    pub fn endpoints(&self) -> ScheduleEndpoints {
        self.endpoints
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.delta.len()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        ensure!(
            (1..=self.steps()).contains(&t),
            "step {t} outside 1..={}",
            self.steps()
        );
        Ok(())
    }

    /// `δ_t`, 1-based. Panics outside `1..=T`.
    pub fn delta(&self, t: usize) -> f64 {
        self.delta[t - 1]
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    pub fn alpha_sq(&self, t: usize) -> f64 {
        sigmoid(self.delta(t))
    }

    pub fn sigma_sq(&self, t: usize) -> f64 {
        sigmoid(-self.delta(t))
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha_sq(t).sqrt()
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma_sq(t).sqrt()
    }

    /// Coefficients of the reverse posterior for `2 <= t <= T`.
    pub fn posterior_coeffs(&self, t: usize) -> Result<PosteriorCoeffs> {
        self.check_t(t)?;
        ensure!(t >= 2, "posterior coefficients need t >= 2, got {t}");
        let (d_t, d_prev) = (self.delta(t), self.delta(t - 1));
        let sigma_sq_t = sigmoid(-d_t);
        let sigma_sq_prev = sigmoid(-d_prev);
        let alpha_t = sigmoid(d_t).sqrt();
        let alpha_prev = sigmoid(d_prev).sqrt();
        let alpha_bar = alpha_t / alpha_prev;
        // σ̄² = σ_t² − ᾱ²σ_{t-1}² = σ_t²·(1 − exp(δ_t − δ_{t-1})), expm1 avoids cancellation
        let sigma_bar_sq = (-sigma_sq_t * (d_t - d_prev).exp_m1()).max(MIN_TRANSITION_VARIANCE);
        Ok(PosteriorCoeffs {
            coef_z: alpha_bar * sigma_sq_prev / sigma_sq_t,
            coef_x: alpha_prev * sigma_bar_sq / sigma_sq_t,
            var: sigma_bar_sq * sigma_sq_prev / sigma_sq_t,
        })
    }

    /// `z_t = α_t x + σ_t ε`.
    pub fn forward_marginal(&self, t: usize, x: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        self.check_t(t)?;
        ensure!(
            x.len() == eps.len(),
            "signal and noise lengths differ ({} vs {})",
            x.len(),
            eps.len()
        );
        let (a, s) = (self.alpha(t), self.sigma(t));
        Ok(x.iter().zip(eps).map(|(x, e)| a * x + s * e).collect())
    }
}

/// `z_υ = sqrt(sigmoid(υ))·x + sqrt(sigmoid(-υ))·ε` for `δ_min <= υ <= δ_max`.
pub fn continuous_latent(
    endpoints: &ScheduleEndpoints,
    upsilon: f64,
    x: &[f64],
    eps: &[f64],
) -> Result<Vec<f64>> {
    ensure!(
        upsilon >= endpoints.delta_min && upsilon <= endpoints.delta_max,
        "log-SNR {upsilon} outside [{}, {}]",
        endpoints.delta_min,
        endpoints.delta_max
    );
    ensure!(
        x.len() == eps.len(),
        "signal and noise lengths differ ({} vs {})",
        x.len(),
        eps.len()
    );
    let a = sigmoid(upsilon).sqrt();
    let s = sigmoid(-upsilon).sqrt();
    Ok(x.iter().zip(eps).map(|(x, e)| a * x + s * e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, seeded};

    fn default_schedule(steps: usize) -> NoiseSchedule {
        linear_logsnr_schedule(ScheduleEndpoints::default(), steps).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let s = default_schedule(50);
        assert_eq!(s.delta(1), 10.0);
        assert_eq!(s.delta(50), 0.0);
        assert!((s.delta(25) - 250.0 / 49.0).abs() < 1e-12);
        assert!((s.delta(25) - 5.10204).abs() < 1e-5);
        assert_eq!(default_schedule(2).deltas(), &[10.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(linear_logsnr_schedule(ScheduleEndpoints::default(), 1).is_err());
        assert!(ScheduleEndpoints::new(0.0, 10.0).is_err());
        let s = default_schedule(10);
        assert!(s.posterior_coeffs(1).is_err());
        assert!(s.posterior_coeffs(11).is_err());
        assert!(s.forward_marginal(3, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_marginal_cases() {
        let s = default_schedule(50);
        let x = [0.3, -1.2, 2.0];
        let z = s.forward_marginal(7, &x, &[0.0; 3]).unwrap();
        for (z, x) in z.iter().zip(&x) {
            assert_eq!(*z, s.alpha(7) * x);
        }
        // δ_T = 0: α² = σ² = 1/2
        let eps = [0.5, 0.1, -0.4];
        let z = s.forward_marginal(50, &x, &eps).unwrap();
        for i in 0..3 {
            assert!((z[i] - (x[i] + eps[i]) / 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_marginal_variance_monte_carlo() {
        let s = default_schedule(50);
        let n = 100_000;
        let eps = normal_vec(&mut seeded(11), n);
        let z = s.forward_marginal(30, &vec![0.0; n], &eps).unwrap();
        let var = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var / s.sigma_sq(30) - 1.0).abs() < 0.02);
    }

    #[test]
    fn coefficient_identity_and_direct_formula() {
        let s = default_schedule(50);
        for t in 2..=50 {
            let c = s.posterior_coeffs(t).unwrap();
            assert!((c.coef_z * s.alpha(t) + c.coef_x - s.alpha(t - 1)).abs() < 1e-12);
            assert!(c.var > 0.0);
        }
        // direct evaluation of the closed forms at t = T = 50
        let (a_t, a_p) = (0.5f64.sqrt(), sigmoid(10.0 / 49.0).sqrt());
        let (s2_t, s2_p) = (0.5, sigmoid(-10.0 / 49.0));
        let abar = a_t / a_p;
        let sbar2 = s2_t - abar * abar * s2_p;
        let c = s.posterior_coeffs(50).unwrap();
        assert!((c.coef_z - abar * s2_p / s2_t).abs() < 1e-14);
        assert!((c.coef_x - a_p * sbar2 / s2_t).abs() < 1e-14);
        assert!((c.var - sbar2 * s2_p / s2_t).abs() < 1e-14);
    }

    #[test]
    fn tiny_steps_stay_finite() {
        let e = ScheduleEndpoints::new(10.0, 10.0 - 1e-13).unwrap();
        let s = linear_logsnr_schedule(e, 3).unwrap();
        let c = s.posterior_coeffs(3).unwrap();
        assert!(c.var >= 0.0 && c.var < 1e-12);
        assert!(c.coef_z.is_finite() && c.coef_x.is_finite());
        let abar = s.alpha(3) / s.alpha(2);
        assert!((c.coef_z - 1.0 / abar).abs() < 1e-9);
    }

    #[test]
    fn continuous_latent_cases() {
        let e = ScheduleEndpoints::default();
        let z = continuous_latent(&e, 10.0, &[1.0], &[0.0]).unwrap();
        assert!((z[0] - 0.999_977_3).abs() < 1e-7);
        let z = continuous_latent(&e, 0.0, &[1.0], &[1.0]).unwrap();
        assert!((z[0] - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);
        assert!(continuous_latent(&e, 10.5, &[1.0], &[0.0]).is_err());
        let s = default_schedule(50);
        let x = normal_vec(&mut seeded(1), 8);
        let eps = normal_vec(&mut seeded(2), 8);
        for t in [1, 17, 50] {
            let a = continuous_latent(&e, s.delta(t), &x, &eps).unwrap();
            let b = s.forward_marginal(t, &x, &eps).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn chained_reverse_step_matches_marginal() {
        // z_t ~ q(z_t|x), then z_{t-1} ~ q(z_{t-1}|z_t, x) must be distributed as q(z_{t-1}|x)
        let s = default_schedule(50);
        let t = 20;
        let x = 0.7;
        let c = s.posterior_coeffs(t).unwrap();
        let n = 100_000;
        let mut rng = seeded(21);
        let e1 = normal_vec(&mut rng, n);
        let e2 = normal_vec(&mut rng, n);
        let prev: Vec<f64> = e1
            .iter()
            .zip(&e2)
            .map(|(a, b)| {
                let zt = s.alpha(t) * x + s.sigma(t) * a;
                c.coef_z * zt + c.coef_x * x + c.var.sqrt() * b
            })
            .collect();
        let mean = prev.iter().sum::<f64>() / n as f64;
        let var = prev.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean / (s.alpha(t - 1) * x) - 1.0).abs() < 0.01);
        assert!((var / s.sigma_sq(t - 1) - 1.0).abs() < 0.02);
    }

    #[test]
    fn last_step_alpha_is_sigmoid_of_delta_min() {
        let s = default_schedule(50);
        assert_eq!(s.alpha_sq(50), sigmoid(0.0));
        assert!(s.alpha(50) <= 0.708);
    }
}
