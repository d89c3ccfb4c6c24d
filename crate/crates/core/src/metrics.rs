//! Log-spectral distance and band energy diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::signal::{half_spectrum_energy, rfft_any, stft, StftConfig, Waveform, Window};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogScale {
    /// `log10(|S|² + ε)`.
    #[default]
    Power,
    /// `log10(|S| + ε)`; half the power-scale distance when ε is negligible.
    Magnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsdConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
    pub epsilon: f64,
    /// `[f_lo, f_hi)` in Hz; bins whose center frequency falls outside are ignored.
    pub band: Option<[f64; 2]>,
    pub scale: LogScale,
}

impl Default for LsdConfig {
    fn default() -> Self {
        Self {
            frame_length: 2048,
            hop: 512,
            window: Window::Hann,
            epsilon: 1e-9,
            band: None,
            scale: LogScale::Power,
        }
    }
}

impl LsdConfig {
    pub fn with_band(mut self, lo: f64, hi: f64) -> Self {
        self.band = Some([lo, hi]);
        self
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        StftConfig::new(self.frame_length, self.hop, self.window)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        self.stft_config()?;
        ensure!(self.epsilon > 0.0, "power floor must be positive");
        if let Some([lo, hi]) = self.band {
            ensure!(
                lo >= 0.0 && lo < hi && hi <= sample_rate as f64 / 2.0 + 1e-9,
                "band [{lo}, {hi}) must lie within [0, {}]",
                sample_rate as f64 / 2.0
            );
        }
        Ok(())
    }

    fn bin_range(&self, sample_rate: u32) -> Result<(usize, usize)> {
        let n = self.frame_length;
        let bins = n / 2 + 1;
        let (lo, hi) = match self.band {
            None => return Ok((0, bins)),
            Some([lo, hi]) => (lo, hi),
        };
        let freq = |k: usize| k as f64 * sample_rate as f64 / n as f64;
        let first = (0..bins).find(|&k| freq(k) >= lo).unwrap_or(bins);
        let last = (0..bins).rev().find(|&k| freq(k) < hi).map(|k| k + 1).unwrap_or(0);
        ensure!(first < last, "band [{lo}, {hi}) contains no frequency bins");
        Ok((first, last))
    }
}

/// Mean over frames of the RMS (over in-band bins) log-spectral difference.
pub fn lsd(reference: &Waveform, estimate: &Waveform, cfg: &LsdConfig) -> Result<f64> {
    ensure!(
        reference.sample_rate() == estimate.sample_rate(),
        "sample rates differ ({} vs {})",
        reference.sample_rate(),
        estimate.sample_rate()
    );
    ensure!(
        reference.len() == estimate.len(),
        "lengths differ ({} vs {})",
        reference.len(),
        estimate.len()
    );
    cfg.validate(reference.sample_rate())?;
    let (lo, hi) = cfg.bin_range(reference.sample_rate())?;
    let stft_cfg = cfg.stft_config()?;
    let a = stft(reference, &stft_cfg)?;
    let b = stft(estimate, &stft_cfg)?;
    let eps = cfg.epsilon;
    let level = |c: num_complex::Complex64| match cfg.scale {
        LogScale::Power => (c.norm_sqr() + eps).log10(),
        LogScale::Magnitude => (c.norm() + eps).log10(),
    };
    let per_frame: f64 = a
        .iter()
        .zip(&b)
        .map(|(fa, fb)| {
            let sq: f64 = fa.bins[lo..hi]
                .iter()
                .zip(&fb.bins[lo..hi])
                .map(|(x, y)| (level(*x) - level(*y)).powi(2))
                .sum();
            (sq / (hi - lo) as f64).sqrt()
        })
        .sum();
    Ok(per_frame / a.len() as f64)
}

/// LSD restricted to bins below `h/2`.
pub fn lsd_lf(reference: &Waveform, estimate: &Waveform, h: u32, cfg: &LsdConfig) -> Result<f64> {
    let rate = reference.sample_rate();
    ensure!(
        h > 0 && h < rate,
        "low-band edge {}/2 Hz must lie below the Nyquist frequency {} Hz",
        h,
        rate / 2
    );
    let cfg = cfg.clone().with_band(0.0, h as f64 / 2.0);
    lsd(reference, estimate, &cfg)
}

/// Fraction of energy at frequencies at or above `split_hz`, over the whole signal.
/// Silence gives 0.
pub fn band_energy_ratio(x: &Waveform, split_hz: f64) -> Result<f64> {
    let nyq = x.sample_rate() as f64 / 2.0;
    ensure!(
        split_hz > 0.0 && split_hz < nyq,
        "split {split_hz} Hz must lie in (0, {nyq})"
    );
    let n = x.len();
    let bins = rfft_any(x.samples());
    let total = half_spectrum_energy(&bins, n);
    if total == 0.0 {
        return Ok(0.0);
    }
    let first = (split_hz * n as f64 / x.sample_rate() as f64).ceil() as usize;
    let mut high = bins.clone();
    for b in high.iter_mut().take(first.min(bins.len())) {
        *b = num_complex::Complex64::new(0.0, 0.0);
    }
    Ok(half_spectrum_energy(&high, n) / total)
}
