//! Signal types and transforms shared by every other module.
//!
//! All Fourier transforms here are orthonormal (forward and inverse both scaled by
//! `1/sqrt(N)`), so a per-bin variance in the frequency domain equals the per-sample
//! variance in the time domain. The diffusion reverse step can therefore be written
//! either way without rescaling.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Mono audio at a fixed sample rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Validates a non-empty, finite signal with a positive rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        ensure!(sample_rate > 0, "sample rate must be positive");
        ensure!(!samples.is_empty(), "waveform must contain at least one sample");
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// The zero-length waveform. Only produced by degenerate trims.
    pub fn empty(sample_rate: u32) -> Self {
        Self {
            samples: Vec::new(),
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }
}

/// Non-negative frequency bins of a real frame under the orthonormal DFT.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub frame_length: usize,
}

impl Spectrum {
    pub fn zeros(frame_length: usize) -> Self {
        Self {
            bins: vec![Complex64::new(0.0, 0.0); frame_length / 2 + 1],
            frame_length,
        }
    }

    /// Center frequency of bin `k` in Hz at `sample_rate`.
    pub fn bin_frequency(&self, k: usize, sample_rate: u32) -> f64 {
        k as f64 * sample_rate as f64 / self.frame_length as f64
    }

    /// Time-domain energy implied by the bins (Parseval for the half spectrum).
    pub fn energy(&self) -> f64 {
        half_spectrum_energy(&self.bins, self.frame_length)
    }
}

pub fn half_spectrum_energy(bins: &[Complex64], n: usize) -> f64 {
    let mut e = 0.0;
    for (k, b) in bins.iter().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else {
            2.0
        };
        e += w * b.norm_sqr();
    }
    e
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Orthonormal real DFT of any length; returns bins `0..=n/2`.
pub fn rfft_any(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.truncate(n / 2 + 1);
    for b in buf.iter_mut() {
        *b *= scale;
    }
    // exact zeros for the self-conjugate bins
    buf[0].im = 0.0;
    if n.is_multiple_of(2) {
        buf[n / 2].im = 0.0;
    }
    buf
}

/// Inverse of [`rfft_any`]: rebuilds the Hermitian spectrum for a length-`n` signal.
/// Imaginary parts of self-conjugate bins are ignored.
pub fn irfft_any(bins: &[Complex64], n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    debug_assert_eq!(bins.len(), n / 2 + 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(bins[0].re, 0.0);
    for k in 1..bins.len() {
        if n.is_multiple_of(2) && k == n / 2 {
            buf[k] = Complex64::new(bins[k].re, 0.0);
        } else {
            buf[k] = bins[k];
            buf[n - k] = bins[k].conj();
        }
    }
    plan(n, true).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter().map(|c| c.re * scale).collect()
}

/// Orthonormal real FFT of an even-length frame.
pub fn rfft(frame: &[f64]) -> Result<Spectrum> {
    ensure!(
        frame.len() >= 2 && frame.len().is_multiple_of(2),
        "rfft needs an even frame of length >= 2, got {}",
        frame.len()
    );
    Ok(Spectrum {
        bins: rfft_any(frame),
        frame_length: frame.len(),
    })
}

/// Inverse of [`rfft`]. DC and Nyquist bins must be real.
pub fn irfft(spec: &Spectrum) -> Result<Vec<f64>> {
    let n = spec.frame_length;
    ensure!(
        n >= 2 && n.is_multiple_of(2),
        "spectrum frame length must be even and >= 2, got {n}"
    );
    ensure!(
        spec.bins.len() == n / 2 + 1,
        "expected {} bins for frame length {n}, got {}",
        n / 2 + 1,
        spec.bins.len()
    );
    let scale = spec
        .bins
        .iter()
        .fold(1.0f64, |m, b| m.max(b.re.abs()).max(b.im.abs()));
    let tol = 1e-9 * scale;
    ensure!(
        spec.bins[0].im.abs() <= tol && spec.bins[n / 2].im.abs() <= tol,
        "DC and Nyquist bins must be real"
    );
    Ok(irfft_any(&spec.bins, n))
}

/// Analysis/synthesis window shapes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
    Kaiser { beta: f64 },
}

impl Window {
    /// Periodic window of length `n` (the DFT-even form, suitable for overlap-add).
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match *self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Kaiser { beta } => {
                let denom = bessel_i0(beta);
                (0..n)
                    .map(|i| {
                        let r = 2.0 * i as f64 / n as f64 - 1.0;
                        bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
                    })
                    .collect()
            }
        }
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl StftConfig {
    pub fn new(frame_length: usize, hop: usize, window: Window) -> Result<Self> {
        let cfg = Self {
            frame_length,
            hop,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hann(frame_length: usize, hop: usize) -> Result<Self> {
        Self::new(frame_length, hop, Window::Hann)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.hop > 0, "hop must be positive");
        ensure!(
            self.frame_length >= 2 && self.frame_length.is_power_of_two(),
            "frame length must be a power of two >= 2, got {}",
            self.frame_length
        );
        ensure!(
            self.hop <= self.frame_length,
            "hop {} exceeds frame length {}",
            self.hop,
            self.frame_length
        );
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.frame_length / 2 + 1
    }
}

/// Frames `padded` starting at offset 0 with the config's hop; the last frame may run
/// past the end, in which case it is zero-filled.
pub(crate) fn analyze(padded: &[f64], cfg: &StftConfig, n_frames: usize) -> Vec<Spectrum> {
    let win = cfg.window.coefficients(cfg.frame_length);
    let mut buf = vec![0.0; cfg.frame_length];
    (0..n_frames)
        .map(|f| {
            let start = f * cfg.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = padded.get(start + i).copied().unwrap_or(0.0) * win[i];
            }
            Spectrum {
                bins: rfft_any(&buf),
                frame_length: cfg.frame_length,
            }
        })
        .collect()
}

/// Weighted overlap-add normalised by the summed squared window, which inverts
/// [`analyze`] wherever at least one frame has nonzero window weight.
pub(crate) fn synthesize(frames: &[Spectrum], cfg: &StftConfig, out_len: usize) -> Vec<f64> {
    let n = cfg.frame_length;
    let win = cfg.window.coefficients(n);
    let mut acc = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    for (f, spec) in frames.iter().enumerate() {
        let frame = irfft_any(&spec.bins, n);
        let start = f * cfg.hop;
        for i in 0..n {
            let j = start + i;
            if j >= out_len {
                break;
            }
            acc[j] += frame[i] * win[i];
            norm[j] += win[i] * win[i];
        }
    }
    for (a, w) in acc.iter_mut().zip(&norm) {
        *a = if *w > 1e-12 { *a / w } else { 0.0 };
    }
    acc
}

/// Reflect padding (edge sample not repeated) of `pad` samples on each side.
pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Result<Vec<f64>> {
    ensure!(
        x.len() > pad,
        "reflect padding of {pad} needs more than {pad} samples, got {}",
        x.len()
    );
    let mut out = Vec::with_capacity(x.len() + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    let n = x.len();
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    Ok(out)
}

/// Center-aligned STFT: the signal is reflect-padded by `frame_length/2` on both ends so
/// frame `m` is centered on sample `m*hop`.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<Vec<Spectrum>> {
    cfg.validate()?;
    ensure!(
        w.len() >= cfg.frame_length,
        "waveform of {} samples is shorter than one frame ({})",
        w.len(),
        cfg.frame_length
    );
    let padded = reflect_pad(w.samples(), cfg.frame_length / 2)?;
    let n_frames = (padded.len() - cfg.frame_length) / cfg.hop + 1;
    Ok(analyze(&padded, cfg, n_frames))
}

/// Inverse of [`stft`], trimmed or zero-padded to `out_length` samples.
pub fn istft(
    frames: &[Spectrum],
    cfg: &StftConfig,
    out_length: usize,
    sample_rate: u32,
) -> Result<Waveform> {
    cfg.validate()?;
    ensure!(sample_rate > 0, "sample rate must be positive");
    for (i, f) in frames.iter().enumerate() {
        ensure!(
            f.frame_length == cfg.frame_length && f.bins.len() == cfg.bins(),
            "frame {i} has length {} but config expects {}",
            f.frame_length,
            cfg.frame_length
        );
    }
    if out_length == 0 {
        return Ok(Waveform::empty(sample_rate));
    }
    let offset = cfg.frame_length / 2;
    let covered = if frames.is_empty() {
        0
    } else {
        (frames.len() - 1) * cfg.hop + cfg.frame_length
    };
    let full = synthesize(frames, cfg, covered.max(offset + out_length));
    let samples = full[offset..offset + out_length].to_vec();
    Waveform::new(samples, sample_rate)
}
