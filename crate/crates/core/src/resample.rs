//! Downsampling, upsampling and the composite lowpass `F = upsample ∘ downsample`.
//!
//! Every filter kind comes as a matched pair: the upsampling matrix is a scalar multiple
//! of the transposed downsampling matrix. That makes `F` symmetric, so the sampler can use
//! `F` itself as its adjoint when back-propagating the data-consistency residual. Edges are
//! handled by implicit zero padding for the same reason.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::signal::{analyze, bessel_i0, irfft_any, rfft_any, synthesize, Spectrum, StftConfig, Window};
use crate::Waveform;

pub const DEFAULT_ZERO_CROSSINGS: usize = 128;
pub const DEFAULT_ROLLOFF: f64 = 0.962;
/// Kaiser beta of the reference sinc resampler (quoted as "≈ 14.77").
pub const DEFAULT_KAISER_BETA: f64 = 14.769_656_459_379_492;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    /// Polyphase windowed-sinc resampler.
    SincKaiser {
        zero_crossings: usize,
        rolloff: f64,
        kaiser_beta: f64,
    },
    /// Spectrogram masking: zero STFT bins at or above the cutoff, then decimate.
    /// Integer ratios only.
    StftMask { stft: StftConfig },
    /// Brick-wall mask on the DFT of the whole signal. Circular; needs
    /// `len * target_rate / source_rate` to be an integer.
    Ideal,
}

impl FilterKind {
    pub fn sinc_default() -> Self {
        FilterKind::SincKaiser {
            zero_crossings: DEFAULT_ZERO_CROSSINGS,
            rolloff: DEFAULT_ROLLOFF,
            kaiser_beta: DEFAULT_KAISER_BETA,
        }
    }

    pub fn stft_default() -> Self {
        FilterKind::StftMask {
            stft: StftConfig {
                frame_length: 1024,
                hop: 256,
                window: Window::Hann,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::SincKaiser { .. } => "sinc_kaiser",
            FilterKind::StftMask { .. } => "stft_mask",
            FilterKind::Ideal => "ideal",
        }
    }
}

/// A downsampling scheme from `source_rate` (l) to `target_rate` (h), `h <= l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(flatten)]
    pub kind: FilterKind,
    pub source_rate: u32,
    pub target_rate: u32,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, source_rate: u32, target_rate: u32) -> Result<Self> {
        let spec = Self {
            kind,
            source_rate,
            target_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sinc(source_rate: u32, target_rate: u32) -> Result<Self> {
        Self::new(FilterKind::sinc_default(), source_rate, target_rate)
    }

    pub fn stft(source_rate: u32, target_rate: u32) -> Result<Self> {
        Self::new(FilterKind::stft_default(), source_rate, target_rate)
    }

    pub fn ideal(source_rate: u32, target_rate: u32) -> Result<Self> {
        Self::new(FilterKind::Ideal, source_rate, target_rate)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.source_rate > 0 && self.target_rate > 0,
            "sample rates must be positive"
        );
        ensure!(
            self.target_rate <= self.source_rate,
            "target rate {} exceeds source rate {}; that is upsampling",
            self.target_rate,
            self.source_rate
        );
        match &self.kind {
            FilterKind::SincKaiser {
                zero_crossings,
                rolloff,
                kaiser_beta,
            } => {
                ensure!(*zero_crossings > 0, "zero crossings must be positive");
                ensure!(
                    *rolloff > 0.0 && *rolloff <= 1.0,
                    "rolloff must lie in (0, 1], got {rolloff}"
                );
                ensure!(
                    kaiser_beta.is_finite() && *kaiser_beta >= 0.0,
                    "kaiser beta must be finite and non-negative"
                );
            }
            FilterKind::StftMask { stft } => {
                stft.validate()?;
                ensure!(
                    self.source_rate.is_multiple_of(self.target_rate),
                    "stft_mask filter supports integer ratios only ({} / {})",
                    self.source_rate,
                    self.target_rate
                );
            }
            FilterKind::Ideal => {}
        }
        Ok(())
    }

    /// `min(l, h) / 2`.
    pub fn cutoff_hz(&self) -> f64 {
        self.source_rate.min(self.target_rate) as f64 / 2.0
    }

    /// `l / h`.
    pub fn upscaling_ratio(&self) -> f64 {
        self.source_rate as f64 / self.target_rate as f64
    }

    /// Rates reduced by their gcd: `(l', h')`.
    pub fn reduced_ratio(&self) -> (usize, usize) {
        let g = gcd(self.source_rate as usize, self.target_rate as usize);
        (self.source_rate as usize / g, self.target_rate as usize / g)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Precomputed polyphase filter bank for a rational rate change `orig -> new`.
#[derive(Clone, Debug)]
struct Polyphase {
    orig: usize,
    new: usize,
    /// Per output phase: first input offset relative to `k*orig`, then the taps.
    phases: Vec<(isize, Vec<f64>)>,
}

impl Polyphase {
    fn new(orig: usize, new: usize, zero_crossings: usize, rolloff: f64, beta: f64) -> Self {
        let zc = zero_crossings as f64;
        let base = orig.min(new) as f64 * rolloff;
        let gain = base / orig as f64;
        let radius = zc * orig as f64 / base;
        let i0_beta = bessel_i0(beta);
        let phases = (0..new)
            .map(|p| {
                let center = p as f64 * orig as f64 / new as f64;
                let lo = (center - radius).ceil() as isize;
                let hi = (center + radius).floor() as isize;
                let taps = (lo..=hi)
                    .map(|o| {
                        let t = (center - o as f64) * base / orig as f64;
                        if t.abs() > zc {
                            return 0.0;
                        }
                        let u = t / zc;
                        let window = bessel_i0(beta * (1.0 - u * u).max(0.0).sqrt()) / i0_beta;
                        let sinc = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
                        sinc * window * gain
                    })
                    .collect();
                (lo, taps)
            })
            .collect();
        Self { orig, new, phases }
    }

    fn apply(&self, x: &[f64], out_len: usize) -> Vec<f64> {
        let n = x.len() as isize;
        (0..out_len)
            .map(|i| {
                let k = (i / self.new) as isize;
                let (lo, taps) = &self.phases[i % self.new];
                let start = k * self.orig as isize + lo;
                let first = (-start).max(0) as usize;
                let last = ((n - start).max(0) as usize).min(taps.len());
                let mut acc = 0.0;
                for t in first..last {
                    acc += taps[t] * x[(start + t as isize) as usize];
                }
                acc
            })
            .collect()
    }

    /// Phase-0 taps, i.e. the prototype lowpass sampled on the input grid.
    fn prototype(&self) -> (isize, &[f64]) {
        let (lo, taps) = &self.phases[0];
        (*lo, taps)
    }
}

#[derive(Clone, Debug)]
enum Kernel {
    Identity,
    Sinc { down: Polyphase, up: Polyphase },
    Stft { cfg: StftConfig, ratio: usize },
    Ideal,
}

/// A constructed resampling filter pair together with its composite lowpass.
#[derive(Clone, Debug)]
pub struct LowpassOperator {
    spec: FilterSpec,
    kernel: Kernel,
}

impl LowpassOperator {
    pub fn new(spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        let kernel = if spec.source_rate == spec.target_rate {
            Kernel::Identity
        } else {
            match &spec.kind {
                FilterKind::SincKaiser {
                    zero_crossings,
                    rolloff,
                    kaiser_beta,
                } => {
                    let (l, h) = spec.reduced_ratio();
                    Kernel::Sinc {
                        down: Polyphase::new(l, h, *zero_crossings, *rolloff, *kaiser_beta),
                        up: Polyphase::new(h, l, *zero_crossings, *rolloff, *kaiser_beta),
                    }
                }
                FilterKind::StftMask { stft } => Kernel::Stft {
                    cfg: *stft,
                    ratio: (spec.source_rate / spec.target_rate) as usize,
                },
                FilterKind::Ideal => Kernel::Ideal,
            }
        };
        Ok(Self { spec, kernel })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    /// Length of the downsampled signal for an input of `n` samples.
    pub fn downsampled_len(&self, n: usize) -> usize {
        let (l, h) = self.spec.reduced_ratio();
        (n * h).div_ceil(l)
    }

    /// Length of the upsampled signal for an input of `m` samples.
    pub fn upsampled_len(&self, m: usize) -> usize {
        let (l, h) = self.spec.reduced_ratio();
        (m * l + h / 2) / h
    }

    fn check_ideal_len(&self, n: usize) -> Result<()> {
        let (l, h) = self.spec.reduced_ratio();
        ensure!(
            (n * h).is_multiple_of(l),
            "ideal filter needs len*h/l integral; len {n}, ratio {l}/{h}"
        );
        Ok(())
    }

    pub fn downsample_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kernel {
            Kernel::Identity => Ok(x.to_vec()),
            Kernel::Sinc { down, .. } => Ok(down.apply(x, self.downsampled_len(x.len()))),
            Kernel::Stft { cfg, ratio } => {
                let masked = self.stft_mask(cfg, x);
                Ok(masked.into_iter().step_by(*ratio).collect())
            }
            Kernel::Ideal => {
                self.check_ideal_len(x.len())?;
                let m = self.downsampled_len(x.len());
                let bins = rfft_any(x);
                let keep = m.div_ceil(2);
                let scale = (m as f64 / x.len() as f64).sqrt();
                let mut out = vec![num_complex::Complex64::new(0.0, 0.0); m / 2 + 1];
                for k in 0..keep.min(out.len()) {
                    out[k] = bins[k] * scale;
                }
                Ok(irfft_any(&out, m))
            }
        }
    }

    pub fn upsample_slice(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.upsampled_len(y.len());
        match &self.kernel {
            Kernel::Identity => Ok(y.to_vec()),
            Kernel::Sinc { up, .. } => Ok(up.apply(y, n)),
            Kernel::Stft { cfg, ratio } => {
                let mut stuffed = vec![0.0; n];
                for (m, v) in y.iter().enumerate() {
                    if let Some(s) = stuffed.get_mut(m * ratio) {
                        *s = *v * *ratio as f64;
                    }
                }
                Ok(self.stft_mask(cfg, &stuffed))
            }
            Kernel::Ideal => {
                let m = y.len();
                let (l, h) = self.spec.reduced_ratio();
                ensure!(
                    (m * l).is_multiple_of(h),
                    "ideal upsampling needs len*l/h integral; len {m}, ratio {l}/{h}"
                );
                let bins = rfft_any(y);
                let keep = m.div_ceil(2);
                let scale = (n as f64 / m as f64).sqrt();
                let mut out = vec![num_complex::Complex64::new(0.0, 0.0); n / 2 + 1];
                for k in 0..keep {
                    out[k] = bins[k] * scale;
                }
                Ok(irfft_any(&out, n))
            }
        }
    }

    /// `F(x)`: downsample then upsample, trimmed to the input length.
    pub fn apply_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.kernel {
            Kernel::Identity => Ok(x.to_vec()),
            Kernel::Ideal => {
                self.check_ideal_len(x.len())?;
                let mut bins = rfft_any(x);
                let keep = self.downsampled_len(x.len()).div_ceil(2);
                for b in bins.iter_mut().skip(keep) {
                    *b = num_complex::Complex64::new(0.0, 0.0);
                }
                Ok(irfft_any(&bins, x.len()))
            }
            _ => {
                let mut up = self.upsample_slice(&self.downsample_slice(x)?)?;
                up.resize(x.len(), 0.0);
                Ok(up)
            }
        }
    }

    pub fn downsample(&self, x: &Waveform) -> Result<Waveform> {
        ensure!(
            x.sample_rate() == self.spec.source_rate,
            "input rate {} does not match filter source rate {}",
            x.sample_rate(),
            self.spec.source_rate
        );
        Waveform::new(self.downsample_slice(x.samples())?, self.spec.target_rate)
    }

    pub fn upsample(&self, y: &Waveform) -> Result<Waveform> {
        ensure!(
            y.sample_rate() == self.spec.target_rate,
            "input rate {} does not match filter target rate {}",
            y.sample_rate(),
            self.spec.target_rate
        );
        Waveform::new(self.upsample_slice(y.samples())?, self.spec.source_rate)
    }

    pub fn apply(&self, x: &Waveform) -> Result<Waveform> {
        ensure!(
            x.sample_rate() == self.spec.source_rate,
            "input rate {} does not match filter source rate {}",
            x.sample_rate(),
            self.spec.source_rate
        );
        Waveform::new(self.apply_slice(x.samples())?, self.spec.source_rate)
    }

    /// First STFT bin whose center frequency is at or above `h/2`.
    fn mask_cutoff_bin(&self, frame_length: usize) -> usize {
        let n = frame_length as u64;
        let l = self.spec.source_rate as u64;
        let h = self.spec.target_rate as u64;
        ((n * h).div_ceil(2 * l)) as usize
    }

    /// Zero-padded STFT, zero the bins at or above `h/2`, overlap-add back.
    fn stft_mask(&self, cfg: &StftConfig, x: &[f64]) -> Vec<f64> {
        let n = cfg.frame_length;
        let cut = self.mask_cutoff_bin(n);
        // leading pad of a whole frame keeps the frame grid complete over the signal
        let span = n + x.len() + n;
        let n_frames = (span - n).div_ceil(cfg.hop) + 1;
        let mut padded = vec![0.0; (n_frames - 1) * cfg.hop + n];
        padded[n..n + x.len()].copy_from_slice(x);
        let mut frames: Vec<Spectrum> = analyze(&padded, cfg, n_frames);
        for f in frames.iter_mut() {
            for b in f.bins.iter_mut().skip(cut) {
                *b = num_complex::Complex64::new(0.0, 0.0);
            }
        }
        let out = synthesize(&frames, cfg, padded.len());
        out[n..n + x.len()].to_vec()
    }

    /// Magnitude coefficient `c(f)` of the composite lowpass on `n_points` evenly spaced
    /// frequencies covering `[0, l/2]`.
    pub fn frequency_response(&self, n_points: usize) -> Result<Vec<f64>> {
        ensure!(n_points >= 2, "need at least two response points");
        let l = self.spec.source_rate as f64;
        let h = self.spec.target_rate as f64;
        let freqs = (0..n_points).map(|i| i as f64 * (l / 2.0) / (n_points - 1) as f64);
        Ok(match &self.kernel {
            Kernel::Identity => vec![1.0; n_points],
            Kernel::Ideal => freqs.map(|f| if f < h / 2.0 { 1.0 } else { 0.0 }).collect(),
            Kernel::Stft { cfg, .. } => {
                // step at the center frequency of the first masked bin
                let edge = self.mask_cutoff_bin(cfg.frame_length) as f64 * l / cfg.frame_length as f64;
                freqs.map(|f| if f < edge { 1.0 } else { 0.0 }).collect()
            }
            Kernel::Sinc { down, .. } => {
                // Both halves share the prototype, so the pass-through path sees it squared.
                let (lo, taps) = down.prototype();
                freqs
                    .map(|f| {
                        let w = 2.0 * PI * f / l;
                        let resp: f64 = taps
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c * (w * (lo + i as isize) as f64).cos())
                            .sum();
                        resp * resp
                    })
                    .collect()
            }
        })
    }
}

pub fn downsample(x: &Waveform, spec: &FilterSpec) -> Result<Waveform> {
    LowpassOperator::new(spec.clone())?.downsample(x)
}

/// Upsamples `y` (at the spec's target rate `h`) to `target_rate` with the spec's filter
/// family.
pub fn upsample(y: &Waveform, target_rate: u32, spec: &FilterSpec) -> Result<Waveform> {
    ensure!(
        target_rate >= y.sample_rate(),
        "target rate {target_rate} is below the input rate {}",
        y.sample_rate()
    );
    let spec = FilterSpec::new(spec.kind.clone(), target_rate, y.sample_rate())?;
    LowpassOperator::new(spec)?.upsample(y)
}

/// `F_{h/2}(x) = upsample(downsample(x))`, same rate and length as `x`.
pub fn lowpass_compose(x: &Waveform, spec: &FilterSpec) -> Result<Waveform> {
    LowpassOperator::new(spec.clone())?.apply(x)
}

pub fn frequency_response(spec: &FilterSpec, n_points: usize) -> Result<Vec<f64>> {
    LowpassOperator::new(spec.clone())?.frequency_response(n_points)
}

/// Natural cubic spline interpolation of `y` onto the `target_rate` grid; the classical
/// non-learned baseline.
pub fn spline_upsample(y: &Waveform, target_rate: u32) -> Result<Waveform> {
    ensure!(
        target_rate >= y.sample_rate(),
        "target rate {target_rate} is below the input rate {}",
        y.sample_rate()
    );
    let v = y.samples();
    let m = v.len();
    let out_len = ((m as u64 * target_rate as u64 + y.sample_rate() as u64 / 2)
        / y.sample_rate() as u64) as usize;
    if m < 3 {
        let c = v[0];
        return Waveform::new(vec![c; out_len.max(1)], target_rate);
    }
    // second derivatives of the natural spline on a unit grid (Thomas algorithm)
    let mut second = vec![0.0; m];
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    for i in 1..m - 1 {
        let rhs = 6.0 * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
        let denom = 4.0 - c_prime[i - 1];
        c_prime[i] = 1.0 / denom;
        d_prime[i] = (rhs - d_prime[i - 1]) / denom;
    }
    for i in (1..m - 1).rev() {
        second[i] = d_prime[i] - c_prime[i] * second[i + 1];
    }
    let step = y.sample_rate() as f64 / target_rate as f64;
    let samples = (0..out_len)
        .map(|n| {
            let u = (n as f64 * step).min((m - 1) as f64);
            let i = (u.floor() as usize).min(m - 2);
            let a = (i + 1) as f64 - u;
            let b = u - i as f64;
            a * v[i]
                + b * v[i + 1]
                + ((a * a * a - a) * second[i] + (b * b * b - b) * second[i + 1]) / 6.0
        })
        .collect();
    Waveform::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, seeded};

    fn tone(freq: f64, rate: u32, len: usize) -> Waveform {
        let x = (0..len)
            .map(|t| (2.0 * PI * freq * t as f64 / rate as f64).sin())
            .collect();
        Waveform::new(x, rate).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn spec_basics() {
        let s = FilterSpec::sinc(48000, 24000).unwrap();
        assert_eq!(s.upscaling_ratio(), 2.0);
        assert_eq!(s.cutoff_hz(), 12000.0);
        assert!(FilterSpec::sinc(16000, 48000).is_err());
        assert!(FilterSpec::stft(48000, 7).is_err());
        assert!(FilterSpec::sinc(48000, 7).is_ok());
    }

    #[test]
    fn passband_tone_preserved() {
        let x = tone(5000.0, 48000, 9600);
        let y = downsample(&x, &FilterSpec::sinc(48000, 16000).unwrap()).unwrap();
        assert_eq!(y.sample_rate(), 16000);
        assert_eq!(y.len(), 3200);
        // interior only: zero padding rolls off the edges
        let mid = &y.samples()[800..2400];
        let amp = rms(mid) * 2f64.sqrt();
        assert!((amp - 1.0).abs() < 1e-3, "amplitude {amp}");
    }

    #[test]
    fn stopband_tone_removed() {
        let x = tone(10000.0, 48000, 9600);
        let y = downsample(&x, &FilterSpec::sinc(48000, 16000).unwrap()).unwrap();
        // the abrupt onset at the edges is broadband; measure the steady-state interior
        let peak = y.samples()[800..2400].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(20.0 * peak.log10() <= -60.0, "residual peak {peak}");
    }

    #[test]
    fn length_contracts() {
        let spec = FilterSpec::sinc(16000, 8000).unwrap();
        let y = Waveform::new(normal_vec(&mut seeded(1), 800), 8000).unwrap();
        assert_eq!(upsample(&y, 16000, &spec).unwrap().len(), 1600);
        let odd = Waveform::new(normal_vec(&mut seeded(1), 1001), 16000).unwrap();
        let f = lowpass_compose(&odd, &spec).unwrap();
        assert_eq!(f.len(), 1001);
        assert_eq!(f.sample_rate(), 16000);
    }

    #[test]
    fn equal_rates_are_identity() {
        let x = Waveform::new(normal_vec(&mut seeded(2), 300), 16000).unwrap();
        let spec = FilterSpec::sinc(16000, 16000).unwrap();
        let back = upsample(&downsample(&x, &spec).unwrap(), 16000, &spec).unwrap();
        for (a, b) in x.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn dc_is_preserved() {
        for spec in [FilterSpec::sinc(16000, 8000).unwrap(), FilterSpec::stft(16000, 8000).unwrap()] {
            let y = Waveform::new(vec![0.5; 4000], 8000).unwrap();
            let up = upsample(&y, 16000, &spec).unwrap();
            let mid = &up.samples()[2000..6000];
            for v in mid {
                assert!((v - 0.5).abs() < 1e-3, "{}: {v}", spec.kind.name());
            }
        }
    }

    #[test]
    fn short_inputs_do_not_error() {
        for spec in [FilterSpec::sinc(16000, 8000).unwrap(), FilterSpec::stft(16000, 8000).unwrap()] {
            let x = Waveform::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
            assert_eq!(lowpass_compose(&x, &spec).unwrap().len(), 3);
        }
    }

    #[test]
    fn rational_ratio() {
        let spec = FilterSpec::sinc(48000, 32000).unwrap();
        let x = tone(3000.0, 48000, 4800);
        let y = downsample(&x, &spec).unwrap();
        assert_eq!(y.len(), 3200);
        let expect = tone(3000.0, 32000, 3200);
        let err: Vec<f64> = y.samples()[800..2400]
            .iter()
            .zip(&expect.samples()[800..2400])
            .map(|(a, b)| a - b)
            .collect();
        assert!(rms(&err) < 1e-3);
    }

    #[test]
    fn ideal_filter_is_exact_projection() {
        let spec = FilterSpec::ideal(16000, 8000).unwrap();
        let op = LowpassOperator::new(spec).unwrap();
        let x = normal_vec(&mut seeded(3), 64);
        let fx = op.apply_slice(&x).unwrap();
        let ffx = op.apply_slice(&fx).unwrap();
        for (a, b) in fx.iter().zip(&ffx) {
            assert!((a - b).abs() < 1e-12);
        }
        let via = op.upsample_slice(&op.downsample_slice(&x).unwrap()).unwrap();
        for (a, b) in fx.iter().zip(&via) {
            assert!((a - b).abs() < 1e-12);
        }
        let bins = rfft_any(&fx);
        assert!(bins[16..].iter().all(|b| b.norm() < 1e-12));
        assert!(op.apply_slice(&x[..63]).is_err());
    }

    #[test]
    fn stft_response_is_step() {
        let resp = frequency_response(&FilterSpec::stft(16000, 8000).unwrap(), 1025).unwrap();
        // points are spaced l/2/1024 = 7.8125 Hz; cutoff 4000 Hz is point 512
        assert!(resp[..512].iter().all(|&c| c == 1.0));
        assert!(resp[512..].iter().all(|&c| c == 0.0));
        let ideal = frequency_response(&FilterSpec::ideal(16000, 8000).unwrap(), 5).unwrap();
        assert_eq!(ideal, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sinc_response_dc_and_stopband() {
        let spec = FilterSpec::sinc(48000, 16000).unwrap();
        let op = LowpassOperator::new(spec).unwrap();
        let resp = op.frequency_response(24001).unwrap();
        assert!((resp[0] - 1.0).abs() < 1e-3);
        // 1.1 * 8000 Hz = 8800 Hz -> point 8800
        assert!(10.0 * resp[8800].log10() <= -60.0, "{}", resp[8800]);
        assert!(op.frequency_response(1).is_err());
    }

    #[test]
    fn spline_reproduces_cubic_free_line() {
        let y = Waveform::new((0..50).map(|i| 0.01 * i as f64).collect(), 8000).unwrap();
        let up = spline_upsample(&y, 16000).unwrap();
        assert_eq!(up.len(), 100);
        for (n, v) in up.samples()[..98].iter().enumerate() {
            assert!((v - 0.005 * n as f64).abs() < 1e-12);
        }
    }
}
