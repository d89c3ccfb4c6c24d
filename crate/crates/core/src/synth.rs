//! Synthetic signals for desk-scale training and evaluation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng::stream;
use crate::signal::Waveform;

/// Stationary AR(1) process `x[n] = ρ·x[n−1] + e[n]` scaled to the requested standard
/// deviation. The first sample is drawn from the stationary marginal.
pub fn ar1<R: Rng + ?Sized>(rng: &mut R, len: usize, rho: f64, std: f64) -> Vec<f64> {
    let innovation = std * (1.0 - rho * rho).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::with_capacity(len);
    let mut x = std * normal.sample(rng);
    for _ in 0..len {
        out.push(x);
        x = rho * x + innovation * normal.sample(rng);
    }
    out
}

/// Sum of `harmonics` partials of `f0` with 1/k amplitudes, normalised to `amplitude` peak.
pub fn harmonic_tone(len: usize, rate: u32, f0: f64, harmonics: usize, amplitude: f64, phase: f64) -> Vec<f64> {
    let nyq = rate as f64 / 2.0;
    let mut out = vec![0.0; len];
    let mut norm = 0.0;
    for k in 1..=harmonics.max(1) {
        let f = f0 * k as f64;
        if f >= nyq {
            break;
        }
        let a = 1.0 / k as f64;
        norm += a;
        let w = 2.0 * PI * f / rate as f64;
        for (n, o) in out.iter_mut().enumerate() {
            *o += a * (w * n as f64 + phase * k as f64).sin();
        }
    }
    if norm > 0.0 {
        for o in &mut out {
            *o *= amplitude / norm;
        }
    }
    out
}

/// Linear chirp from `f_start` to `f_end` Hz over the whole signal.
pub fn chirp(len: usize, rate: u32, f_start: f64, f_end: f64, amplitude: f64) -> Vec<f64> {
    let dur = len as f64 / rate as f64;
    let k = (f_end - f_start) / dur.max(f64::MIN_POSITIVE);
    (0..len)
        .map(|n| {
            let t = n as f64 / rate as f64;
            amplitude * (2.0 * PI * (f_start * t + 0.5 * k * t * t)).sin()
        })
        .collect()
}

/// Two-pole resonator applied in place.
fn resonate(x: &mut [f64], rate: u32, freq: f64, bandwidth: f64) {
    let r = (-PI * bandwidth / rate as f64).exp();
    let theta = 2.0 * PI * freq / rate as f64;
    let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
    let gain = 1.0 - r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Crude speech stand-in: voiced syllables (pulse train through formant resonators,
/// wandering pitch) alternating with fricative noise bursts, under a syllabic envelope.
/// Has energy across the whole band up to Nyquist.
pub fn speech_like<R: Rng + ?Sized>(rng: &mut R, len: usize, rate: u32) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let syllable = (rate as f64 * 0.18) as usize;
    let mut out = vec![0.0; len];
    let mut start = 0;
    let mut phase = 0.0;
    while start < len {
        let seg = (syllable as f64 * rng.random_range(0.6..1.4)) as usize;
        let end = (start + seg.max(1)).min(len);
        let mut buf = vec![0.0; end - start];
        if rng.random_bool(0.7) {
            let f0 = rng.random_range(100.0..220.0);
            let drift = rng.random_range(-0.3..0.3);
            for (i, b) in buf.iter_mut().enumerate() {
                let f = f0 * (1.0 + drift * i as f64 / seg as f64);
                phase += f / rate as f64;
                if phase >= 1.0 {
                    phase -= 1.0;
                    *b = 1.0;
                }
                *b += 0.02 * normal.sample(rng);
            }
            let formants = [
                (rng.random_range(300.0..900.0), 80.0),
                (rng.random_range(900.0..2400.0), 120.0),
                (rng.random_range(2400.0..3400.0), 200.0),
                (rng.random_range(3500.0..(rate as f64 * 0.45).max(3600.0)), 400.0),
            ];
            let mut mix = vec![0.0; buf.len()];
            for (i, (f, bw)) in formants.iter().enumerate() {
                if *f >= rate as f64 / 2.0 {
                    continue;
                }
                let mut b = buf.clone();
                resonate(&mut b, rate, *f, *bw);
                let g = 1.0 / (1 + i) as f64;
                for (m, v) in mix.iter_mut().zip(&b) {
                    *m += g * v;
                }
            }
            buf = mix;
        } else {
            for b in buf.iter_mut() {
                *b = normal.sample(rng);
            }
            // emphasise the upper band
            let mut prev = 0.0;
            for b in buf.iter_mut() {
                let v = *b - 0.85 * prev;
                prev = *b;
                *b = 0.3 * v;
            }
        }
        let n = buf.len() as f64;
        for (i, b) in buf.iter().enumerate() {
            let env = (PI * (i as f64 + 0.5) / n).sin().powi(2);
            out[start + i] = env * b;
        }
        start = end;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for o in &mut out {
            *o *= 0.5 / peak;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusKind {
    Ar1 { rho: f64, std: f64 },
    Tones,
    Chirps,
    Speech,
}

impl CorpusKind {
    pub fn ar1_default() -> Self {
        CorpusKind::Ar1 { rho: 0.99, std: 0.5 }
    }
}

/// `items` signals of `len` samples at `rate`; item `i` uses RNG stream `i` of `seed`.
pub fn corpus(kind: &CorpusKind, items: usize, len: usize, rate: u32, seed: u64) -> Result<Vec<Waveform>> {
    ensure!(items > 0 && len > 0, "corpus must have at least one non-empty item");
    if let CorpusKind::Ar1 { rho, std } = kind {
        ensure!(rho.abs() < 1.0 && *std > 0.0, "AR(1) needs |rho| < 1 and std > 0");
    }
    (0..items)
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let nyq = rate as f64 / 2.0;
            let x = match kind {
                CorpusKind::Ar1 { rho, std } => ar1(&mut rng, len, *rho, *std),
                CorpusKind::Tones => {
                    let f0 = rng.random_range(nyq * 0.01..nyq * 0.1);
                    let ph = rng.random_range(0.0..2.0 * PI);
                    harmonic_tone(len, rate, f0, 12, 0.5, ph)
                }
                CorpusKind::Chirps => {
                    let a = rng.random_range(nyq * 0.02..nyq * 0.9);
                    let b = rng.random_range(nyq * 0.02..nyq * 0.9);
                    chirp(len, rate, a, b, 0.5)
                }
                CorpusKind::Speech => speech_like(&mut rng, len, rate),
            };
            Waveform::new(x, rate)
        })
        .collect()
}
