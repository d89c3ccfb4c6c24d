use std::path::Path;

use anyhow::{bail, Context, Result};
use diffsr::Waveform;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

/// Reads a mono WAV stored as 16-bit PCM or 32-bit float.
pub fn read_mono(path: &Path) -> Result<Waveform> {
    let mut reader = WavReader::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!("{}: expected mono audio, found {} channels", path.display(), spec.channels);
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => bail!(
            "{}: unsupported sample format {fmt:?} at {bits} bits (need 16-bit PCM or 32-bit float)",
            path.display()
        ),
    };
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

/// Writes 32-bit float mono.
pub fn write_float(path: &Path, w: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).with_context(|| format!("cannot write {}", path.display()))?;
    for &s in w.samples() {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
