//! Mono WAV reading and writing.
//!
//! Reads 16/24-bit PCM and 32-bit float; writes 32-bit float. Inputs must be
//! single channel — multi-channel material should be downmixed or split
//! before use so the caller stays in control of what is analyzed.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("wav i/o: {0}")]
    Io(#[from] hound::Error),
    #[error("{path}: expected mono input, found {channels} channels")]
    NotMono { path: String, channels: u16 },
    #[error("{path}: unsupported sample format ({bits} bit)")]
    UnsupportedFormat { path: String, bits: u16 },
}

/// Read a mono WAV file as f64 samples in `[-1, 1]` plus its sample rate.
pub fn read_mono(path: &Path) -> Result<(Vec<f64>, f64), WavError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::NotMono {
            path: path.display().to_string(),
            channels: spec.channels,
        });
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|x| x as f64))
            .collect::<Result<Vec<_>, _>>()?,
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|x| x as f64 * scale))
                .collect::<Result<Vec<_>, _>>()?
        }
        (_, bits) => {
            return Err(WavError::UnsupportedFormat {
                path: path.display().to_string(),
                bits,
            })
        }
    };
    Ok((samples, spec.sample_rate as f64))
}

/// Write samples as a mono 32-bit float WAV file.
pub fn write_mono(path: &Path, samples: &[f64], sample_rate: f64) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &x in samples {
        writer.write_sample(x as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
