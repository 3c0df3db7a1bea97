//! WAV input and output through `hound`.

use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use pitchdsp_core::audio::resample;
use pitchdsp_core::{Waveform, SAMPLE_RATE};

use crate::{Error, Result};

/// Which input channel becomes the mono signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channel {
    /// Average of all channels.
    #[default]
    Mix,
    /// One channel, zero-based.
    Index(u16),
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mix" => Ok(Channel::Mix),
            other => other
                .parse()
                .map(Channel::Index)
                .map_err(|_| format!("expected `mix` or a channel index, got `{other}`")),
        }
    }
}

/// Storage format for [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "float32" => Ok(SampleFormat::Float32),
            other => Err(format!("expected `pcm16` or `float32`, got `{other}`")),
        }
    }
}

/// Decodes 16-bit PCM (scaled by 1/32768) or 32-bit float WAV data.
pub fn read_wav<R: Read>(reader: R, channel: Channel) -> Result<Waveform> {
    let reader = WavReader::new(reader)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if let Channel::Index(i) = channel {
        if i >= spec.channels {
            return Err(Error::Config(format!(
                "channel {i} requested from a {channels}-channel file"
            )));
        }
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (HoundFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => return Err(Error::UnsupportedWav(format!("{bits}-bit {format:?}"))),
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| match channel {
            Channel::Mix => frame.iter().sum::<f64>() / channels as f64,
            Channel::Index(i) => frame[i as usize],
        })
        .collect();
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

pub fn load_wav(path: impl AsRef<Path>, channel: Channel) -> Result<Waveform> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav(std::io::BufReader::new(file), channel)
}

/// [`load_wav`] followed by resampling to the internal rate.
pub fn load_wav_internal_rate(path: impl AsRef<Path>, channel: Channel) -> Result<Waveform> {
    Ok(resample(&load_wav(path, channel)?, SAMPLE_RATE)?)
}

/// Mono WAV. PCM16 clips to [-1, 1); float32 stores the samples as `f32`.
pub fn write_wav<W: Write + Seek>(writer: W, w: &Waveform, format: SampleFormat) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut out = WavWriter::new(writer, spec)?;
    for &s in w.samples() {
        match format {
            SampleFormat::Pcm16 => {
                out.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
            }
            SampleFormat::Float32 => out.write_sample(s as f32)?,
        }
    }
    out.finalize()?;
    Ok(())
}

pub fn save_wav(path: impl AsRef<Path>, w: &Waveform, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav(std::io::BufWriter::new(file), w, format)
}
