//! Waveforms, pitch label tracks and band-limited resampling.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
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

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

/// Reference pitch annotation. `f0_hz == 0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchLabelTrack {
    times: Vec<f64>,
    f0_hz: Vec<f64>,
}

pub const LABEL_MIN_HZ: f64 = 20.0;
pub const LABEL_MAX_HZ: f64 = 2000.0;

impl PitchLabelTrack {
    pub fn new(times: Vec<f64>, f0_hz: Vec<f64>) -> Result<Self> {
        if times.len() != f0_hz.len() {
            return Err(Error::shape("pitch labels", times.len(), f0_hz.len()));
        }
        if times.iter().chain(&f0_hz).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pitch labels"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if let Some(f) = f0_hz
            .iter()
            .find(|&&f| f != 0.0 && !(LABEL_MIN_HZ..=LABEL_MAX_HZ).contains(&f))
        {
            return Err(Error::param(
                "f0_hz",
                alloc::format!("{f} Hz is neither 0 (unvoiced) nor within [20, 2000]"),
            ));
        }
        Ok(Self { times, f0_hz })
    }

    /// Labels on a uniform frame grid starting at time zero.
    pub fn uniform(frame_shift_s: f64, f0_hz: Vec<f64>) -> Result<Self> {
        if !(frame_shift_s > 0.0) {
            return Err(Error::param("frame_shift_s", "must be positive"));
        }
        let times = (0..f0_hz.len()).map(|i| i as f64 * frame_shift_s).collect();
        Self::new(times, f0_hz)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn voiced(&self) -> impl Iterator<Item = bool> + '_ {
        self.f0_hz.iter().map(|&f| f > 0.0)
    }
}

/// MIDI-style semitone number to Hz (69 = A4 = 440 Hz).
pub fn semitone_to_hz(semitone: f64) -> f64 {
    440.0 * 2.0.powf((semitone - 69.0) / 12.0)
}

pub fn hz_to_semitone(hz: f64) -> f64 {
    69.0 + 12.0 * (hz / 440.0).log2()
}

/// Kaiser-windowed sinc interpolator used by [`resample`].
#[derive(Debug, Clone)]
pub struct Resampler {
    zero_crossings: usize,
    rolloff: f64,
    table: Vec<f64>,
}

const TABLE_OVERSAMPLING: usize = 512;

impl Default for Resampler {
    fn default() -> Self {
        Self::new(64, 0.95, 10.0)
    }
}

impl Resampler {
    /// `zero_crossings` per side, `rolloff` as a fraction of the lower Nyquist
    /// frequency, Kaiser shape `beta`.
    pub fn new(zero_crossings: usize, rolloff: f64, beta: f64) -> Self {
        let n = zero_crossings * TABLE_OVERSAMPLING;
        let i0_beta = bessel_i0(beta);
        let table = (0..=n + 1)
            .map(|i| {
                let u = i as f64 / TABLE_OVERSAMPLING as f64;
                let r = u / zero_crossings as f64;
                if r >= 1.0 {
                    return 0.0;
                }
                let window = bessel_i0(beta * (1.0 - r * r).sqrt()) / i0_beta;
                sinc(u) * window
            })
            .collect();
        Self {
            zero_crossings,
            rolloff,
            table,
        }
    }

    fn kernel(&self, u: f64) -> f64 {
        let pos = u.abs() * TABLE_OVERSAMPLING as f64;
        let i = pos.floor() as usize;
        if i + 1 >= self.table.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }

    /// Resamples by `ratio = output_rate / input_rate` into `out_len` samples.
    pub fn process(&self, input: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
        let scale = ratio.min(1.0) * self.rolloff;
        let half_width = self.zero_crossings as f64 / scale;
        (0..out_len)
            .map(|m| {
                let x = m as f64 / ratio;
                let lo = (x - half_width).ceil().max(0.0) as usize;
                let hi = ((x + half_width).floor() as isize).min(input.len() as isize - 1);
                if hi < lo as isize {
                    return 0.0;
                }
                (lo..=hi as usize)
                    .map(|n| input[n] * self.kernel((x - n as f64) * scale))
                    .sum::<f64>()
                    * scale
            })
            .collect()
    }
}

/// Band-limited resampling to `target_rate`. Equal rates return the input
/// unchanged.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::param("target_rate", "must be positive"));
    }
    if target_rate == w.sample_rate {
        return Ok(w.clone());
    }
    let ratio = target_rate as f64 / w.sample_rate as f64;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let out = Resampler::default().process(&w.samples, ratio, out_len);
    Waveform::new(out, target_rate)
}

/// Pitch shift by `semitones` through a sample-rate change: the samples are
/// reinterpreted at a scaled rate and resampled back to the original rate.
/// Duration scales by `2^(-semitones/12)`.
pub fn rate_change_shift(w: &Waveform, semitones: f64) -> Result<Waveform> {
    let ratio = 2.0.powf(-semitones / 12.0);
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let out = Resampler::default().process(&w.samples, ratio, out_len);
    Waveform::new(out, w.sample_rate)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sine(freq: f64, rate: u32, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn identity_resample() {
        let w = Waveform::new(sine(100.0, 24_000, 500), 24_000).unwrap();
        assert_eq!(resample(&w, 24_000).unwrap(), w);
    }

    #[test]
    fn halving_rate_halves_length() {
        let w = Waveform::new(vec![0.0; 48_000], 48_000).unwrap();
        let r = resample(&w, 24_000).unwrap();
        assert_eq!(r.len(), 24_000);
        assert_eq!(r.sample_rate(), 24_000);
    }

    #[test]
    fn downsampled_sine_matches_direct_synthesis() {
        let w = Waveform::new(sine(100.0, 48_000, 48_000), 48_000).unwrap();
        let r = resample(&w, 24_000).unwrap();
        let reference = sine(100.0, 24_000, 24_000);
        // interior only; the zero-padded edges are not band-limited
        let (a, b) = (&r.samples()[1000..23_000], &reference[1000..23_000]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(dot / (na * nb) > 0.999);
    }

    #[test]
    fn double_then_halve_round_trip_snr() {
        let rate = 24_000;
        let n = 24_000;
        let freqs = [100.0, 330.0, 870.0, 1900.0, 3100.0, 4000.0];
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                freqs
                    .iter()
                    .enumerate()
                    .map(|(j, f)| (2.0 * PI * f * t + j as f64).sin())
                    .sum::<f64>()
                    / 6.0
            })
            .collect();
        let w = Waveform::new(x.clone(), rate).unwrap();
        let up = resample(&w, 2 * rate).unwrap();
        let back = resample(&up, rate).unwrap();
        assert_eq!(back.len(), n);
        let margin = 2000;
        let (sig, err) = x[margin..n - margin]
            .iter()
            .zip(&back.samples()[margin..n - margin])
            .fold((0.0, 0.0), |(s, e), (a, b)| {
                (s + a * a, e + (a - b) * (a - b))
            });
        let snr = 10.0 * (sig / err).log10();
        assert!(snr > 60.0, "round-trip SNR {snr} dB");
    }

    #[test]
    fn semitone_conversion() {
        assert_eq!(semitone_to_hz(69.0), 440.0);
        assert!((semitone_to_hz(57.0) - 220.0).abs() < 1e-12);
        assert!((hz_to_semitone(880.0) - 81.0).abs() < 1e-12);
    }

    #[test]
    fn label_validation() {
        assert!(PitchLabelTrack::new(vec![0.0, 0.01], vec![220.0, 0.0]).is_ok());
        assert!(PitchLabelTrack::new(vec![0.01, 0.01], vec![220.0, 0.0]).is_err());
        assert!(PitchLabelTrack::new(vec![0.0], vec![10.0]).is_err());
        assert!(Waveform::new(vec![f64::NAN], 100).is_err());
        assert!(Waveform::new(vec![], 0).is_err());
    }
}
