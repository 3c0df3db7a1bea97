//! Deterministic synthetic signals with known pitch, and a finite-difference
//! gradient oracle.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::rng::white_noise;
use crate::{PitchLabelTrack, Result, Waveform};

/// Centre frequency, bandwidth (both Hz) and linear gain of one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formant {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub gain: f64,
}

impl Formant {
    pub const fn new(center_hz: f64, bandwidth_hz: f64, gain: f64) -> Self {
        Self {
            center_hz,
            bandwidth_hz,
            gain,
        }
    }
}

/// Formants of an open /a/ vowel.
pub const VOWEL_A: [Formant; 3] = [
    Formant::new(700.0, 130.0, 1.0),
    Formant::new(1220.0, 70.0, 1.0),
    Formant::new(2600.0, 160.0, 1.0),
];

pub const LABEL_SHIFT_S: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct VowelConfig {
    pub formants: Vec<Formant>,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// RMS of the output before the noise floor is added (scaled by the
    /// product of formant gains).
    pub rms: f64,
    /// Additive white noise this many dB below the signal RMS.
    pub noise_floor_db: Option<f64>,
    pub seed: u64,
}

impl Default for VowelConfig {
    fn default() -> Self {
        Self {
            formants: VOWEL_A.to_vec(),
            duration_s: 1.0,
            sample_rate: crate::SAMPLE_RATE,
            rms: 0.1,
            noise_floor_db: None,
            seed: 0,
        }
    }
}

/// A synthetic utterance and its exact pitch labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Vowel {
    pub waveform: Waveform,
    pub labels: PitchLabelTrack,
}

/// Source-filter vowel. `f0_at(t)` gives the F0 in Hz at time `t` seconds;
/// values of 0 mark unvoiced stretches, which are excited with white noise.
/// The harmonic source has a `1/h` spectral tilt and is filtered by a cascade
/// of two-pole resonators with unit DC gain.
pub fn make_vowel(f0_at: impl Fn(f64) -> f64, config: &VowelConfig) -> Result<Vowel> {
    let fs = config.sample_rate as f64;
    let n = (config.duration_s * fs).round() as usize;
    let noise = white_noise(config.seed, n, 1.0);
    let mut source = vec![0.0; n];
    let mut phase = 0.0f64;
    for (i, s) in source.iter_mut().enumerate() {
        let f0 = f0_at(i as f64 / fs);
        if f0 > 0.0 {
            let count = ((fs / 2.0 / f0).ceil() as usize).saturating_sub(1);
            *s = (1..=count)
                .map(|h| (h as f64 * phase).sin() / h as f64)
                .sum();
            phase = (phase + 2.0 * PI * f0 / fs) % (2.0 * PI);
        } else {
            *s = noise[i];
        }
    }
    let mut signal = source;
    let mut gain = 1.0;
    for f in &config.formants {
        resonate(&mut signal, f, fs);
        gain *= f.gain;
    }
    let rms = (signal.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    let scale = if rms > 0.0 {
        config.rms * gain / rms
    } else {
        0.0
    };
    signal.iter_mut().for_each(|v| *v *= scale);
    if let Some(db) = config.noise_floor_db {
        let floor = white_noise(
            crate::rng::derive_seed(config.seed, 1),
            n,
            config.rms * gain * 10f64.powf(-db / 20.0),
        );
        signal.iter_mut().zip(&floor).for_each(|(v, e)| *v += e);
    }
    let frames = (config.duration_s / LABEL_SHIFT_S).round() as usize;
    let f0 = (0..frames)
        .map(|t| f0_at(t as f64 * LABEL_SHIFT_S).max(0.0))
        .collect();
    Ok(Vowel {
        waveform: Waveform::new(signal, config.sample_rate)?,
        labels: PitchLabelTrack::uniform(LABEL_SHIFT_S, f0)?,
    })
}

fn resonate(x: &mut [f64], formant: &Formant, fs: f64) {
    let r = (-PI * formant.bandwidth_hz / fs).exp();
    let c = 2.0 * r * (2.0 * PI * formant.center_hz / fs).cos();
    let g = 1.0 - c + r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = g * *v + c * y1 - r * r * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Constant-F0 vowel with default settings.
pub fn flat_vowel(f0_hz: f64, seed: u64) -> Result<Vowel> {
    make_vowel(
        |_| f0_hz,
        &VowelConfig {
            seed,
            ..VowelConfig::default()
        },
    )
}

/// Sinusoidal vibrato around `center_hz` with `depth_semitones` and `rate_hz`.
pub fn vibrato_vowel(
    center_hz: f64,
    depth_semitones: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<Vowel> {
    make_vowel(
        |t| center_hz * (depth_semitones / 12.0 * (2.0 * PI * rate_hz * t).sin()).exp2(),
        &VowelConfig {
            seed,
            ..VowelConfig::default()
        },
    )
}

/// Voiced, unvoiced and voiced thirds at `f0_hz`.
pub fn voiced_unvoiced_voiced(f0_hz: f64, seed: u64) -> Result<Vowel> {
    make_vowel(
        |t| {
            if (1.0 / 3.0..2.0 / 3.0).contains(&t) {
                0.0
            } else {
                f0_hz
            }
        },
        &VowelConfig {
            seed,
            ..VowelConfig::default()
        },
    )
}

/// Central differences of `loss` at `params`, one coordinate at a time.
pub fn finite_difference_oracle(
    mut loss: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut x = params.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = loss(&x);
            x[i] = orig - step;
            let down = loss(&x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}
