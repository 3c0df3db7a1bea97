//! Relative-pitch consistency, waveform augmentation and the losses that
//! compare estimates on clean and augmented input.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::Rng;

use crate::rng::{derive_seed, seeded, standard_normals};
use crate::synth::Aperiodicity;
use crate::{Error, PitchTrack, Result, Waveform};

pub const DEFAULT_HUBER_DELTA: f64 = 1.0;
pub const DEFAULT_MAX_SNR_DB: f64 = -6.0;
pub const DEFAULT_GAIN_RANGE_DB: f64 = 6.0;
/// Upper end of the SNR draw; the configurable bound is the noisy end.
pub const CLEANEST_SNR_DB: f64 = 30.0;

pub fn huber(x: f64, delta: f64) -> f64 {
    let a = x.abs();
    if a <= delta {
        0.5 * x * x
    } else {
        delta * (a - delta / 2.0)
    }
}

/// Mean Huber penalty on `log2 p - log2 p_shift + d / 12`, in octaves.
pub fn consistency_loss_with(
    p: &PitchTrack,
    p_shift: &PitchTrack,
    d_semitones: f64,
    delta: f64,
) -> Result<f64> {
    if p.len() != p_shift.len() {
        return Err(Error::shape("shifted pitch track", p.len(), p_shift.len()));
    }
    if p.is_empty() {
        return Err(Error::Empty("pitch track"));
    }
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    let offset = d_semitones / 12.0;
    let total: f64 = p
        .log2_f0()
        .iter()
        .zip(p_shift.log2_f0())
        .map(|(a, b)| huber((a - b + offset).abs(), delta))
        .sum();
    Ok(total / p.len() as f64)
}

pub fn consistency_loss(p: &PitchTrack, p_shift: &PitchTrack, d_semitones: f64) -> Result<f64> {
    consistency_loss_with(p, p_shift, d_semitones, DEFAULT_HUBER_DELTA)
}

/// Agreement between estimates on clean and augmented input.
pub fn aug_pitch_loss(p: &PitchTrack, p_aug: &PitchTrack) -> Result<f64> {
    consistency_loss(p, p_aug, 0.0)
}

/// Mean absolute difference of `ln A`.
pub fn aug_aperiodicity_loss(a_aug: &Aperiodicity, a: &Aperiodicity) -> Result<f64> {
    let (x, y) = (a_aug.values(), a.values());
    x.check_same_shape(y, "aperiodicity")?;
    let n = x.as_slice().len();
    if n == 0 {
        return Err(Error::Empty("aperiodicity"));
    }
    let total: f64 = x
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(u, v)| (u.ln() - v.ln()).abs())
        .sum();
    Ok(total / n as f64)
}

/// Random draws behind one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub snr_db: f64,
    pub gain_db: f64,
    pub noise_seed: u64,
}

impl AugmentDraw {
    /// SNR uniform in `[max_snr_db, 30]` dB and gain uniform in
    /// `[-gain_range_db, gain_range_db]`.
    pub fn sample(max_snr_db: f64, gain_range_db: f64, seed: u64) -> Result<Self> {
        if !max_snr_db.is_finite() || max_snr_db > CLEANEST_SNR_DB {
            return Err(Error::param(
                "max_snr_db",
                "must be finite and at most 30 dB",
            ));
        }
        if !gain_range_db.is_finite() || gain_range_db < 0.0 {
            return Err(Error::param(
                "gain_range_db",
                "must be finite and nonnegative",
            ));
        }
        let mut rng = seeded(derive_seed(seed, 0));
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        Ok(Self {
            snr_db: max_snr_db + u * (CLEANEST_SNR_DB - max_snr_db),
            gain_db: gain_range_db * (2.0 * v - 1.0),
            noise_seed: derive_seed(seed, 1),
        })
    }
}

/// Adds white noise at exactly `snr_db` relative to the signal power, then
/// scales the mixture by `gain_db`. Silent input stays silent.
pub fn mix_noise(w: &Waveform, snr_db: f64, gain_db: f64, noise_seed: u64) -> Result<Waveform> {
    let signal_power = w.power();
    let mut noise = standard_normals(noise_seed, w.len());
    let noise_power = noise.iter().map(|v| v * v).sum::<f64>() / noise.len().max(1) as f64;
    let scale = if noise_power > 0.0 {
        (signal_power / 10f64.powf(snr_db / 10.0) / noise_power).sqrt()
    } else {
        0.0
    };
    let gain = 10f64.powf(gain_db / 20.0);
    noise
        .iter_mut()
        .zip(w.samples())
        .for_each(|(n, s)| *n = gain * (s + scale * *n));
    Waveform::new(noise, w.sample_rate())
}

pub fn augment_with_draw(
    w: &Waveform,
    max_snr_db: f64,
    gain_range_db: f64,
    seed: u64,
) -> Result<(Waveform, AugmentDraw)> {
    let draw = AugmentDraw::sample(max_snr_db, gain_range_db, seed)?;
    Ok((
        mix_noise(w, draw.snr_db, draw.gain_db, draw.noise_seed)?,
        draw,
    ))
}

pub fn augment_waveform(
    w: &Waveform,
    max_snr_db: f64,
    gain_range_db: f64,
    seed: u64,
) -> Result<Waveform> {
    augment_with_draw(w, max_snr_db, gain_range_db, seed).map(|(out, _)| out)
}

/// Measured SNR in dB of `noisy` against `clean` after undoing `gain_db`.
pub fn measured_snr_db(clean: &Waveform, noisy: &Waveform, gain_db: f64) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::shape("noisy waveform", clean.len(), noisy.len()));
    }
    let gain = 10f64.powf(-gain_db / 20.0);
    let residual: Vec<f64> = noisy
        .samples()
        .iter()
        .zip(clean.samples())
        .map(|(n, c)| n * gain - c)
        .collect();
    let noise_power = residual.iter().map(|v| v * v).sum::<f64>() / residual.len().max(1) as f64;
    Ok(10.0 * (clean.power() / noise_power).log10())
}
