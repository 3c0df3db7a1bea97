//! Pitch, aperiodicity and voicing analysis of speech by gradient descent on
//! differentiable DSP spectra.
//!
//! The crate is `no_std` (with `alloc`) and free of IO. Every stochastic stage
//! takes an explicit seed so that analysis runs are bit-reproducible.
//!
//! Pipeline overview:
//!
//! * [`spectral`]: STFT amplitude, lag-window envelope, fine structure and
//!   minimum-phase responses.
//! * [`guide`]: subharmonic-summation pitch guide and hinge guide losses.
//! * [`pseudo`]: waveform-free pseudo periodic excitation spectrogram and the
//!   masked fine-structure loss with its analytic F0 gradient.
//! * [`synth`]: harmonic-plus-noise synthesizer, band aperiodicity, the
//!   reconstruction loss with its aperiodicity gradient, and V/UV detection.
//! * [`estimator`]: per-utterance optimisation tying the above together.
//! * [`metrics`]: RPA, RCA, log-F0 RMSE and V/UV error rate.
#![no_std]

extern crate alloc;

pub mod audio;
pub mod cqt;
mod error;
pub mod estimator;
pub mod fft;
pub mod fixtures;
pub mod guide;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod pseudo;
pub mod rng;
pub mod spectral;
pub mod synth;

pub use audio::{PitchLabelTrack, Waveform};
pub use error::{Error, Result};
pub use estimator::{estimate, EstimationResult, EstimatorConfig, VocoderFeatureSet};
pub use guide::{PitchDistribution, PitchGuide};
pub use matrix::Frames;
pub use pseudo::PitchTrack;
pub use spectral::{AmplitudeSpectrogram, FineStructureSpectrum, SpectralEnvelope};
pub use synth::{Aperiodicity, BandAperiodicity, VoicingMask};

/// Internal processing rate in Hz. Inputs at other rates are resampled.
pub const SAMPLE_RATE: u32 = 24_000;
