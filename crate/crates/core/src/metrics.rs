//! Pitch evaluation metrics against reference labels.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::pseudo::PitchTrack;
use crate::synth::VoicingMask;
use crate::{Error, PitchLabelTrack, Result};

/// Estimated F0 with frame times and voicing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedPitch {
    times: Vec<f64>,
    f0_hz: Vec<f64>,
    voiced: Vec<bool>,
}

impl EstimatedPitch {
    pub fn new(times: Vec<f64>, f0_hz: Vec<f64>, voiced: Vec<bool>) -> Result<Self> {
        if f0_hz.len() != times.len() {
            return Err(Error::shape("estimated f0", times.len(), f0_hz.len()));
        }
        if voiced.len() != times.len() {
            return Err(Error::shape("estimated voicing", times.len(), voiced.len()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if f0_hz.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::param(
                "estimated f0",
                "must be finite and nonnegative",
            ));
        }
        Ok(Self {
            times,
            f0_hz,
            voiced,
        })
    }

    /// Frames at `t * frame_shift_s`.
    pub fn from_track(p: &PitchTrack, v: &VoicingMask, frame_shift_s: f64) -> Result<Self> {
        let times = (0..p.len()).map(|t| t as f64 * frame_shift_s).collect();
        Self::new(times, p.f0_hz().to_vec(), v.flags().to_vec())
    }

    /// Treats frames with positive F0 as voiced.
    pub fn from_labels(labels: &PitchLabelTrack) -> Result<Self> {
        Self::new(
            labels.times().to_vec(),
            labels.f0_hz().to_vec(),
            labels.voiced().collect(),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }
}

/// For every reference frame, the index of the nearest estimated frame. Fails
/// when a reference frame has no estimate within `tolerance_s`.
pub fn align(est_times: &[f64], ref_times: &[f64], tolerance_s: f64) -> Result<Vec<usize>> {
    if est_times.is_empty() {
        return Err(Error::Empty("estimated frames"));
    }
    ref_times
        .iter()
        .map(|&r| {
            let i = est_times.partition_point(|&e| e < r);
            let best = [i.checked_sub(1), (i < est_times.len()).then_some(i)]
                .into_iter()
                .flatten()
                .min_by(|&a, &b| {
                    (est_times[a] - r)
                        .abs()
                        .total_cmp(&(est_times[b] - r).abs())
                })
                .expect("at least one neighbour");
            if (est_times[best] - r).abs() <= tolerance_s {
                Ok(best)
            } else {
                Err(Error::Alignment(alloc::format!(
                    "no estimate within {tolerance_s} s of {r} s"
                )))
            }
        })
        .collect()
}

/// Median spacing of the reference frames, halved.
fn default_tolerance(reference: &PitchLabelTrack) -> f64 {
    let mut gaps: Vec<f64> = reference.times().windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return f64::INFINITY;
    }
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2] / 2.0
}

/// Pairs of `(estimate, reference)` F0 over reference-voiced frames.
fn voiced_pairs(
    est: &EstimatedPitch,
    reference: &PitchLabelTrack,
    tolerance_s: f64,
) -> Result<Vec<(f64, f64)>> {
    let idx = align(&est.times, reference.times(), tolerance_s)?;
    let pairs: Vec<(f64, f64)> = idx
        .iter()
        .zip(reference.f0_hz())
        .filter(|(_, &r)| r > 0.0)
        .map(|(&i, &r)| (est.f0_hz[i], r))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    Ok(pairs)
}

fn cents(est: f64, reference: f64) -> f64 {
    if est > 0.0 {
        1200.0 * (est / reference).log2()
    } else {
        f64::INFINITY
    }
}

fn chroma_cents(c: f64) -> f64 {
    if c.is_finite() {
        (c - 1200.0 * (c / 1200.0).round()).abs()
    } else {
        f64::INFINITY
    }
}

/// Fraction of reference-voiced frames whose estimate lies within
/// `cents_tol` of the reference. The estimate's voicing is not consulted.
pub fn raw_pitch_accuracy(
    est: &EstimatedPitch,
    reference: &PitchLabelTrack,
    cents_tol: f64,
) -> Result<f64> {
    let pairs = voiced_pairs(est, reference, default_tolerance(reference))?;
    let hits = pairs
        .iter()
        .filter(|(e, r)| cents(*e, *r).abs() <= cents_tol)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// As [`raw_pitch_accuracy`] with octave errors forgiven.
pub fn raw_chroma_accuracy(
    est: &EstimatedPitch,
    reference: &PitchLabelTrack,
    cents_tol: f64,
) -> Result<f64> {
    let pairs = voiced_pairs(est, reference, default_tolerance(reference))?;
    let hits = pairs
        .iter()
        .filter(|(e, r)| chroma_cents(cents(*e, *r)) <= cents_tol)
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

/// Root mean square log-F0 difference over reference-voiced frames.
pub fn log_f0_rmse(
    est: &EstimatedPitch,
    reference: &PitchLabelTrack,
    base: LogBase,
) -> Result<f64> {
    let pairs = voiced_pairs(est, reference, default_tolerance(reference))?;
    let log = |x: f64| match base {
        LogBase::Natural => x.ln(),
        LogBase::Two => x.log2(),
    };
    let sum: f64 = pairs
        .iter()
        .map(|(e, r)| {
            if *e > 0.0 {
                (log(*e) - log(*r)).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Fraction of all reference frames whose voicing flag disagrees.
pub fn vuv_error_rate(est: &EstimatedPitch, reference: &PitchLabelTrack) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("reference frames"));
    }
    let idx = align(&est.times, reference.times(), default_tolerance(reference))?;
    let wrong = idx
        .iter()
        .zip(reference.voiced())
        .filter(|(&i, r)| est.voiced[i] != *r)
        .count();
    Ok(wrong as f64 / reference.len() as f64)
}

/// All metrics for one utterance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub rpa_50: f64,
    pub rpa_100: f64,
    pub rca_50: f64,
    pub log_f0_rmse: f64,
    pub vuv_error_rate: f64,
    pub frames: usize,
    pub voiced_frames: usize,
}

pub fn evaluate(
    est: &EstimatedPitch,
    reference: &PitchLabelTrack,
    base: LogBase,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        rpa_50: raw_pitch_accuracy(est, reference, 50.0)?,
        rpa_100: raw_pitch_accuracy(est, reference, 100.0)?,
        rca_50: raw_chroma_accuracy(est, reference, 50.0)?,
        log_f0_rmse: log_f0_rmse(est, reference, base)?,
        vuv_error_rate: vuv_error_rate(est, reference)?,
        frames: reference.len(),
        voiced_frames: reference.voiced().filter(|&v| v).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn reference(f0: Vec<f64>) -> PitchLabelTrack {
        PitchLabelTrack::uniform(0.01, f0).unwrap()
    }

    fn estimate(f0: Vec<f64>) -> EstimatedPitch {
        let n = f0.len();
        let voiced = f0.iter().map(|&f| f > 0.0).collect();
        EstimatedPitch::new((0..n).map(|t| t as f64 * 0.01).collect(), f0, voiced).unwrap()
    }

    #[test]
    fn cent_boundaries() {
        let r = reference(vec![200.0]);
        let inside = estimate(vec![200.0 * 2f64.powf(49.0 / 1200.0)]);
        let outside = estimate(vec![200.0 * 2f64.powf(51.0 / 1200.0)]);
        assert_eq!(raw_pitch_accuracy(&inside, &r, 50.0).unwrap(), 1.0);
        assert_eq!(raw_pitch_accuracy(&outside, &r, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn octave_errors() {
        let r = reference(vec![200.0, 200.0]);
        let doubled = estimate(vec![400.0, 400.0]);
        assert_eq!(raw_chroma_accuracy(&doubled, &r, 50.0).unwrap(), 1.0);
        assert_eq!(raw_pitch_accuracy(&doubled, &r, 50.0).unwrap(), 0.0);
        let tritone = estimate(vec![200.0 * 2f64.powf(650.0 / 1200.0); 2]);
        assert_eq!(raw_chroma_accuracy(&tritone, &r, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn rmse_units() {
        let r = reference(vec![150.0; 10]);
        let e = estimate(vec![150.0 * 0.018f64.exp(); 10]);
        assert!((log_f0_rmse(&e, &r, LogBase::Natural).unwrap() - 0.018).abs() < 1e-12);
        assert!(
            (log_f0_rmse(&e, &r, LogBase::Two).unwrap() - 0.018 / core::f64::consts::LN_2).abs()
                < 1e-12
        );
    }

    #[test]
    fn vuv_rates() {
        let mut f0 = vec![100.0; 100];
        f0[..50].iter_mut().for_each(|f| *f = 0.0);
        let r = reference(f0.clone());
        assert_eq!(vuv_error_rate(&estimate(f0.clone()), &r).unwrap(), 0.0);
        let inverted: Vec<f64> = f0
            .iter()
            .map(|&f| if f > 0.0 { 0.0 } else { 100.0 })
            .collect();
        assert_eq!(vuv_error_rate(&estimate(inverted), &r).unwrap(), 1.0);
        let mut one = f0.clone();
        one[0] = 100.0;
        assert!((vuv_error_rate(&estimate(one), &r).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn unvoiced_reference_is_flagged() {
        let r = reference(vec![0.0; 3]);
        assert!(matches!(
            raw_pitch_accuracy(&estimate(vec![100.0; 3]), &r, 50.0),
            Err(Error::NoVoicedFrames)
        ));
    }

    #[test]
    fn alignment_tolerance() {
        assert_eq!(
            align(&[0.0, 0.005, 0.01], &[0.004, 0.0099], 0.0025).unwrap(),
            vec![1, 2]
        );
        assert!(align(&[0.0, 0.1], &[0.05], 0.01).is_err());
    }
}
