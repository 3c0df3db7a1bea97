//! Analytic gradients of the pseudo and reconstruction objectives checked
//! against central finite differences on the flat vowel fixture.

use pitchdsp_core::estimator::{Analysis, Estimator, EstimatorConfig};
use pitchdsp_core::fixtures::{finite_difference_oracle, flat_vowel};
use pitchdsp_core::{Frames, PitchTrack};

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn analysis() -> (Analysis, EstimatorConfig) {
    let cfg = EstimatorConfig::default();
    let v = flat_vowel(200.0, 1).unwrap();
    (Analysis::new(&v.waveform, &cfg).unwrap(), cfg)
}

/// A few cents of deterministic jitter around 200 Hz, away from any grid.
fn jittered_track(frames: usize) -> PitchTrack {
    PitchTrack::from_hz(
        (0..frames)
            .map(|i| 200.0 * 2f64.powf(((i * 37 % 41) as f64 - 20.0) / 1200.0))
            .collect(),
    )
    .unwrap()
}

#[test]
fn pseudo_gradient_matches_fine_central_differences() {
    let (analysis, cfg) = analysis();
    let est = Estimator::new(&analysis, &cfg).unwrap();
    let (excitation, noise_seed) = est.step_excitation().unwrap();
    let voicing = est.voicing().unwrap();
    let objective = est
        .pseudo_context(&excitation, voicing.flags(), noise_seed)
        .unwrap();
    let t = analysis.spectrogram.frames();
    let p = jittered_track(t);
    let eval = objective.evaluate(&p).unwrap();

    let summed: f64 = objective.frame_losses(&p).unwrap().iter().sum();
    assert!((summed - eval.loss.value).abs() <= 1e-9 * summed);

    // the loss is piecewise smooth with triangle-peak kinks, so a step far
    // below the kink spacing isolates the derivative of the local branch
    let voiced: Vec<usize> = (0..t).filter(|&i| voicing.flags()[i]).collect();
    assert_eq!(voiced.len(), eval.loss.voiced_frames);
    let norm = (voiced.len() * analysis.spectrogram.bins()) as f64;
    let matched = voiced
        .iter()
        .filter(|&&i| {
            let fd = finite_difference_oracle(
                |x| objective.frame_distance(i, x[0]) / norm,
                &[p.log2_f0()[i]],
                1e-7,
            )[0];
            relative_error(eval.grad_log2_f0[i], fd) < 1e-3
        })
        .count();
    assert!(
        matched as f64 >= 0.95 * voiced.len() as f64,
        "{matched} of {} voiced frames matched",
        voiced.len()
    );
}

#[test]
fn recon_gradient_matches_central_differences() {
    let (analysis, cfg) = analysis();
    let est = Estimator::new(&analysis, &cfg).unwrap();
    let (excitation, _) = est.step_excitation().unwrap();
    let objective = est.recon_context(&excitation).unwrap();
    let t = analysis.spectrogram.frames();
    let bands = est.logits().cols();
    let logits = Frames::from_fn(t, bands, |r, c| ((r * 7 + c * 3) % 11) as f64 * 0.3 - 1.5);
    let eval = objective.evaluate(&logits).unwrap();

    let summed: f64 = (0..t).map(|r| objective.frame_loss(r, logits.row(r))).sum();
    assert!((summed - eval.loss).abs() <= 1e-9 * summed.abs());

    let mut matched = 0;
    for r in 0..t {
        let fd = finite_difference_oracle(|x| objective.frame_loss(r, x), logits.row(r), 1e-3);
        matched += (0..bands)
            .filter(|&j| relative_error(eval.grad_logits.get(r, j), fd[j]) < 5e-3)
            .count();
    }
    assert!(
        matched as f64 >= 0.9 * (t * bands) as f64,
        "{matched} of {} entries matched",
        t * bands
    );
}

#[test]
fn clamped_logits_receive_no_gradient() {
    let (analysis, cfg) = analysis();
    let est = Estimator::new(&analysis, &cfg).unwrap();
    let (excitation, _) = est.step_excitation().unwrap();
    let objective = est.recon_context(&excitation).unwrap();
    let t = analysis.spectrogram.frames();
    let logits = Frames::filled(t, est.logits().cols(), 40.0);
    let eval = objective.evaluate(&logits).unwrap();
    assert!(eval.grad_logits.as_slice().iter().all(|&g| g == 0.0));
}
