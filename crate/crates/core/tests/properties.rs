//! Randomised invariants across the analysis, guide, pseudo, synthesis,
//! auxiliary-loss and metric modules.

use proptest::prelude::*;

use pitchdsp_core::audio::resample;
use pitchdsp_core::cqt::{
    shift_scope, CqtMatrix, CQT_BINS, CQT_MIN_HZ, MAX_SCOPE_SHIFT, SCOPE_BINS,
};
use pitchdsp_core::fixtures::{flat_vowel, vibrato_vowel, voiced_unvoiced_voiced};
use pitchdsp_core::guide::{grid_frequency, guide_loss, shs, GRID_BINS};
use pitchdsp_core::losses::{augment_with_draw, consistency_loss, measured_snr_db};
use pitchdsp_core::metrics::{
    evaluate, raw_chroma_accuracy, raw_pitch_accuracy, EstimatedPitch, LogBase,
};
use pitchdsp_core::pseudo::{phase_matrix, pseudo_periodic_excitation, triangle, DEFAULT_EPS};
use pitchdsp_core::spectral::{lag_window_envelope, LagWindow, DEFAULT_LIFTER_CUTOFF_S};
use pitchdsp_core::synth::{detect_voicing, synthesize};
use pitchdsp_core::{
    AmplitudeSpectrogram, Aperiodicity, Frames, PitchDistribution, PitchGuide, PitchLabelTrack,
    PitchTrack, SpectralEnvelope, Waveform, SAMPLE_RATE,
};

const BINS: usize = 128;

fn frames_in(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Frames> {
    prop::collection::vec(lo..hi, rows * cols)
        .prop_map(move |v| Frames::from_vec(rows, cols, v).unwrap())
}

fn lag() -> LagWindow {
    LagWindow::new(BINS, DEFAULT_LIFTER_CUTOFF_S, SAMPLE_RATE).unwrap()
}

fn max_abs_diff(a: &Frames, b: &Frames) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fine_structure_plus_envelope_is_the_floored_log(s in frames_in(3, BINS, 0.0, 2.0)) {
        let s = AmplitudeSpectrogram::new(s, 0.005, SAMPLE_RATE).unwrap();
        let lag = lag();
        let log = s.log_floored();
        let env = lag.apply(&log);
        let fine = lag.fine_structure_of_log(&log);
        let sum = env.zip_map(&fine, |a, b| a + b).unwrap();
        prop_assert!(max_abs_diff(&sum, &log) < 1e-12);
    }

    #[test]
    fn envelope_is_idempotent_on_pass_band_spectra(
        coefs in prop::collection::vec(-1.0..1.0f64, 17),
        shift in -3.0..3.0f64,
    ) {
        // quefrencies below 17 samples sit in the flat part of the lag
        // window, where the lifter is a projection; the taper band is not
        let k = 1024;
        let log = Frames::from_fn(2, k, |t, c| {
            let j = (c + 1) as f64;
            shift * t as f64
                + coefs.iter().enumerate().map(|(q, a)| a * (std::f64::consts::PI * q as f64 * j / k as f64).cos()).sum::<f64>()
        });
        let s = AmplitudeSpectrogram::new(log.map(f64::exp), 0.005, SAMPLE_RATE).unwrap();
        let env = lag_window_envelope(&s, DEFAULT_LIFTER_CUTOFF_S).unwrap();
        let again = lag_window_envelope(
            &AmplitudeSpectrogram::new(env.amplitude(), 0.005, SAMPLE_RATE).unwrap(),
            DEFAULT_LIFTER_CUTOFF_S,
        )
        .unwrap();
        prop_assert!(max_abs_diff(&again.log_values, &env.log_values) < 1e-6);
    }

    #[test]
    fn fine_structure_is_linear_in_the_log(x in frames_in(2, BINS, -5.0, 5.0), y in frames_in(2, BINS, -5.0, 5.0)) {
        let lag = lag();
        let sum = x.zip_map(&y, |a, b| a + b).unwrap();
        let lhs = lag.fine_structure_of_log(&sum);
        let rhs = lag.fine_structure_of_log(&x).zip_map(&lag.fine_structure_of_log(&y), |a, b| a + b).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn scope_windows_compose_additively(
        c in frames_in(2, CQT_BINS, 0.0, 1.0),
        a in -(MAX_SCOPE_SHIFT as i32)..=(MAX_SCOPE_SHIFT as i32),
        b in -(MAX_SCOPE_SHIFT as i32)..=(MAX_SCOPE_SHIFT as i32),
    ) {
        prop_assume!((a + b).unsigned_abs() as usize <= MAX_SCOPE_SHIFT);
        let c = CqtMatrix::new(c, 24, CQT_MIN_HZ).unwrap();
        let first = shift_scope(&c, a).unwrap();
        let direct = shift_scope(&c, a + b).unwrap();
        // column j + b of the first window is column j of the combined one
        for j in 0..SCOPE_BINS {
            let k = j as i64 + b as i64;
            if (0..SCOPE_BINS as i64).contains(&k) {
                for t in 0..2 {
                    prop_assert_eq!(first.magnitudes().get(t, k as usize), direct.magnitudes().get(t, j));
                }
            }
        }
        prop_assert!((direct.min_hz() - c.bin_frequency((MAX_SCOPE_SHIFT as i32 + a + b) as usize)).abs() < 1e-9);
    }

    #[test]
    fn guide_loss_is_bounded(
        raw in frames_in(3, GRID_BINS, 0.0, 1.0),
        g in frames_in(3, GRID_BINS, 0.0, 1.0),
        m in 0.0..1.5f64,
    ) {
        let p = Frames::from_fn(3, GRID_BINS, |t, i| {
            let total: f64 = raw.row(t).iter().sum();
            raw.get(t, i) / total
        });
        let p = PitchDistribution::new(p).unwrap();
        let g = PitchGuide::new(g, vec![false; 3]).unwrap();
        let loss = guide_loss(&p, &g, m).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(loss <= (1.0 - m).max(0.0) + 1e-12);
        prop_assert!(loss <= 1.0);
    }

    #[test]
    fn subharmonic_summation_is_linear(
        x in frames_in(2, BINS, 0.0, 1.0),
        y in frames_in(2, BINS, 0.0, 1.0),
        a in 0.0..3.0f64,
        b in 0.0..3.0f64,
    ) {
        let mix = x.zip_map(&y, |u, v| a * u + b * v).unwrap();
        let lhs = shs(&mix, 15, 0.84, SAMPLE_RATE);
        let (sx, sy) = (shs(&x, 15, 0.84, SAMPLE_RATE), shs(&y, 15, 0.84, SAMPLE_RATE));
        let rhs = sx.zip_map(&sy, |u, v| a * u + b * v).unwrap();
        let scale = rhs.as_slice().iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12 * scale);
    }

    #[test]
    fn triangle_has_unit_period_above_half_a_cycle(whole in 0u32..200, frac in 512u32..1536, shift in 1u32..50) {
        // dyadic phases keep the integer shift exact in floating point
        let phi = whole as f64 + frac as f64 / 1024.0;
        prop_assume!(phi >= 0.5);
        let max_term = |x: f64| triangle(x).max(DEFAULT_EPS).powi(2);
        prop_assert_eq!(max_term(phi), max_term(phi + shift as f64));
    }

    #[test]
    fn pseudo_excitation_repeats_under_a_seed(
        hz in prop::collection::vec(40.0..1000.0f64, 1..6),
        seed in any::<u64>(),
    ) {
        let p = PitchTrack::from_hz(hz).unwrap();
        let a = pseudo_periodic_excitation(&p, DEFAULT_EPS, seed, SAMPLE_RATE, BINS, 0.005).unwrap();
        let b = pseudo_periodic_excitation(&p, DEFAULT_EPS, seed, SAMPLE_RATE, BINS, 0.005).unwrap();
        prop_assert_eq!(a.values().as_slice(), b.values().as_slice());
        let phi = phase_matrix(&p, SAMPLE_RATE, BINS).unwrap();
        prop_assert!(phi.rows_iter().all(|r| r.windows(2).all(|w| w[1] > w[0])));
    }

    #[test]
    fn soft_voicing_is_a_ratio(
        h in frames_in(4, BINS, -8.0, 3.0),
        a in frames_in(4, BINS, 1e-4, 1.0 - 1e-4),
        k in -4i32..4,
    ) {
        let a = Aperiodicity::new(a).unwrap();
        let base = detect_voicing(&SpectralEnvelope { log_values: h.clone() }, &a, 0.5).unwrap();
        prop_assert!(base.soft_ratio().iter().all(|r| (0.0..=1.0).contains(r)));
        let shift = k as f64 * std::f64::consts::LN_2;
        let scaled = detect_voicing(&SpectralEnvelope { log_values: h.map(|v| v + shift) }, &a, 0.5).unwrap();
        for (x, y) in base.soft_ratio().iter().zip(scaled.soft_ratio()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn consistency_loss_is_symmetric_and_scale_free(
        hz in prop::collection::vec((50.0..900.0f64, 50.0..900.0f64), 1..30),
        d in -24.0..24.0f64,
        c in 0.25..4.0f64,
    ) {
        let p = PitchTrack::from_hz(hz.iter().map(|x| x.0).collect()).unwrap();
        let q = PitchTrack::from_hz(hz.iter().map(|x| x.1).collect()).unwrap();
        prop_assert_eq!(consistency_loss(&p, &q, d).unwrap(), consistency_loss(&q, &p, -d).unwrap());
        let ps = PitchTrack::from_hz(p.f0_hz().iter().map(|x| x * c).collect()).unwrap();
        let qs = PitchTrack::from_hz(q.f0_hz().iter().map(|x| x * c).collect()).unwrap();
        let (base, scaled) = (consistency_loss(&p, &q, d).unwrap(), consistency_loss(&ps, &qs, d).unwrap());
        prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1e-12));
    }

    #[test]
    fn metric_orderings_and_permutation_invariance(
        frames in prop::collection::vec((prop::option::of(30.0..1500.0f64), 0.0..2000.0f64, any::<bool>()), 2..60),
        perm_seed in any::<u64>(),
    ) {
        prop_assume!(frames.iter().any(|f| f.0.is_some()));
        let build = |order: &[usize]| {
            let reference: Vec<f64> = order.iter().map(|&i| frames[i].0.unwrap_or(0.0)).collect();
            let est: Vec<f64> = order.iter().map(|&i| frames[i].1).collect();
            let voiced: Vec<bool> = order.iter().map(|&i| frames[i].2).collect();
            let times: Vec<f64> = (0..order.len()).map(|i| i as f64 * 0.005).collect();
            (
                EstimatedPitch::new(times.clone(), est, voiced).unwrap(),
                PitchLabelTrack::new(times, reference).unwrap(),
            )
        };
        let identity: Vec<usize> = (0..frames.len()).collect();
        let (e, r) = build(&identity);
        let (rpa50, rpa100) = (raw_pitch_accuracy(&e, &r, 50.0).unwrap(), raw_pitch_accuracy(&e, &r, 100.0).unwrap());
        prop_assert!(raw_chroma_accuracy(&e, &r, 50.0).unwrap() >= rpa50);
        prop_assert!(rpa100 >= rpa50);

        let mut order = identity.clone();
        let mut state = perm_seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (ep, rp) = build(&order);
        let (a, b) = (evaluate(&e, &r, LogBase::Natural).unwrap(), evaluate(&ep, &rp, LogBase::Natural).unwrap());
        prop_assert_eq!(a.rpa_50, b.rpa_50);
        prop_assert_eq!(a.rpa_100, b.rpa_100);
        prop_assert_eq!(a.rca_50, b.rca_50);
        prop_assert_eq!(a.vuv_error_rate, b.vuv_error_rate);
        prop_assert!((a.log_f0_rmse - b.log_f0_rmse).abs() <= 1e-12 * a.log_f0_rmse.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn resampling_up_and_back_preserves_band_limited_signals(
        tones in prop::collection::vec((100.0..4000.0f64, 0.1..1.0f64, 0.0..6.28f64), 1..5),
    ) {
        let n = 6000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / SAMPLE_RATE as f64;
                tones.iter().map(|(f, a, ph)| a * (2.0 * std::f64::consts::PI * f * t + ph).sin()).sum()
            })
            .collect();
        let w = Waveform::new(x, SAMPLE_RATE).unwrap();
        let back = resample(&resample(&w, 2 * SAMPLE_RATE).unwrap(), SAMPLE_RATE).unwrap();
        prop_assert_eq!(back.len(), w.len());
        // the edges lack the full interpolation kernel
        let (signal, error) = (500..n - 500).fold((0.0, 0.0), |(s, e), i| {
            let d = back.samples()[i] - w.samples()[i];
            (s + w.samples()[i].powi(2), e + d * d)
        });
        prop_assert!(10.0 * (signal / error).log10() > 60.0);
    }

    #[test]
    fn pure_tone_argmax_moves_against_the_scope_shift(k in -7i32..=7) {
        let w = Waveform::new(
            (0..24_000).map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / SAMPLE_RATE as f64).sin()).collect(),
            SAMPLE_RATE,
        ).unwrap();
        let c = pitchdsp_core::cqt::cqt_analyze(&w).unwrap();
        let argmax = |m: &CqtMatrix| {
            let row = m.magnitudes().row(m.frames() / 2);
            (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap() as i32
        };
        let base = argmax(&shift_scope(&c, 0).unwrap());
        prop_assert_eq!(argmax(&shift_scope(&c, 2 * k).unwrap()), base - 2 * k);
    }

    #[test]
    fn augmentation_hits_the_drawn_snr(seed in any::<u64>()) {
        let v = flat_vowel(180.0, 3).unwrap();
        let (noisy, draw) = augment_with_draw(&v.waveform, -6.0, 6.0, seed).unwrap();
        let snr = measured_snr_db(&v.waveform, &noisy, draw.gain_db).unwrap();
        prop_assert!((snr - draw.snr_db).abs() < 0.5, "{} vs {}", snr, draw.snr_db);
    }

    #[test]
    fn fixtures_repeat_under_a_seed(seed in any::<u64>()) {
        prop_assert_eq!(flat_vowel(150.0, seed).unwrap(), flat_vowel(150.0, seed).unwrap());
        prop_assert_eq!(vibrato_vowel(220.0, 1.0, 5.0, seed).unwrap(), vibrato_vowel(220.0, 1.0, 5.0, seed).unwrap());
        prop_assert_eq!(voiced_unvoiced_voiced(200.0, seed).unwrap(), voiced_unvoiced_voiced(200.0, seed).unwrap());
    }

    #[test]
    fn synthesis_repeats_under_a_seed(seed in any::<u64>(), hz in 80.0..600.0f64) {
        let frames = 21;
        let p = PitchTrack::constant(frames, hz).unwrap();
        let h = SpectralEnvelope { log_values: Frames::zeros(frames, 1024) };
        let a = Aperiodicity::new(Frames::filled(frames, 1024, 0.3)).unwrap();
        let x = synthesize(&p, &h, &a, seed).unwrap();
        let y = synthesize(&p, &h, &a, seed).unwrap();
        prop_assert_eq!(&x, &y);
        let z = synthesize(&p, &h, &a, seed.wrapping_add(1)).unwrap();
        prop_assert_eq!(x.periodic, z.periodic);
    }
}

#[test]
fn guide_grid_endpoints_are_exact() {
    assert_eq!(grid_frequency(0), 20.0);
    assert_eq!(grid_frequency(GRID_BINS - 1), 2000.0);
}
