//! Per-utterance estimation of F0, band aperiodicity and voicing by
//! adaptive-moment gradient descent on the pseudo-spectrogram, guide,
//! smoothness and reconstruction losses.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::audio::resample;
use crate::guide::{
    build_pitch_guide, grid_frequency, GuideConfig, PitchGuide, GRID_MAX_HZ, GRID_MIN_HZ,
};
use crate::pseudo::{PitchTrack, PseudoObjective, DEFAULT_EPS, MAX_F0_HZ, MIN_F0_HZ};
use crate::rng::derive_seed;
use crate::spectral::{
    AmplitudeSpectrogram, LagWindow, SpectralEnvelope, Stft, Window, DEFAULT_FFT_SIZE,
    DEFAULT_FRAME_SHIFT_S, DEFAULT_LIFTER_CUTOFF_S,
};
use crate::synth::{
    detect_voicing, Aperiodicity, BandAperiodicity, BapLayout, ExcitationSpectra, ReconObjective,
    VoicingMask, DEFAULT_BAP_ANCHORS_HZ, DEFAULT_THETA,
};
use crate::{Error, Frames, Result, Waveform, SAMPLE_RATE};

/// Relative weights of the loss terms.
///
/// The total-variation term is off by default. Adam rescales every
/// coordinate, so wherever the pitch loss is masked by the voicing decision
/// and the guide hinge is inactive, even a small smoothness gradient moves
/// the track at the full step size and flattens genuine pitch movement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pseudo: f64,
    pub guide: f64,
    pub recon: f64,
    pub tv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            pseudo: 10.0,
            guide: 1.0,
            recon: 5.0,
            tv: 0.0,
        }
    }
}

/// Repulsive weight used when optimising one utterance directly.
///
/// At 0.5 the reconstruction loss is the energy score, whose expectation is
/// minimised by matching the target's distribution. With a weaker repulsive
/// term the optimum on noise frames is an interior mixture near `A = 0.5`,
/// which leaves the voicing decision at chance there.
pub const ESTIMATOR_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub steps: usize,
    /// Leading steps that update only the aperiodicity, so that the voicing
    /// mask read by the pitch loss has left the neutral initial state.
    pub warmup_steps: usize,
    /// Adam step size for `log2 f0`, in octaves.
    pub lr_log2_f0: f64,
    pub lr_bap_logit: f64,
    pub weights: LossWeights,
    pub theta: f64,
    /// Guide hinge margin.
    pub m: f64,
    pub eps: f64,
    /// Weight of the repulsive term of the reconstruction loss. Defaults to
    /// [`ESTIMATOR_ALPHA`] rather than the loss's nominal 0.1.
    pub alpha: f64,
    pub seed: u64,
    pub fft_size: usize,
    pub frame_shift_s: f64,
    pub lifter_cutoff_s: f64,
    pub guide: GuideConfig,
    pub bap_anchors_hz: Vec<f64>,
    /// Starting F0 when the guide is disabled or every frame is silent.
    pub fallback_f0_hz: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            warmup_steps: 10,
            lr_log2_f0: 0.005,
            lr_bap_logit: 0.05,
            weights: LossWeights::default(),
            theta: DEFAULT_THETA,
            m: 0.5,
            eps: DEFAULT_EPS,
            alpha: ESTIMATOR_ALPHA,
            seed: 0,
            fft_size: DEFAULT_FFT_SIZE,
            frame_shift_s: DEFAULT_FRAME_SHIFT_S,
            lifter_cutoff_s: DEFAULT_LIFTER_CUTOFF_S,
            guide: GuideConfig::default(),
            bap_anchors_hz: DEFAULT_BAP_ANCHORS_HZ.to_vec(),
            // geometric centre of the guide grid
            fallback_f0_hz: (GRID_MIN_HZ * GRID_MAX_HZ).sqrt(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if self.steps == 0 {
            return Err(Error::param("steps", "must be positive"));
        }
        if self.warmup_steps >= self.steps {
            return Err(Error::param("warmup_steps", "must be fewer than steps"));
        }
        if [w.pseudo, w.guide, w.recon, w.tv]
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::param("weights", "must be finite and nonnegative"));
        }
        if !(self.lr_log2_f0 > 0.0) || !(self.lr_bap_logit > 0.0) {
            return Err(Error::param("learning rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::param("theta", "must lie in [0, 1]"));
        }
        if !(self.m >= 0.0) || !(self.alpha >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::param(
                "m, alpha, eps",
                "m and alpha must be nonnegative and eps positive",
            ));
        }
        if !(MIN_F0_HZ..=MAX_F0_HZ).contains(&self.fallback_f0_hz) {
            return Err(Error::param("fallback_f0_hz", "must lie in [20, 2000]"));
        }
        if !(self.frame_shift_s > 0.0) || !(self.lifter_cutoff_s > 0.0) {
            return Err(Error::param(
                "frame shift",
                "frame shift and lifter cutoff must be positive",
            ));
        }
        Ok(())
    }
}

/// Loss terms recorded after one optimisation step (weighted values).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub pseudo: f64,
    pub guide: f64,
    pub tv: f64,
    pub recon: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.pseudo + self.guide + self.tv + self.recon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub pitch: PitchTrack,
    pub bap: BandAperiodicity,
    pub aperiodicity: Aperiodicity,
    pub voicing: VoicingMask,
    pub loss_trace: Vec<LossBreakdown>,
    pub frame_shift_s: f64,
}

impl EstimationResult {
    /// Centred moving average (window 5, shrinking at the ends) of the total loss.
    pub fn smoothed_loss(&self) -> Vec<f64> {
        moving_average(
            &self
                .loss_trace
                .iter()
                .map(LossBreakdown::total)
                .collect::<Vec<_>>(),
            5,
        )
    }
}

fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// F0, envelope, aperiodicity and voicing of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct VocoderFeatureSet {
    pub pitch: PitchTrack,
    pub envelope: SpectralEnvelope,
    pub bap: BandAperiodicity,
    pub aperiodicity: Aperiodicity,
    pub voicing: VoicingMask,
    pub frame_shift_s: f64,
}

/// First-order optimiser state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.epsilon);
        }
    }
}

/// Starting point of the optimisation: the guide's per-frame argmax, median
/// filtered over 5 frames, with silent frames filled by constant
/// extrapolation at the edges and `log2`-linear interpolation inside.
pub fn initialize(
    s: &AmplitudeSpectrogram,
    g: &PitchGuide,
    bands: usize,
) -> Result<(PitchTrack, BandAperiodicity)> {
    if g.frames() != s.frames() {
        return Err(Error::shape("pitch guide frames", s.frames(), g.frames()));
    }
    let t = g.frames();
    let raw: Vec<Option<f64>> = (0..t)
        .map(|i| (!g.is_silent(i)).then(|| grid_frequency(g.argmax(i)).log2()))
        .collect();
    if raw.iter().all(Option::is_none) {
        return Err(Error::NoHarmonicContent);
    }
    let mut filtered: Vec<Option<f64>> = (0..t)
        .map(|i| {
            raw[i]?;
            let mut window: Vec<f64> = raw[i.saturating_sub(2)..(i + 3).min(t)]
                .iter()
                .flatten()
                .copied()
                .collect();
            window.sort_by(f64::total_cmp);
            Some(window[window.len() / 2])
        })
        .collect();
    fill_gaps(&mut filtered);
    let log2: Vec<f64> = filtered
        .into_iter()
        .map(|v| v.expect("gaps filled"))
        .collect();
    Ok((
        PitchTrack::from_log2(log2)?.clamped(MIN_F0_HZ, MAX_F0_HZ),
        BandAperiodicity::constant(t, bands, 0.5)?,
    ))
}

fn fill_gaps(values: &mut [Option<f64>]) {
    let known: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return;
    };
    let (head, tail) = (values[first], values[last]);
    values[..first].iter_mut().for_each(|v| *v = head);
    values[last + 1..].iter_mut().for_each(|v| *v = tail);
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (values[a].unwrap_or_default(), values[b].unwrap_or_default());
        for i in a + 1..b {
            let w = (i - a) as f64 / (b - a) as f64;
            values[i] = Some(va * (1.0 - w) + vb * w);
        }
    }
}

/// Fixed analysis products of one utterance.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub spectrogram: AmplitudeSpectrogram,
    pub envelope: SpectralEnvelope,
    pub fine_structure: Frames,
    pub guide: PitchGuide,
    pub samples: usize,
    lag: LagWindow,
    stft: Stft,
}

impl Analysis {
    pub fn new(w: &Waveform, cfg: &EstimatorConfig) -> Result<Self> {
        let w = resample(w, SAMPLE_RATE)?;
        if w.is_empty() {
            return Err(Error::Empty("waveform"));
        }
        let stft = Stft::new(cfg.fft_size, cfg.frame_shift_s, SAMPLE_RATE, Window::Hann)?;
        let spectrogram = stft.amplitude(&w)?;
        let lag = LagWindow::for_spectrogram(&spectrogram, cfg.lifter_cutoff_s)?;
        let log_s = spectrogram.log_floored();
        let smooth = lag.apply(&log_s);
        let fine_structure = log_s.zip_map(&smooth, |a, b| a - b)?;
        let guide = build_pitch_guide(
            &spectrogram,
            &GuideConfig {
                lifter_cutoff_s: cfg.lifter_cutoff_s,
                ..cfg.guide
            },
        )?;
        Ok(Self {
            envelope: SpectralEnvelope { log_values: smooth },
            spectrogram,
            fine_structure,
            guide,
            samples: w.len(),
            lag,
            stft,
        })
    }

    pub fn lag_window(&self) -> &LagWindow {
        &self.lag
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }
}

/// Running state of the optimisation, exposed so callers can inspect
/// intermediate spectra.
#[derive(Debug, Clone)]
pub struct Estimator<'a> {
    cfg: &'a EstimatorConfig,
    analysis: &'a Analysis,
    layout: BapLayout,
    h_amp: Frames,
    log2_f0: Vec<f64>,
    logits: Frames,
    f0_opt: Adam,
    bap_opt: Adam,
    step: usize,
    trace: Vec<LossBreakdown>,
}

impl<'a> Estimator<'a> {
    pub fn new(analysis: &'a Analysis, cfg: &'a EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let s = &analysis.spectrogram;
        let layout = BapLayout::new(&cfg.bap_anchors_hz, s.bins(), s.sample_rate())?;
        let bands = layout.bands();
        let (p0, b0) = if cfg.weights.guide > 0.0 {
            match initialize(s, &analysis.guide, bands) {
                Ok(init) => init,
                Err(Error::NoHarmonicContent) => {
                    fallback_init(s.frames(), bands, cfg.fallback_f0_hz)?
                }
                Err(e) => return Err(e),
            }
        } else {
            fallback_init(s.frames(), bands, cfg.fallback_f0_hz)?
        };
        let t = s.frames();
        Ok(Self {
            cfg,
            analysis,
            h_amp: analysis.envelope.amplitude(),
            log2_f0: p0.log2_f0().to_vec(),
            logits: b0.logits(),
            f0_opt: Adam::new(t, cfg.lr_log2_f0),
            bap_opt: Adam::new(t * bands, cfg.lr_bap_logit),
            layout,
            step: 0,
            trace: Vec::with_capacity(cfg.steps),
        })
    }

    pub fn pitch(&self) -> Result<PitchTrack> {
        PitchTrack::from_log2(self.log2_f0.clone())
    }

    pub fn bap(&self) -> Result<BandAperiodicity> {
        BandAperiodicity::from_logits(&self.logits)
    }

    pub fn aperiodicity(&self) -> Result<Aperiodicity> {
        self.layout.interpolate(&self.bap()?)
    }

    pub fn voicing(&self) -> Result<VoicingMask> {
        detect_voicing(
            &self.analysis.envelope,
            &self.aperiodicity()?,
            self.cfg.theta,
        )
    }

    fn step_seeds(&self) -> [u64; 3] {
        let base = derive_seed(self.cfg.seed, self.step as u64);
        [
            derive_seed(base, 1),
            derive_seed(base, 2),
            derive_seed(base, 3),
        ]
    }

    fn excitation(&self, p: &PitchTrack, seeds: [u64; 2]) -> Result<ExcitationSpectra> {
        ExcitationSpectra::compute(p, &self.analysis.stft, self.analysis.samples, seeds)
    }

    pub fn logits(&self) -> &Frames {
        &self.logits
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Excitation spectra and pseudo-noise seed the next step will use.
    pub fn step_excitation(&self) -> Result<(ExcitationSpectra, u64)> {
        let [noise_seed, s1, s2] = self.step_seeds();
        Ok((self.excitation(&self.pitch()?, [s1, s2])?, noise_seed))
    }

    /// Reconstruction objective for the current state and given excitation.
    pub fn recon_context<'b>(
        &'b self,
        excitation: &'b ExcitationSpectra,
    ) -> Result<ReconObjective<'b>> {
        ReconObjective::new(
            &self.analysis.fine_structure,
            &self.analysis.lag,
            &self.layout,
            &self.h_amp,
            excitation,
            self.cfg.alpha,
        )
    }

    /// The aperiodic excitation spectrum rescaled so that its level relative
    /// to the unit-peak pseudo comb matches the synthesizer's relative level
    /// of noise to harmonics: a harmonic of the normalised source peaks at
    /// `sum(window) / (2 sqrt(count))` in the STFT.
    fn pseudo_aperiodic(&self, p: &PitchTrack, noise: &Frames) -> Frames {
        let window_sum: f64 = self.analysis.stft.window().iter().sum();
        let nyquist = self.analysis.spectrogram.sample_rate() as f64 / 2.0;
        let mut out = noise.clone();
        for (t, f0) in p.f0_hz().iter().enumerate() {
            let count = ((nyquist / f0).ceil() - 1.0).max(1.0);
            let scale = 2.0 * count.sqrt() / window_sum;
            out.row_mut(t).iter_mut().for_each(|v| *v *= scale);
        }
        out
    }

    /// Pseudo-loss objective for the current state and the given seeds.
    pub fn pseudo_context<'b>(
        &'b self,
        excitation: &ExcitationSpectra,
        voiced: &'b [bool],
        noise_seed: u64,
    ) -> Result<PseudoObjective<'b>> {
        let p = self.pitch()?;
        let a = self.aperiodicity()?;
        PseudoObjective::new(
            &self.analysis.fine_structure,
            &self.analysis.lag,
            &self.h_amp,
            &a,
            &self.pseudo_aperiodic(&p, &excitation.aperiodic[0]),
            voiced,
            self.cfg.eps,
            noise_seed,
            self.analysis.spectrogram.sample_rate(),
        )
    }

    /// One update of `log2 f0` and of the aperiodicity logits.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let cfg = self.cfg;
        let w = cfg.weights;
        let t = self.log2_f0.len();
        let [noise_seed, s1, s2] = self.step_seeds();
        let p = self.pitch()?;
        let voicing = self.voicing()?;
        let excitation = self.excitation(&p, [s1, s2])?;
        let mut breakdown = LossBreakdown::default();
        let mut grad = vec![0.0; t];

        if w.pseudo > 0.0 {
            let objective = self.pseudo_context(&excitation, voicing.flags(), noise_seed)?;
            let eval = objective.evaluate(&p)?;
            breakdown.pseudo = w.pseudo * eval.loss.value;
            grad.iter_mut()
                .zip(&eval.grad_log2_f0)
                .for_each(|(g, e)| *g += w.pseudo * e);
        }
        if w.guide > 0.0 {
            let g = &self.analysis.guide;
            let active: Vec<usize> = (0..t).filter(|&i| !g.is_silent(i)).collect();
            let norm = active.len().max(1) as f64;
            let mut total = 0.0;
            for &i in &active {
                let (value, slope) = g.value_and_slope(i, self.log2_f0[i]);
                let hinge = 1.0 - value - cfg.m;
                if hinge > 0.0 {
                    total += hinge;
                    let inside =
                        (GRID_MIN_HZ.log2()..=GRID_MAX_HZ.log2()).contains(&self.log2_f0[i]);
                    if inside {
                        grad[i] -= w.guide * slope / norm;
                    }
                }
            }
            breakdown.guide = w.guide * total / norm;
        }
        if w.tv > 0.0 {
            let mut total = 0.0;
            for i in 1..t {
                let d = self.log2_f0[i] - self.log2_f0[i - 1];
                total += d.abs();
                let s = crate::pseudo::sign(d) * w.tv;
                grad[i] += s;
                grad[i - 1] -= s;
            }
            breakdown.tv = w.tv * total;
        }
        if w.recon > 0.0 {
            let objective = self.recon_context(&excitation)?;
            let eval = objective.evaluate(&self.logits)?;
            breakdown.recon = w.recon * eval.loss;
            let g: Vec<f64> = eval
                .grad_logits
                .as_slice()
                .iter()
                .map(|v| w.recon * v)
                .collect();
            self.bap_opt.step(self.logits.as_mut_slice(), &g);
        }
        if self.step >= cfg.warmup_steps {
            self.f0_opt.step(&mut self.log2_f0, &grad);
            let (lo, hi) = (MIN_F0_HZ.log2(), MAX_F0_HZ.log2());
            self.log2_f0.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        }
        self.step += 1;
        self.trace.push(breakdown);
        Ok(breakdown)
    }

    pub fn run(mut self) -> Result<EstimationResult> {
        while self.step < self.cfg.steps {
            self.step()?;
        }
        self.finish()
    }

    pub fn finish(self) -> Result<EstimationResult> {
        Ok(EstimationResult {
            pitch: self.pitch()?,
            bap: self.bap()?,
            aperiodicity: self.aperiodicity()?,
            voicing: self.voicing()?,
            loss_trace: self.trace,
            frame_shift_s: self.cfg.frame_shift_s,
        })
    }
}

fn fallback_init(
    frames: usize,
    bands: usize,
    f0_hz: f64,
) -> Result<(PitchTrack, BandAperiodicity)> {
    Ok((
        PitchTrack::constant(frames, f0_hz)?,
        BandAperiodicity::constant(frames, bands, 0.5)?,
    ))
}

/// Runs the full optimisation on `w` (resampled to the internal rate).
pub fn estimate(w: &Waveform, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    let analysis = Analysis::new(w, cfg)?;
    Estimator::new(&analysis, cfg)?.run()
}

/// Estimation bundled with the lag-window envelope.
pub fn analyze_features(w: &Waveform, cfg: &EstimatorConfig) -> Result<VocoderFeatureSet> {
    cfg.validate()?;
    let analysis = Analysis::new(w, cfg)?;
    let result = Estimator::new(&analysis, cfg)?.run()?;
    Ok(VocoderFeatureSet {
        pitch: result.pitch,
        envelope: analysis.envelope,
        bap: result.bap,
        aperiodicity: result.aperiodicity,
        voicing: result.voicing,
        frame_shift_s: cfg.frame_shift_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_filling() {
        let mut v = vec![None, Some(1.0), None, None, Some(4.0), None];
        fill_gaps(&mut v);
        assert_eq!(
            v,
            vec![
                Some(1.0),
                Some(1.0),
                Some(2.0),
                Some(3.0),
                Some(4.0),
                Some(4.0)
            ]
        );
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut x, &g);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = EstimatorConfig {
            steps: 0,
            ..EstimatorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
