//! Harmonic-plus-noise synthesis, band aperiodicity, the generalized energy
//! distance reconstruction loss with its aperiodicity gradient, and the
//! voiced/unvoiced detector.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::fft::FftPlan;
use crate::pseudo::{sign, PitchTrack};
use crate::rng::white_noise;
use crate::spectral::{
    AmplitudeSpectrogram, LagWindow, MinimumPhase, SpectralEnvelope, Stft, Window, AMPLITUDE_FLOOR,
};
use crate::{Error, Frames, Result, Waveform};

pub const BAP_MIN: f64 = 1e-4;
pub const BAP_MAX: f64 = 1.0 - 1e-4;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_THETA: f64 = 0.5;
/// Standard deviation of the aperiodic source; its power equals the
/// normalised harmonic source power of 0.5.
pub const NOISE_STD: f64 = core::f64::consts::FRAC_1_SQRT_2;
pub const DEFAULT_BAP_ANCHORS_HZ: [f64; 8] =
    [0.0, 375.0, 750.0, 1500.0, 3000.0, 6000.0, 9000.0, 12000.0];

/// Band aperiodicity, `T x b` values clamped to `[1e-4, 1 - 1e-4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandAperiodicity {
    values: Frames,
}

impl BandAperiodicity {
    pub fn new(values: Frames) -> Result<Self> {
        if !values.all_finite() {
            return Err(Error::NonFinite("band aperiodicity"));
        }
        Ok(Self {
            values: values.map(|v| v.clamp(BAP_MIN, BAP_MAX)),
        })
    }

    pub fn constant(frames: usize, bands: usize, value: f64) -> Result<Self> {
        Self::new(Frames::filled(frames, bands, value))
    }

    pub fn from_logits(logits: &Frames) -> Result<Self> {
        Self::new(logits.map(sigmoid))
    }

    pub fn logits(&self) -> Frames {
        self.values.map(|b| (b / (1.0 - b)).ln())
    }

    pub fn values(&self) -> &Frames {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn bands(&self) -> usize {
        self.values.cols()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-bin aperiodicity, `T x K` values in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aperiodicity {
    values: Frames,
}

impl Aperiodicity {
    pub fn new(values: Frames) -> Result<Self> {
        if values.as_slice().iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::param("aperiodicity", "values must lie in (0, 1)"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Frames {
        &self.values
    }
}

/// Anchor frequencies of the aperiodicity bands and the resulting
/// interpolation weights for a given bin layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BapLayout {
    anchors_hz: Vec<f64>,
    /// `(lower band, upper band, weight of upper band)` per bin.
    segments: Vec<(usize, usize, f64)>,
}

impl BapLayout {
    pub fn new(anchors_hz: &[f64], bins: usize, sample_rate: u32) -> Result<Self> {
        if anchors_hz.is_empty() || anchors_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "bap anchors",
                "need strictly increasing anchor frequencies",
            ));
        }
        let bin_hz = sample_rate as f64 / (2 * bins) as f64;
        let last = anchors_hz.len() - 1;
        let segments = (0..bins)
            .map(|c| {
                let f = (c + 1) as f64 * bin_hz;
                if f <= anchors_hz[0] {
                    return (0, 0, 0.0);
                }
                if f >= anchors_hz[last] {
                    return (last, last, 0.0);
                }
                let i = anchors_hz.iter().rposition(|&a| a <= f).unwrap_or(0);
                let lambda = (f - anchors_hz[i]) / (anchors_hz[i + 1] - anchors_hz[i]);
                (i, i + 1, lambda)
            })
            .collect();
        Ok(Self {
            anchors_hz: anchors_hz.to_vec(),
            segments,
        })
    }

    pub fn default_for(bins: usize, sample_rate: u32) -> Self {
        Self::new(&DEFAULT_BAP_ANCHORS_HZ, bins, sample_rate)
            .expect("default anchors are increasing")
    }

    pub fn bands(&self) -> usize {
        self.anchors_hz.len()
    }

    pub fn bins(&self) -> usize {
        self.segments.len()
    }

    pub fn anchors_hz(&self) -> &[f64] {
        &self.anchors_hz
    }

    pub fn segments(&self) -> &[(usize, usize, f64)] {
        &self.segments
    }

    pub fn interpolate(&self, b: &BandAperiodicity) -> Result<Aperiodicity> {
        if b.bands() != self.bands() {
            return Err(Error::shape("aperiodicity bands", self.bands(), b.bands()));
        }
        let log_b = b.values.map(f64::ln);
        let values = Frames::from_fn(b.frames(), self.bins(), |t, c| {
            let (lo, hi, w) = self.segments[c];
            ((1.0 - w) * log_b.get(t, lo) + w * log_b.get(t, hi)).exp()
        });
        Aperiodicity::new(values)
    }
}

/// Log-amplitude linear interpolation of band values across `bins` bins
/// with the default anchor layout.
pub fn bap_to_aperiodicity(
    b: &BandAperiodicity,
    bins: usize,
    sample_rate: u32,
) -> Result<Aperiodicity> {
    BapLayout::default_for(bins, sample_rate).interpolate(b)
}

/// Sum of sines at every harmonic strictly below Nyquist, scaled by
/// `1 / sqrt(count)`. F0 is linearly interpolated between frame centres
/// `t * hop` and held beyond the ends.
pub fn harmonic_excitation(
    p: &PitchTrack,
    sample_rate: u32,
    hop: usize,
    n_samples: usize,
) -> Result<Waveform> {
    if p.is_empty() {
        return Err(Error::Empty("pitch track"));
    }
    if hop == 0 {
        return Err(Error::param("hop", "must be positive"));
    }
    let f0 = p.f0_hz();
    let fs = sample_rate as f64;
    let nyquist = fs / 2.0;
    let mut out = vec![0.0; n_samples];
    let mut phase = 0.0f64;
    for (n, o) in out.iter_mut().enumerate() {
        let pos = n as f64 / hop as f64;
        let i = pos.floor() as usize;
        let f = if i + 1 >= f0.len() {
            f0[f0.len() - 1]
        } else {
            let frac = pos - i as f64;
            f0[i] * (1.0 - frac) + f0[i + 1] * frac
        };
        let count = ((nyquist / f).ceil() as usize).saturating_sub(1);
        if count > 0 {
            *o = sine_sum(phase, count) / (count as f64).sqrt();
        }
        phase += 2.0 * core::f64::consts::PI * f / fs;
        if phase > 2.0 * core::f64::consts::PI {
            phase -= 2.0 * core::f64::consts::PI;
        }
    }
    Waveform::new(out, sample_rate)
}

/// `sum_{h=1}^{n} sin(h x)` in closed form, summed directly where the
/// closed form loses precision.
fn sine_sum(x: f64, n: usize) -> f64 {
    let half = 0.5 * x;
    let denom = half.sin();
    if denom.abs() > 1e-6 {
        (n as f64 * half).sin() * ((n + 1) as f64 * half).sin() / denom
    } else {
        (1..=n).map(|h| (h as f64 * x).sin()).sum()
    }
}

/// White Gaussian aperiodic source with [`NOISE_STD`].
pub fn aperiodic_excitation(seed: u64, n_samples: usize, sample_rate: u32) -> Result<Waveform> {
    Waveform::new(white_noise(seed, n_samples, NOISE_STD), sample_rate)
}

/// Number of samples synthesised for `frames` frames at `hop`.
pub fn output_len(frames: usize, hop: usize) -> usize {
    frames.saturating_sub(1) * hop
}

/// Output of [`synthesize`]: the mixed waveform and the STFT amplitudes of
/// its periodic and aperiodic branches.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub waveform: Waveform,
    pub periodic: Waveform,
    pub aperiodic: Waveform,
    pub periodic_spec: AmplitudeSpectrogram,
    pub aperiodic_spec: AmplitudeSpectrogram,
}

/// Frame-wise minimum-phase filtering with 50% overlap-add Hann windows.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    stft: Stft,
    min_phase: MinimumPhase,
    conv: FftPlan,
    window: Vec<f64>,
    bins: usize,
    sample_rate: u32,
}

impl Synthesizer {
    pub fn new(fft_size: usize, frame_shift_s: f64, sample_rate: u32) -> Result<Self> {
        let stft = Stft::new(fft_size, frame_shift_s, sample_rate, Window::Hann)?;
        let bins = fft_size / 2;
        let hop = stft.hop();
        let conv = FftPlan::new((2 * hop + fft_size - 1).next_power_of_two())?;
        Ok(Self {
            window: Window::Hann.coefficients(2 * hop),
            min_phase: MinimumPhase::new(bins)?,
            conv,
            stft,
            bins,
            sample_rate,
        })
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn hop(&self) -> usize {
        self.stft.hop()
    }

    /// Filters `source` frame by frame with the minimum-phase response of
    /// each row of `log_gain`.
    pub fn filter(&self, source: &[f64], log_gain: &Frames) -> Vec<f64> {
        let hop = self.hop();
        let n = source.len();
        let m = self.conv.len();
        let mut out = vec![0.0; n];
        let mut seg = vec![Complex64::new(0.0, 0.0); m];
        let mut ir = vec![Complex64::new(0.0, 0.0); m];
        for t in 0..log_gain.rows() {
            let start = t as isize * hop as isize - hop as isize;
            seg.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let mut any = false;
            for (i, w) in self.window.iter().enumerate() {
                let idx = start + i as isize;
                if idx >= 0 && (idx as usize) < n {
                    seg[i] = Complex64::new(source[idx as usize] * w, 0.0);
                    any |= source[idx as usize] != 0.0;
                }
            }
            if !any {
                continue;
            }
            let h = self.min_phase.impulse_response(log_gain.row(t));
            ir.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (d, s) in ir.iter_mut().zip(&h) {
                *d = Complex64::new(*s, 0.0);
            }
            self.conv.forward(&mut seg);
            self.conv.forward(&mut ir);
            for (a, b) in seg.iter_mut().zip(&ir) {
                *a *= b;
            }
            self.conv.inverse(&mut seg);
            for (i, v) in seg.iter().enumerate() {
                let idx = start + i as isize;
                if idx >= 0 && (idx as usize) < n {
                    out[idx as usize] += v.re;
                }
            }
        }
        out
    }

    pub fn synthesize(
        &self,
        p: &PitchTrack,
        h: &SpectralEnvelope,
        a: &Aperiodicity,
        seed: u64,
    ) -> Result<Synthesis> {
        let frames = h.log_values.rows();
        if h.log_values.cols() != self.bins {
            return Err(Error::shape(
                "spectral envelope bins",
                self.bins,
                h.log_values.cols(),
            ));
        }
        h.log_values.check_same_shape(a.values(), "aperiodicity")?;
        if p.len() != frames {
            return Err(Error::shape("pitch track", frames, p.len()));
        }
        let n = output_len(frames, self.hop());
        if n == 0 {
            return Err(Error::param(
                "frames",
                "need at least two frames to synthesize",
            ));
        }
        let e_p = harmonic_excitation(p, self.sample_rate, self.hop(), n)?;
        let e_ap = aperiodic_excitation(seed, n, self.sample_rate)?;
        let periodic_gain = h
            .log_values
            .zip_map(a.values(), |lh, a| lh + (1.0 - a).ln())?;
        let aperiodic_gain = h.log_values.zip_map(a.values(), |lh, a| lh + a.ln())?;
        let periodic = self.filter(e_p.samples(), &periodic_gain);
        let aperiodic = self.filter(e_ap.samples(), &aperiodic_gain);
        let mixed: Vec<f64> = periodic
            .iter()
            .zip(&aperiodic)
            .map(|(x, y)| x + y)
            .collect();
        Ok(Synthesis {
            waveform: Waveform::new(mixed, self.sample_rate)?,
            periodic_spec: self.stft.amplitude_of(&periodic)?,
            aperiodic_spec: self.stft.amplitude_of(&aperiodic)?,
            periodic: Waveform::new(periodic, self.sample_rate)?,
            aperiodic: Waveform::new(aperiodic, self.sample_rate)?,
        })
    }
}

/// Synthesizes with the default 2048-point analysis size and 5 ms frames.
pub fn synthesize(
    p: &PitchTrack,
    h: &SpectralEnvelope,
    a: &Aperiodicity,
    seed: u64,
) -> Result<Synthesis> {
    Synthesizer::new(
        crate::spectral::DEFAULT_FFT_SIZE,
        crate::spectral::DEFAULT_FRAME_SHIFT_S,
        crate::SAMPLE_RATE,
    )?
    .synthesize(p, h, a, seed)
}

/// `mean |psi(S1) - psi(S)| - alpha * mean |psi(S1) - psi(S2)|`.
pub fn ged_reconstruction_loss(
    s_tilde_1: &AmplitudeSpectrogram,
    s_tilde_2: &AmplitudeSpectrogram,
    s: &AmplitudeSpectrogram,
    alpha: f64,
) -> Result<f64> {
    s_tilde_1
        .values()
        .check_same_shape(s.values(), "first rendering")?;
    s_tilde_2
        .values()
        .check_same_shape(s.values(), "second rendering")?;
    let lag = LagWindow::for_spectrogram(s, crate::spectral::DEFAULT_LIFTER_CUTOFF_S)?;
    let p1 = lag.fine_structure_of_log(&s_tilde_1.log_floored());
    let p2 = lag.fine_structure_of_log(&s_tilde_2.log_floored());
    let pt = lag.fine_structure_of_log(&s.log_floored());
    let n = p1.as_slice().len() as f64;
    let attract: f64 = p1
        .as_slice()
        .iter()
        .zip(pt.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let repel: f64 = p1
        .as_slice()
        .iter()
        .zip(p2.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((attract - alpha * repel) / n)
}

/// Excitation amplitude spectra held fixed during one aperiodicity step: the
/// harmonic source and two independent noise renderings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSpectra {
    pub periodic: Frames,
    pub aperiodic: [Frames; 2],
}

impl ExcitationSpectra {
    pub fn compute(p: &PitchTrack, stft: &Stft, n_samples: usize, seeds: [u64; 2]) -> Result<Self> {
        let rate = stft.sample_rate();
        let e_p = harmonic_excitation(p, rate, stft.hop(), n_samples)?;
        let spec = |w: Waveform| {
            stft.amplitude_of(w.samples())
                .map(AmplitudeSpectrogram::into_values)
        };
        Ok(Self {
            periodic: spec(e_p)?,
            aperiodic: [
                spec(aperiodic_excitation(seeds[0], n_samples, rate)?)?,
                spec(aperiodic_excitation(seeds[1], n_samples, rate)?)?,
            ],
        })
    }
}

/// Spectrogram of the synthesizer in the frequency domain,
/// `P ⊙ H ⊙ (1 - A) + N ⊙ H ⊙ A`.
pub fn render_spectrogram(
    periodic: &Frames,
    aperiodic: &Frames,
    h_amp: &Frames,
    a: &Aperiodicity,
) -> Result<Frames> {
    periodic.check_same_shape(h_amp, "spectral envelope")?;
    periodic.check_same_shape(aperiodic, "aperiodic spectrum")?;
    periodic.check_same_shape(a.values(), "aperiodicity")?;
    let mut out = Frames::zeros(periodic.rows(), periodic.cols());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        let (p, n, h, a) = (
            periodic.as_slice()[i],
            aperiodic.as_slice()[i],
            h_amp.as_slice()[i],
            a.values().as_slice()[i],
        );
        *o = h * (p * (1.0 - a) + n * a);
    }
    Ok(out)
}

/// Reconstruction loss as a function of the band-aperiodicity logits with
/// everything else fixed.
#[derive(Debug, Clone)]
pub struct ReconObjective<'a> {
    target_psi: &'a Frames,
    lag: &'a LagWindow,
    layout: &'a BapLayout,
    h_amp: &'a Frames,
    excitation: &'a ExcitationSpectra,
    alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconEvaluation {
    pub loss: f64,
    pub grad_logits: Frames,
}

impl<'a> ReconObjective<'a> {
    pub fn new(
        target_psi: &'a Frames,
        lag: &'a LagWindow,
        layout: &'a BapLayout,
        h_amp: &'a Frames,
        excitation: &'a ExcitationSpectra,
        alpha: f64,
    ) -> Result<Self> {
        target_psi.check_same_shape(h_amp, "spectral envelope")?;
        target_psi.check_same_shape(&excitation.periodic, "periodic excitation")?;
        target_psi.check_same_shape(&excitation.aperiodic[0], "aperiodic excitation")?;
        target_psi.check_same_shape(&excitation.aperiodic[1], "aperiodic excitation")?;
        if layout.bins() != target_psi.cols() {
            return Err(Error::shape(
                "aperiodicity layout bins",
                target_psi.cols(),
                layout.bins(),
            ));
        }
        Ok(Self {
            target_psi,
            lag,
            layout,
            h_amp,
            excitation,
            alpha,
        })
    }

    fn element_count(&self) -> f64 {
        self.target_psi.as_slice().len() as f64
    }

    fn aperiodicity_row(&self, logits: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let mut b = Vec::with_capacity(logits.len());
        let mut free = Vec::with_capacity(logits.len());
        for &z in logits {
            let raw = sigmoid(z);
            free.push((BAP_MIN..=BAP_MAX).contains(&raw));
            b.push(raw.clamp(BAP_MIN, BAP_MAX));
        }
        let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
        let a = self
            .layout
            .segments()
            .iter()
            .map(|&(lo, hi, w)| ((1.0 - w) * log_b[lo] + w * log_b[hi]).exp())
            .collect();
        (a, b, free)
    }

    fn renderings(&self, t: usize, a: &[f64]) -> [Vec<f64>; 2] {
        let p = self.excitation.periodic.row(t);
        let h = self.h_amp.row(t);
        let render = |n: &[f64]| -> Vec<f64> {
            (0..a.len())
                .map(|c| h[c] * (p[c] * (1.0 - a[c]) + n[c] * a[c]))
                .collect()
        };
        [
            render(self.excitation.aperiodic[0].row(t)),
            render(self.excitation.aperiodic[1].row(t)),
        ]
    }

    /// Unnormalised loss of frame `t` for the given band logits.
    pub fn frame_loss(&self, t: usize, logits: &[f64]) -> f64 {
        let (a, _, _) = self.aperiodicity_row(logits);
        let [s1, s2] = self.renderings(t, &a);
        let psi = |s: &[f64]| {
            let l: Vec<f64> = s.iter().map(|v| v.max(AMPLITUDE_FLOOR).ln()).collect();
            let w = self.lag.apply_row(&l);
            l.iter().zip(&w).map(|(x, y)| x - y).collect::<Vec<f64>>()
        };
        let (p1, p2) = (psi(&s1), psi(&s2));
        let target = self.target_psi.row(t);
        (0..a.len())
            .map(|c| (p1[c] - target[c]).abs() - self.alpha * (p1[c] - p2[c]).abs())
            .sum::<f64>()
            / self.element_count()
    }

    /// Forward and backward pass over all frames.
    pub fn evaluate(&self, logits: &Frames) -> Result<ReconEvaluation> {
        let (rows, cols) = self.target_psi.shape();
        let bands = self.layout.bands();
        if logits.rows() != rows || logits.cols() != bands {
            return Err(Error::shape(
                "aperiodicity logits",
                rows * bands,
                logits.as_slice().len(),
            ));
        }
        let ex = self.excitation;
        let mut a_all = Frames::zeros(rows, cols);
        let mut b_all = Frames::zeros(rows, bands);
        let mut free_all = vec![false; rows * bands];
        let mut s1 = Frames::zeros(rows, cols);
        let mut s2 = Frames::zeros(rows, cols);
        for t in 0..rows {
            let (a, b, free) = self.aperiodicity_row(logits.row(t));
            let (p, h) = (ex.periodic.row(t), self.h_amp.row(t));
            let (n1, n2) = (ex.aperiodic[0].row(t), ex.aperiodic[1].row(t));
            let (r1, r2) = (s1.row_mut(t), s2.row_mut(t));
            for c in 0..cols {
                let base = h[c] * p[c] * (1.0 - a[c]);
                let ha = h[c] * a[c];
                r1[c] = base + ha * n1[c];
                r2[c] = base + ha * n2[c];
            }
            a_all.row_mut(t).copy_from_slice(&a);
            b_all.row_mut(t).copy_from_slice(&b);
            free_all[t * bands..(t + 1) * bands].copy_from_slice(&free);
        }
        let log = |s: &Frames| s.map(|v| v.max(AMPLITUDE_FLOOR).ln());
        let psi1 = self.lag.fine_structure_of_log(&log(&s1));
        let psi2 = self.lag.fine_structure_of_log(&log(&s2));
        let norm = self.element_count();
        let mut loss = 0.0;
        let mut g1 = Frames::zeros(rows, cols);
        let mut g2 = Frames::zeros(rows, cols);
        let iter = psi1
            .as_slice()
            .iter()
            .zip(psi2.as_slice())
            .zip(self.target_psi.as_slice())
            .zip(
                g1.as_mut_slice()
                    .iter_mut()
                    .zip(g2.as_mut_slice().iter_mut()),
            );
        for (((x1, x2), target), (o1, o2)) in iter {
            let (d_t, d_r) = (x1 - target, x1 - x2);
            loss += d_t.abs() - self.alpha * d_r.abs();
            *o1 = (sign(d_t) - self.alpha * sign(d_r)) / norm;
            *o2 = self.alpha * sign(d_r) / norm;
        }
        let gl1 = self.lag.fine_structure_transpose(&g1);
        let gl2 = self.lag.fine_structure_transpose(&g2);
        let mut grad = Frames::zeros(rows, bands);
        let segments = self.layout.segments();
        let mut g_log_b = vec![0.0; bands];
        for t in 0..rows {
            let (p, h, a) = (ex.periodic.row(t), self.h_amp.row(t), a_all.row(t));
            let (n1, n2) = (ex.aperiodic[0].row(t), ex.aperiodic[1].row(t));
            let (r1, r2) = (s1.row(t), s2.row(t));
            let (q1, q2) = (gl1.row(t), gl2.row(t));
            g_log_b.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..cols {
                let mut g_s = 0.0;
                if r1[c] > AMPLITUDE_FLOOR {
                    g_s += q1[c] / r1[c] * (n1[c] - p[c]);
                }
                if r2[c] > AMPLITUDE_FLOOR {
                    g_s += q2[c] / r2[c] * (n2[c] - p[c]);
                }
                // d A / d log B is A times the interpolation weight
                let g_log_a = g_s * h[c] * a[c];
                let (lo, hi, w) = segments[c];
                g_log_b[lo] += (1.0 - w) * g_log_a;
                g_log_b[hi] += w * g_log_a;
            }
            let out = grad.row_mut(t);
            for j in 0..bands {
                if free_all[t * bands + j] {
                    out[j] = g_log_b[j] * (1.0 - b_all.get(t, j));
                }
            }
        }
        Ok(ReconEvaluation {
            loss: loss / norm,
            grad_logits: grad,
        })
    }
}

/// Per-frame voicing decision.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicingMask {
    flags: Vec<bool>,
    soft_ratio: Vec<f64>,
    degenerate: Vec<bool>,
}

impl VoicingMask {
    /// Mask from explicit flags; the soft ratio is 1 for voiced and 0 otherwise.
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let soft_ratio = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let degenerate = vec![false; flags.len()];
        Self {
            flags,
            soft_ratio,
            degenerate,
        }
    }

    /// Mask thresholding `soft_ratio` at `theta` (inclusive).
    pub fn from_ratio(soft_ratio: Vec<f64>, theta: f64) -> Result<Self> {
        if soft_ratio.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::param("soft ratio", "must lie in [0, 1]"));
        }
        Ok(Self {
            flags: soft_ratio.iter().map(|&r| r >= theta).collect(),
            degenerate: vec![false; soft_ratio.len()],
            soft_ratio,
        })
    }

    /// Mask restored from stored flags and ratios, e.g. after deserialising.
    pub fn from_parts(flags: Vec<bool>, soft_ratio: Vec<f64>) -> Result<Self> {
        if flags.len() != soft_ratio.len() {
            return Err(Error::shape(
                "voicing ratios",
                flags.len(),
                soft_ratio.len(),
            ));
        }
        if soft_ratio.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::param("soft ratio", "must lie in [0, 1]"));
        }
        Ok(Self {
            degenerate: vec![false; flags.len()],
            flags,
            soft_ratio,
        })
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn soft_ratio(&self) -> &[f64] {
        &self.soft_ratio
    }

    /// Frames where both component magnitudes were zero.
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// `v' = sum H (1 - A) / sum H` with `H` as amplitude; voiced iff `v' >= theta`.
pub fn detect_voicing(h: &SpectralEnvelope, a: &Aperiodicity, theta: f64) -> Result<VoicingMask> {
    h.log_values.check_same_shape(a.values(), "aperiodicity")?;
    let mut soft = Vec::with_capacity(h.log_values.rows());
    let mut degenerate = Vec::with_capacity(h.log_values.rows());
    for (lh, av) in h.log_values.rows_iter().zip(a.values().rows_iter()) {
        let (mut mp, mut map) = (0.0, 0.0);
        for (l, a) in lh.iter().zip(av) {
            let amp = l.exp();
            mp += amp * (1.0 - a);
            map += amp * a;
        }
        let total = mp + map;
        degenerate.push(!(total > 0.0));
        soft.push(if total > 0.0 {
            (mp / total).clamp(0.0, 1.0)
        } else {
            0.0
        });
    }
    let mut mask = VoicingMask::from_ratio(soft, theta)?;
    for (f, &d) in mask.flags.iter_mut().zip(&degenerate) {
        *f &= !d;
    }
    mask.degenerate = degenerate;
    Ok(mask)
}
