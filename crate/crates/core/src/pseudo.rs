//! Pseudo periodic excitation spectrogram built directly from F0 and the
//! masked fine-structure loss, with its analytic gradient in `log2 f0`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::rng::standard_normals;
use crate::spectral::{AmplitudeSpectrogram, LagWindow, SpectralEnvelope, AMPLITUDE_FLOOR};
use crate::synth::{Aperiodicity, VoicingMask};
use crate::{Error, Frames, Result};

pub const DEFAULT_EPS: f64 = 1e-3;
pub const MIN_F0_HZ: f64 = 20.0;
pub const MAX_F0_HZ: f64 = 2000.0;

/// Per-frame F0 with a consistent `log2` view.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    f0_hz: Vec<f64>,
    log2_f0: Vec<f64>,
}

impl PitchTrack {
    pub fn from_hz(f0_hz: Vec<f64>) -> Result<Self> {
        if f0_hz.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::param("f0", "must be finite and positive"));
        }
        let log2_f0 = f0_hz.iter().map(|f| f.log2()).collect();
        Ok(Self { f0_hz, log2_f0 })
    }

    pub fn from_log2(log2_f0: Vec<f64>) -> Result<Self> {
        if log2_f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log2 f0"));
        }
        let f0_hz = log2_f0.iter().map(|v| v.exp2()).collect();
        Ok(Self { f0_hz, log2_f0 })
    }

    pub fn constant(frames: usize, hz: f64) -> Result<Self> {
        Self::from_hz(vec![hz; frames])
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn log2_f0(&self) -> &[f64] {
        &self.log2_f0
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    /// Copy with every value clamped to `[lo, hi]` Hz.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        let log2_f0: Vec<f64> = self
            .log2_f0
            .iter()
            .map(|v| v.clamp(lo.log2(), hi.log2()))
            .collect();
        Self {
            f0_hz: log2_f0.iter().map(|v| v.exp2()).collect(),
            log2_f0,
        }
    }
}

/// `Phi[t, c] = fs / (2 p_t K) * k` with `k = c + 1`.
pub fn phase_matrix(p: &PitchTrack, sample_rate: u32, bins: usize) -> Result<Frames> {
    if bins == 0 {
        return Err(Error::param("bins", "must be positive"));
    }
    let scale = sample_rate as f64 / (2 * bins) as f64;
    Ok(Frames::from_fn(p.len(), bins, |t, c| {
        scale / p.f0_hz[t] * (c + 1) as f64
    }))
}

/// Triangle comb: `-1` below half a cycle, then `4 |frac(phi) - 0.5| - 1`.
#[inline]
pub fn triangle(phi: f64) -> f64 {
    if phi < 0.5 {
        -1.0
    } else {
        4.0 * (phi - phi.floor() - 0.5).abs() - 1.0
    }
}

/// Derivative of [`triangle`], zero on the flat branch and at the kinks.
#[inline]
pub fn triangle_slope(phi: f64) -> f64 {
    if phi < 0.5 {
        return 0.0;
    }
    let u = phi - phi.floor() - 0.5;
    if u == 0.0 || u == -0.5 {
        0.0
    } else {
        4.0 * u.signum()
    }
}

pub fn triangle_wave(phi: &Frames) -> Frames {
    phi.map(triangle)
}

/// `max(X, eps)^2 + |Z eps|` with `Z` standard normal noise drawn from `noise_seed`.
pub fn pseudo_periodic_excitation(
    p: &PitchTrack,
    eps: f64,
    noise_seed: u64,
    sample_rate: u32,
    bins: usize,
    frame_shift_s: f64,
) -> Result<AmplitudeSpectrogram> {
    let phi = phase_matrix(p, sample_rate, bins)?;
    let z = standard_normals(noise_seed, phi.rows() * bins);
    let mut values = phi;
    for (v, z) in values.as_mut_slice().iter_mut().zip(&z) {
        *v = triangle(*v).max(eps).powi(2) + (z * eps).abs();
    }
    AmplitudeSpectrogram::new(values, frame_shift_s, sample_rate)
}

/// `S* = E ⊙ H ⊙ (1 - A) + N ⊙ H ⊙ A` with `H` as amplitude.
pub fn assemble_pseudo_spectrogram(
    e_p_star: &AmplitudeSpectrogram,
    h: &SpectralEnvelope,
    a: &Aperiodicity,
    aperiodic_spec: &AmplitudeSpectrogram,
) -> Result<AmplitudeSpectrogram> {
    let e = e_p_star.values();
    e.check_same_shape(&h.log_values, "spectral envelope")?;
    e.check_same_shape(a.values(), "aperiodicity")?;
    e.check_same_shape(aperiodic_spec.values(), "aperiodic spectrum")?;
    let mut out = Frames::zeros(e.rows(), e.cols());
    for i in 0..e.as_slice().len() {
        let hv = h.log_values.as_slice()[i].exp();
        let av = a.values().as_slice()[i];
        out.as_mut_slice()[i] =
            e.as_slice()[i] * hv * (1.0 - av) + aperiodic_spec.values().as_slice()[i] * hv * av;
    }
    AmplitudeSpectrogram::new(out, e_p_star.frame_shift_s(), e_p_star.sample_rate())
}

/// Value of a voicing-masked loss and the number of frames it averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedLoss {
    pub value: f64,
    pub voiced_frames: usize,
}

impl MaskedLoss {
    /// True when no frame was voiced and the value is a placeholder zero.
    pub fn is_empty(&self) -> bool {
        self.voiced_frames == 0
    }
}

/// Mean `|psi(S*) - psi(S)|` over voiced frames and all bins.
pub fn pseudo_loss(
    s_star: &AmplitudeSpectrogram,
    s: &AmplitudeSpectrogram,
    v: &VoicingMask,
) -> Result<MaskedLoss> {
    s_star
        .values()
        .check_same_shape(s.values(), "target spectrogram")?;
    if v.len() != s.frames() {
        return Err(Error::shape("voicing mask", s.frames(), v.len()));
    }
    let voiced = v.flags().iter().filter(|&&f| f).count();
    if voiced == 0 {
        return Ok(MaskedLoss {
            value: 0.0,
            voiced_frames: 0,
        });
    }
    let lag = LagWindow::for_spectrogram(s, crate::spectral::DEFAULT_LIFTER_CUTOFF_S)?;
    let a = lag.fine_structure_of_log(&s_star.log_floored());
    let b = lag.fine_structure_of_log(&s.log_floored());
    let mut total = 0.0;
    for t in (0..s.frames()).filter(|&t| v.flags()[t]) {
        total += a
            .row(t)
            .iter()
            .zip(b.row(t))
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>();
    }
    Ok(MaskedLoss {
        value: total / (voiced * s.bins()) as f64,
        voiced_frames: voiced,
    })
}

/// Everything the pseudo loss holds fixed while `p` varies: the target fine
/// structure, the periodic gain `H (1 - A)`, the detached aperiodic term
/// `N H A`, the voicing mask and the comb noise.
#[derive(Debug, Clone)]
pub struct PseudoObjective<'a> {
    target_psi: &'a Frames,
    lag: &'a LagWindow,
    periodic_gain: Frames,
    aperiodic_term: Frames,
    voiced: &'a [bool],
    noise_abs: Frames,
    sample_rate: u32,
    eps: f64,
}

/// Loss value and gradient with respect to `log2 p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEvaluation {
    pub loss: MaskedLoss,
    pub grad_log2_f0: Vec<f64>,
}

impl<'a> PseudoObjective<'a> {
    /// `target_psi` is `psi(S)`; `h_amp` is the envelope as amplitude.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        target_psi: &'a Frames,
        lag: &'a LagWindow,
        h_amp: &Frames,
        a: &Aperiodicity,
        aperiodic_spec: &Frames,
        voiced: &'a [bool],
        eps: f64,
        noise_seed: u64,
        sample_rate: u32,
    ) -> Result<Self> {
        target_psi.check_same_shape(h_amp, "spectral envelope")?;
        target_psi.check_same_shape(a.values(), "aperiodicity")?;
        target_psi.check_same_shape(aperiodic_spec, "aperiodic spectrum")?;
        if voiced.len() != target_psi.rows() {
            return Err(Error::shape(
                "voicing mask",
                target_psi.rows(),
                voiced.len(),
            ));
        }
        if lag.bins() != target_psi.cols() {
            return Err(Error::shape(
                "lag window bins",
                target_psi.cols(),
                lag.bins(),
            ));
        }
        if !(eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        let periodic_gain = h_amp.zip_map(a.values(), |h, a| h * (1.0 - a))?;
        let mut aperiodic_term = h_amp.zip_map(a.values(), |h, a| h * a)?;
        for (x, n) in aperiodic_term
            .as_mut_slice()
            .iter_mut()
            .zip(aperiodic_spec.as_slice())
        {
            *x *= n;
        }
        let (rows, cols) = target_psi.shape();
        let z = standard_normals(noise_seed, rows * cols);
        let noise_abs = Frames::from_vec(rows, cols, z.iter().map(|z| (z * eps).abs()).collect())?;
        Ok(Self {
            target_psi,
            lag,
            periodic_gain,
            aperiodic_term,
            voiced,
            noise_abs,
            sample_rate,
            eps,
        })
    }

    pub fn voiced_frames(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    fn check_track(&self, p: &PitchTrack) -> Result<()> {
        if p.len() != self.target_psi.rows() {
            return Err(Error::shape("pitch track", self.target_psi.rows(), p.len()));
        }
        Ok(())
    }

    fn phase_scale(&self) -> f64 {
        self.sample_rate as f64 / (2 * self.target_psi.cols()) as f64
    }

    fn comb_row(&self, t: usize, f0_hz: f64, out: &mut [f64]) {
        let scale = self.phase_scale() / f0_hz;
        let (noise, gain, ap) = (
            self.noise_abs.row(t),
            self.periodic_gain.row(t),
            self.aperiodic_term.row(t),
        );
        for (c, o) in out.iter_mut().enumerate() {
            let x = triangle(scale * (c + 1) as f64).max(self.eps);
            *o = (x * x + noise[c]) * gain[c] + ap[c];
        }
    }

    /// `S*` for every frame.
    pub fn pseudo_spectrogram(&self, p: &PitchTrack) -> Result<Frames> {
        self.check_track(p)?;
        let (rows, cols) = self.target_psi.shape();
        let mut out = Frames::zeros(rows, cols);
        for t in 0..rows {
            self.comb_row(t, p.f0_hz[t], out.row_mut(t));
        }
        Ok(out)
    }

    /// Unnormalised L1 distance of frame `t` for a trial `log2 f0`, i.e. the
    /// frame's contribution to the loss times `voiced_frames * K`.
    pub fn frame_distance(&self, t: usize, log2_f0: f64) -> f64 {
        let cols = self.target_psi.cols();
        let mut log_s = vec![0.0; cols];
        self.comb_row(t, log2_f0.exp2(), &mut log_s);
        log_s
            .iter_mut()
            .for_each(|v| *v = v.max(AMPLITUDE_FLOOR).ln());
        let smooth = self.lag.apply_row(&log_s);
        (0..cols)
            .map(|c| (log_s[c] - smooth[c] - self.target_psi.get(t, c)).abs())
            .sum()
    }

    /// Per-frame loss contributions; their sum is the loss.
    pub fn frame_losses(&self, p: &PitchTrack) -> Result<Vec<f64>> {
        self.check_track(p)?;
        let norm = (self.voiced_frames().max(1) * self.target_psi.cols()) as f64;
        Ok((0..p.len())
            .map(|t| {
                if self.voiced[t] {
                    self.frame_distance(t, p.log2_f0[t]) / norm
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Forward and backward pass.
    pub fn evaluate(&self, p: &PitchTrack) -> Result<PseudoEvaluation> {
        self.check_track(p)?;
        let (rows, cols) = self.target_psi.shape();
        let voiced = self.voiced_frames();
        if voiced == 0 {
            return Ok(PseudoEvaluation {
                loss: MaskedLoss {
                    value: 0.0,
                    voiced_frames: 0,
                },
                grad_log2_f0: vec![0.0; rows],
            });
        }
        let s_star = self.pseudo_spectrogram(p)?;
        let log_s = s_star.map(|v| v.max(AMPLITUDE_FLOOR).ln());
        let psi = self.lag.fine_structure_of_log(&log_s);
        let norm = (voiced * cols) as f64;
        let mut total = 0.0;
        let mut g_psi = Frames::zeros(rows, cols);
        for t in (0..rows).filter(|&t| self.voiced[t]) {
            let out = g_psi.row_mut(t);
            for ((o, x), y) in out.iter_mut().zip(psi.row(t)).zip(self.target_psi.row(t)) {
                let d = x - y;
                total += d.abs();
                *o = sign(d) / norm;
            }
        }
        let g_log = self.lag.fine_structure_transpose(&g_psi);
        let mut grad = vec![0.0; rows];
        for (t, g) in grad.iter_mut().enumerate().filter(|(t, _)| self.voiced[*t]) {
            let scale = self.phase_scale() / p.f0_hz[t];
            let (s_row, gain, gl) = (s_star.row(t), self.periodic_gain.row(t), g_log.row(t));
            let mut acc = 0.0;
            for c in 0..cols {
                let phi = scale * (c + 1) as f64;
                let x = triangle(phi);
                if x <= self.eps || s_row[c] <= AMPLITUDE_FLOOR {
                    continue;
                }
                let g_e = gl[c] / s_row[c] * gain[c];
                acc += g_e * 2.0 * x * triangle_slope(phi) * phi;
            }
            *g = -LN_2 * acc;
        }
        Ok(PseudoEvaluation {
            loss: MaskedLoss {
                value: total / norm,
                voiced_frames: voiced,
            },
            grad_log2_f0: grad,
        })
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
