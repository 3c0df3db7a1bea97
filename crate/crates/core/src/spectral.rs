//! STFT amplitude analysis, lag-window spectral envelope, the fine-structure
//! operator and minimum-phase responses.
//!
//! Spectrogram columns hold FFT bins `k = 1..=K` with `K = fft_size / 2`, so
//! the last column is the Nyquist bin and column `c` sits at
//! `(c + 1) * fs / fft_size` Hz. The DC bin is not stored; operators that need
//! the full even spectrum extrapolate it from the first two columns.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::fft::FftPlan;
use crate::{Error, Frames, Result, Waveform};

pub const DEFAULT_FFT_SIZE: usize = 2048;
pub const DEFAULT_FRAME_SHIFT_S: f64 = 0.005;
/// Amplitudes are floored here before any logarithm.
pub const AMPLITUDE_FLOOR: f64 = 1e-5;
pub const DEFAULT_LIFTER_CUTOFF_S: f64 = 0.0018;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrogram {
    values: Frames,
    frame_shift_s: f64,
    sample_rate: u32,
}

impl AmplitudeSpectrogram {
    pub fn new(values: Frames, frame_shift_s: f64, sample_rate: u32) -> Result<Self> {
        if values
            .as_slice()
            .iter()
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(Error::param(
                "amplitude spectrogram",
                "entries must be finite and nonnegative",
            ));
        }
        if sample_rate == 0 || !(frame_shift_s > 0.0) {
            return Err(Error::param(
                "spectrogram timing",
                "sample rate and frame shift must be positive",
            ));
        }
        Ok(Self {
            values,
            frame_shift_s,
            sample_rate,
        })
    }

    pub fn values(&self) -> &Frames {
        &self.values
    }

    pub fn into_values(self) -> Frames {
        self.values
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn bins(&self) -> usize {
        self.values.cols()
    }

    pub fn frame_shift_s(&self) -> f64 {
        self.frame_shift_s
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn fft_size(&self) -> usize {
        2 * self.bins()
    }

    /// Centre frequency of column `col`.
    pub fn bin_hz(&self, col: usize) -> f64 {
        (col + 1) as f64 * self.sample_rate as f64 / self.fft_size() as f64
    }

    /// `log(max(S, floor))`.
    pub fn log_floored(&self) -> Frames {
        self.values.map(|v| v.max(AMPLITUDE_FLOOR).ln())
    }
}

/// Natural-log amplitude envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    pub log_values: Frames,
}

impl SpectralEnvelope {
    pub fn amplitude(&self) -> Frames {
        self.log_values.map(f64::exp)
    }
}

/// Log-domain fine structure `log S - W(log S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FineStructureSpectrum {
    pub values: Frames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// Centred short-time Fourier analysis with zero padding at the edges.
#[derive(Debug, Clone)]
pub struct Stft {
    plan: FftPlan,
    window: Vec<f64>,
    hop: usize,
    frame_shift_s: f64,
    sample_rate: u32,
}

impl Stft {
    pub fn new(
        fft_size: usize,
        frame_shift_s: f64,
        sample_rate: u32,
        window: Window,
    ) -> Result<Self> {
        let plan = FftPlan::new(fft_size)?;
        if fft_size < 4 {
            return Err(Error::param("fft_size", "must be at least 4"));
        }
        let hop = (frame_shift_s * sample_rate as f64).round() as usize;
        if hop == 0 {
            return Err(Error::param("frame_shift_s", "rounds to a zero-sample hop"));
        }
        Ok(Self {
            plan,
            window: window.coefficients(fft_size),
            hop,
            frame_shift_s,
            sample_rate,
        })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn fft_size(&self) -> usize {
        self.plan.len()
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// `floor(len / hop) + 1`.
    pub fn frame_count(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    fn frame_into(&self, samples: &[f64], t: usize, out: &mut [f64]) {
        let n = self.plan.len();
        let start = (t * self.hop) as isize - (n / 2) as isize;
        for (i, o) in out.iter_mut().enumerate() {
            let idx = start + i as isize;
            *o = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize] * self.window[i]
            } else {
                0.0
            };
        }
    }

    /// Magnitudes of bins `1..=K` for every frame.
    pub fn amplitude_of(&self, samples: &[f64]) -> Result<AmplitudeSpectrogram> {
        if samples.is_empty() {
            return Err(Error::Empty("waveform"));
        }
        let n = self.plan.len();
        let k = n / 2;
        let frames = self.frame_count(samples.len());
        let mut out = Frames::zeros(frames, k);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        // two real frames per complex transform
        let mut t = 0;
        while t < frames {
            let pair = t + 1 < frames;
            self.frame_into(samples, t, &mut a);
            if pair {
                self.frame_into(samples, t + 1, &mut b);
            } else {
                b.iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..n {
                buf[i] = Complex64::new(a[i], b[i]);
            }
            self.plan.forward(&mut buf);
            for bin in 1..=k {
                let x = buf[bin];
                let y = buf[(n - bin) % n].conj();
                let fa = (x + y) * 0.5;
                out.set(t, bin - 1, fa.norm_sqr().sqrt());
                if pair {
                    let fb = (x - y) * Complex64::new(0.0, -0.5);
                    out.set(t + 1, bin - 1, fb.norm_sqr().sqrt());
                }
            }
            t += 2;
        }
        AmplitudeSpectrogram::new(out, self.frame_shift_s, self.sample_rate)
    }

    pub fn amplitude(&self, w: &Waveform) -> Result<AmplitudeSpectrogram> {
        if w.sample_rate() != self.sample_rate {
            return Err(Error::param(
                "waveform",
                "sample rate differs from the analyzer rate",
            ));
        }
        self.amplitude_of(w.samples())
    }
}

/// Hann-windowed amplitude STFT, `T = floor(len / hop) + 1` centred frames.
pub fn stft_amplitude(
    w: &Waveform,
    fft_size: usize,
    frame_shift_s: f64,
) -> Result<AmplitudeSpectrogram> {
    Stft::new(fft_size, frame_shift_s, w.sample_rate(), Window::Hann)?.amplitude(w)
}

/// Cepstral low-pass smoothing of log spectra (the lag-window operator `W`).
///
/// The lag window is 1 below half the cutoff quefrency and falls to 0 at the
/// cutoff along a raised cosine. `W` is linear; [`LagWindow::apply_transpose`]
/// is its exact adjoint on the stored `K` columns.
#[derive(Debug, Clone)]
pub struct LagWindow {
    bins: usize,
    plan: FftPlan,
    lags: Vec<f64>,
    /// `cos(pi q j / K)` for the nonzero lags `q` and `j <= K / 2`, row-major
    /// `(q, j)`, when the window is short enough for direct cosine sums to
    /// beat the FFT.
    cosines: Option<Vec<f64>>,
}

impl LagWindow {
    pub fn new(bins: usize, cutoff_s: f64, sample_rate: u32) -> Result<Self> {
        if bins < 2 {
            return Err(Error::param("bins", "need at least two spectral bins"));
        }
        if !(cutoff_s > 0.0) {
            return Err(Error::param("lifter_cutoff_s", "must be positive"));
        }
        let plan = FftPlan::new(2 * bins)?;
        let cutoff = cutoff_s * sample_rate as f64;
        let pass = 0.5 * cutoff;
        let lags = (0..=bins)
            .map(|q| {
                let q = q as f64;
                if q < pass {
                    1.0
                } else if q < cutoff {
                    0.5 * (1.0 + (PI * (q - pass) / (cutoff - pass)).cos())
                } else {
                    0.0
                }
            })
            .collect::<Vec<f64>>();
        let active = lags.iter().rposition(|&l| l != 0.0).map_or(0, |q| q + 1);
        let cosines = (active * 8 <= bins && bins % 2 == 0).then(|| {
            let mut table = Vec::with_capacity(active * (bins / 2 + 1));
            for q in 0..active {
                table.extend(
                    (0..=bins / 2)
                        .map(|j| (PI * ((q * j) % (2 * bins)) as f64 / bins as f64).cos()),
                );
            }
            table
        });
        Ok(Self {
            bins,
            plan,
            lags,
            cosines,
        })
    }

    pub fn for_spectrogram(s: &AmplitudeSpectrogram, cutoff_s: f64) -> Result<Self> {
        Self::new(s.bins(), cutoff_s, s.sample_rate())
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    /// Lifters two even half-spectra (`K + 1` values each) in one transform.
    fn lifter_even_pair(&self, a: &mut [f64], b: &mut [f64], buf: &mut [Complex64]) {
        let k = self.bins;
        let n = 2 * k;
        for j in 0..=k {
            buf[j] = Complex64::new(a[j], b[j]);
        }
        for j in 1..k {
            buf[n - j] = buf[j];
        }
        // even real input: forward and inverse DFT agree up to 1/N
        self.plan.forward(buf);
        let scale = 1.0 / n as f64;
        for q in 0..n {
            let lag = if q <= k {
                self.lags[q]
            } else {
                self.lags[n - q]
            };
            buf[q] *= lag * scale;
        }
        self.plan.forward(buf);
        for j in 0..=k {
            a[j] = buf[j].re;
            b[j] = buf[j].im;
        }
    }

    /// Lifters a block of even half-spectra (rows of `K + 1` values) through
    /// the truncated cosine expansion. Samples `j` and `K - j` share a cosine
    /// up to the sign `(-1)^q`, so sums run over half the row.
    fn lifter_even_block(&self, table: &[f64], block: &mut [f64], scratch: &mut Scratch) {
        let k = self.bins;
        let half = k / 2;
        let width = half + 1;
        let rows = block.len() / (k + 1);
        let scale = 1.0 / (2 * k) as f64;
        let active = table.len() / width;
        scratch.folded.resize(2 * rows * width, 0.0);
        for (h, f) in block
            .chunks_exact(k + 1)
            .zip(scratch.folded.chunks_exact_mut(2 * width))
        {
            let (sum, diff) = f.split_at_mut(width);
            // interior samples appear twice in the even extension
            let (front, back) = h.split_at(half + 1);
            let back_rev = back[..half - 1].iter().rev();
            for (((s, d), x), y) in sum[1..half]
                .iter_mut()
                .zip(diff[1..half].iter_mut())
                .zip(&front[1..half])
                .zip(back_rev)
            {
                *s = 2.0 * (x + y);
                *d = 2.0 * (x - y);
            }
            sum[0] = h[0] + h[k];
            diff[0] = h[0] - h[k];
            sum[half] = 2.0 * h[half];
            diff[half] = sum[half];
        }
        scratch.coef.resize(active * rows, 0.0);
        for (q, trow) in table.chunks_exact(width).enumerate() {
            let weight = if q == 0 { 1.0 } else { 2.0 } * self.lags[q] * scale;
            let offset = if q % 2 == 0 { 0 } else { width };
            for (r, f) in scratch.folded.chunks_exact(2 * width).enumerate() {
                scratch.coef[q * rows + r] = weight * dot(&f[offset..offset + width], trow);
            }
        }
        // even and odd lags accumulated separately, reusing the fold buffer;
        // the first lag of each parity initialises its half
        for (q, trow) in table.chunks_exact(width).enumerate() {
            let offset = if q % 2 == 0 { 0 } else { width };
            for (r, f) in scratch.folded.chunks_exact_mut(2 * width).enumerate() {
                let c = scratch.coef[q * rows + r];
                let out = &mut f[offset..offset + width];
                if q < 2 {
                    out.iter_mut().zip(trow).for_each(|(o, t)| *o = c * t);
                } else {
                    out.iter_mut().zip(trow).for_each(|(o, t)| *o += c * t);
                }
            }
        }
        if active < 2 {
            for f in scratch.folded.chunks_exact_mut(2 * width) {
                f[width..].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        for (h, f) in block
            .chunks_exact_mut(k + 1)
            .zip(scratch.folded.chunks_exact(2 * width))
        {
            let (even, odd) = f.split_at(width);
            let (front, back) = h.split_at_mut(half + 1);
            for ((o, e), d) in front.iter_mut().zip(even).zip(odd) {
                *o = e + d;
            }
            for ((o, e), d) in back.iter_mut().rev().zip(&even[..half]).zip(&odd[..half]) {
                *o = e - d;
            }
        }
    }

    fn extend(x: &[f64], h: &mut [f64]) {
        h[0] = (4.0 * x[0] - x[1]) / 3.0;
        h[1..].copy_from_slice(x);
    }

    /// `W` applied to every row of a log spectrogram.
    pub fn apply(&self, log_spec: &Frames) -> Frames {
        self.map_rows(log_spec, false)
    }

    /// Adjoint of [`LagWindow::apply`].
    pub fn apply_transpose(&self, grad: &Frames) -> Frames {
        self.map_rows(grad, true)
    }

    /// `W` on a single row.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        let m = Frames::from_vec(1, row.len(), row.to_vec()).expect("row shape");
        self.apply(&m).into_vec()
    }

    fn fill(&self, row: &[f64], h: &mut [f64], transpose: bool) {
        let k = self.bins;
        if transpose {
            h[0] = 0.0;
            h[1..k].copy_from_slice(&row[..k - 1]);
            h[k] = 2.0 * row[k - 1];
        } else {
            Self::extend(row, h);
        }
    }

    fn store(&self, h: &mut [f64], o: &mut [f64], transpose: bool) {
        let k = self.bins;
        if transpose {
            let dc = 0.5 * h[0];
            h[k] *= 0.5;
            o.copy_from_slice(&h[1..]);
            o[0] += 4.0 / 3.0 * dc;
            o[1] -= dc / 3.0;
        } else {
            o.copy_from_slice(&h[1..]);
        }
    }

    fn map_rows(&self, input: &Frames, transpose: bool) -> Frames {
        const BLOCK: usize = 16;
        let k = self.bins;
        assert_eq!(input.cols(), k, "row length does not match lag window");
        let rows = input.rows();
        let mut out = Frames::zeros(rows, k);
        if let Some(table) = &self.cosines {
            let mut block = vec![0.0; BLOCK * (k + 1)];
            let mut scratch = Scratch::default();
            for start in (0..rows).step_by(BLOCK) {
                let n = BLOCK.min(rows - start);
                let block = &mut block[..n * (k + 1)];
                for (r, h) in block.chunks_exact_mut(k + 1).enumerate() {
                    self.fill(input.row(start + r), h, transpose);
                }
                self.lifter_even_block(table, block, &mut scratch);
                for (r, h) in block.chunks_exact_mut(k + 1).enumerate() {
                    self.store(h, out.row_mut(start + r), transpose);
                }
            }
            return out;
        }
        let mut ha = vec![0.0; k + 1];
        let mut hb = vec![0.0; k + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * k];
        let mut t = 0;
        while t < rows {
            let pair = t + 1 < rows;
            self.fill(input.row(t), &mut ha, transpose);
            if pair {
                self.fill(input.row(t + 1), &mut hb, transpose);
            } else {
                hb.iter_mut().for_each(|v| *v = 0.0);
            }
            self.lifter_even_pair(&mut ha, &mut hb, &mut buf);
            self.store(&mut ha, out.row_mut(t), transpose);
            if pair {
                self.store(&mut hb, out.row_mut(t + 1), transpose);
            }
            t += 2;
        }
        out
    }

    /// `psi(log S) = log S - W(log S)` for log spectra already floored.
    pub fn fine_structure_of_log(&self, log_spec: &Frames) -> Frames {
        let mut out = self.apply(log_spec);
        residual(log_spec, &mut out);
        out
    }

    /// Adjoint of `I - W`.
    pub fn fine_structure_transpose(&self, grad: &Frames) -> Frames {
        let mut out = self.apply_transpose(grad);
        residual(grad, &mut out);
        out
    }
}

/// `smooth <- input - smooth`.
fn residual(input: &Frames, smooth: &mut Frames) {
    for (s, x) in smooth.as_mut_slice().iter_mut().zip(input.as_slice()) {
        *s = x - *s;
    }
}

#[derive(Debug, Default)]
struct Scratch {
    folded: Vec<f64>,
    coef: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

pub fn lag_window_envelope(
    s: &AmplitudeSpectrogram,
    lifter_cutoff_s: f64,
) -> Result<SpectralEnvelope> {
    let lag = LagWindow::for_spectrogram(s, lifter_cutoff_s)?;
    Ok(SpectralEnvelope {
        log_values: lag.apply(&s.log_floored()),
    })
}

/// `psi(S)` with the default lifter cutoff.
pub fn fine_structure(s: &AmplitudeSpectrogram) -> Result<FineStructureSpectrum> {
    fine_structure_with(s, DEFAULT_LIFTER_CUTOFF_S)
}

pub fn fine_structure_with(
    s: &AmplitudeSpectrogram,
    lifter_cutoff_s: f64,
) -> Result<FineStructureSpectrum> {
    let lag = LagWindow::for_spectrogram(s, lifter_cutoff_s)?;
    Ok(FineStructureSpectrum {
        values: lag.fine_structure_of_log(&s.log_floored()),
    })
}

/// Minimum-phase spectra for rows of log magnitudes over bins `1..=K`.
///
/// The phase follows from folding the real cepstrum onto positive
/// quefrencies; the magnitude is reproduced exactly.
pub fn minimum_phase_response(log_magnitude: &Frames) -> Result<Vec<Vec<Complex64>>> {
    if !log_magnitude.all_finite() {
        return Err(Error::NonFinite("log magnitude"));
    }
    let k = log_magnitude.cols();
    let builder = MinimumPhase::new(k)?;
    Ok(log_magnitude
        .rows_iter()
        .map(|row| builder.spectrum(row)[1..=k].to_vec())
        .collect())
}

/// Minimum-phase spectrum and impulse-response builder for one FFT size.
#[derive(Debug, Clone)]
pub struct MinimumPhase {
    bins: usize,
    plan: FftPlan,
}

impl MinimumPhase {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::param("bins", "need at least two spectral bins"));
        }
        Ok(Self {
            bins,
            plan: FftPlan::new(2 * bins)?,
        })
    }

    /// Full `2K`-point spectrum from log magnitudes of bins `1..=K`.
    pub fn spectrum(&self, log_mag: &[f64]) -> Vec<Complex64> {
        let k = self.bins;
        let n = 2 * k;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new((4.0 * log_mag[0] - log_mag[1]) / 3.0, 0.0);
        for j in 1..=k {
            buf[j] = Complex64::new(log_mag[j - 1], 0.0);
        }
        for j in 1..k {
            buf[n - j] = buf[j];
        }
        self.plan.inverse(&mut buf);
        for q in 1..k {
            buf[q] = Complex64::new(2.0 * buf[q].re, 0.0);
        }
        buf[0] = Complex64::new(buf[0].re, 0.0);
        buf[k] = Complex64::new(buf[k].re, 0.0);
        for v in buf[k + 1..].iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        self.plan.forward(&mut buf);
        buf.iter().map(|c| c.exp()).collect()
    }

    /// Real impulse response of length `2K`.
    pub fn impulse_response(&self, log_mag: &[f64]) -> Vec<f64> {
        let mut spec = self.spectrum(log_mag);
        self.plan.inverse(&mut spec);
        spec.iter().map(|c| c.re).collect()
    }
}
