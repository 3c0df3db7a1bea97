//! Constant-Q magnitude analysis and the scope-shift used to derive pitch
//! shifted views of one analysis.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::{Error, Frames, Result, Waveform, SAMPLE_RATE};

pub const CQT_MIN_HZ: f64 = 32.70;
pub const CQT_BINS: usize = 205;
pub const CQT_BINS_PER_OCTAVE: usize = 24;
pub const CQT_FILTER_SCALE: f64 = 0.5;
/// Width of the window that [`shift_scope`] slides over the analysis.
pub const SCOPE_BINS: usize = 176;
/// Largest shift that keeps the window inside the analysed bins.
pub const MAX_SCOPE_SHIFT: usize = (CQT_BINS - SCOPE_BINS) / 2;
pub const LOG_COMPRESSION_GAMMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqtConfig {
    pub min_hz: f64,
    pub bins: usize,
    pub bins_per_octave: usize,
    pub filter_scale: f64,
    pub frame_shift_s: f64,
}

impl Default for CqtConfig {
    fn default() -> Self {
        Self {
            min_hz: CQT_MIN_HZ,
            bins: CQT_BINS,
            bins_per_octave: CQT_BINS_PER_OCTAVE,
            filter_scale: CQT_FILTER_SCALE,
            frame_shift_s: 0.005,
        }
    }
}

/// Magnitude constant-Q transform, `frames x bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtMatrix {
    magnitudes: Frames,
    bins_per_octave: usize,
    min_hz: f64,
}

impl CqtMatrix {
    pub fn new(magnitudes: Frames, bins_per_octave: usize, min_hz: f64) -> Result<Self> {
        if magnitudes
            .as_slice()
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::param(
                "cqt magnitudes",
                "must be finite and nonnegative",
            ));
        }
        if bins_per_octave == 0 || !(min_hz > 0.0) {
            return Err(Error::param(
                "cqt axis",
                "bins per octave and minimum frequency must be positive",
            ));
        }
        Ok(Self {
            magnitudes,
            bins_per_octave,
            min_hz,
        })
    }

    pub fn magnitudes(&self) -> &Frames {
        &self.magnitudes
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.rows()
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.cols()
    }

    pub fn bins_per_octave(&self) -> usize {
        self.bins_per_octave
    }

    pub fn min_hz(&self) -> f64 {
        self.min_hz
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        self.min_hz * 2f64.powf(bin as f64 / self.bins_per_octave as f64)
    }

    /// `log(1 + C / gamma)`, elementwise.
    pub fn log_compressed(&self, gamma: f64) -> Frames {
        self.magnitudes.map(|v| (v / gamma).ln_1p())
    }
}

struct Kernel {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

/// Bank of Hann-windowed complex exponentials, one per bin, each normalised
/// by its length so that a unit sinusoid reads the same magnitude in every
/// bin it is centred on.
pub struct CqtAnalyzer {
    cfg: CqtConfig,
    kernels: Vec<Kernel>,
    hop: usize,
}

impl CqtAnalyzer {
    pub fn new(cfg: CqtConfig) -> Result<Self> {
        if cfg.bins == 0 || cfg.bins_per_octave == 0 {
            return Err(Error::param("cqt bins", "must be positive"));
        }
        if !(cfg.min_hz > 0.0) || !(cfg.filter_scale > 0.0) {
            return Err(Error::param(
                "cqt",
                "minimum frequency and filter scale must be positive",
            ));
        }
        let rate = SAMPLE_RATE as f64;
        let top = cfg.min_hz * 2f64.powf((cfg.bins - 1) as f64 / cfg.bins_per_octave as f64);
        if top >= rate / 2.0 {
            return Err(Error::param(
                "cqt bins",
                "highest bin must lie below Nyquist",
            ));
        }
        let hop = (cfg.frame_shift_s * rate).round() as usize;
        if hop == 0 {
            return Err(Error::param("frame_shift_s", "must be at least one sample"));
        }
        let q = cfg.filter_scale / (2f64.powf(1.0 / cfg.bins_per_octave as f64) - 1.0);
        let kernels = (0..cfg.bins)
            .map(|k| {
                let f = cfg.min_hz * 2f64.powf(k as f64 / cfg.bins_per_octave as f64);
                // never shorter than one hop so that consecutive frames overlap
                let len = ((q * rate / f).ceil() as usize).max(hop) | 1;
                let centre = (len / 2) as f64;
                let mut kernel = Kernel {
                    cos: Vec::with_capacity(len),
                    sin: Vec::with_capacity(len),
                };
                for n in 0..len {
                    let w = 0.5 - 0.5 * (2.0 * PI * n as f64 / (len - 1) as f64).cos();
                    let phase = 2.0 * PI * f * (n as f64 - centre) / rate;
                    kernel.cos.push(w * phase.cos() / len as f64);
                    kernel.sin.push(w * phase.sin() / len as f64);
                }
                kernel
            })
            .collect();
        Ok(Self { cfg, kernels, hop })
    }

    pub fn config(&self) -> &CqtConfig {
        &self.cfg
    }

    pub fn longest_kernel(&self) -> usize {
        self.kernels.iter().map(|k| k.cos.len()).max().unwrap_or(0)
    }

    /// Frames are centred on multiples of the hop with zeros outside the
    /// signal, giving `floor(len / hop) + 1` frames like the STFT.
    pub fn analyze(&self, w: &Waveform) -> Result<CqtMatrix> {
        if w.sample_rate() != SAMPLE_RATE {
            return Err(Error::param(
                "sample_rate",
                "constant-Q analysis expects the internal rate",
            ));
        }
        let x = w.samples();
        let longest = self.longest_kernel();
        if x.len() < longest {
            return Err(Error::TooShort {
                len: x.len(),
                kernel: longest,
            });
        }
        let frames = x.len() / self.hop + 1;
        let mut out = Frames::zeros(frames, self.cfg.bins);
        for t in 0..frames {
            let centre = (t * self.hop) as isize;
            let row = out.row_mut(t);
            for (k, kernel) in self.kernels.iter().enumerate() {
                let len = kernel.cos.len() as isize;
                let start = centre - len / 2;
                let lo = (-start).max(0) as usize;
                let hi = ((x.len() as isize - start).min(len)).max(0) as usize;
                let (mut re, mut im) = (0.0, 0.0);
                if lo < hi {
                    let seg = &x[(start + lo as isize) as usize..(start + hi as isize) as usize];
                    for ((s, c), q) in seg.iter().zip(&kernel.cos[lo..hi]).zip(&kernel.sin[lo..hi])
                    {
                        re += s * c;
                        im -= s * q;
                    }
                }
                row[k] = (re * re + im * im).sqrt();
            }
        }
        CqtMatrix::new(out, self.cfg.bins_per_octave, self.cfg.min_hz)
    }
}

/// Analysis with the default configuration.
pub fn cqt_analyze(w: &Waveform) -> Result<CqtMatrix> {
    CqtAnalyzer::new(CqtConfig::default())?.analyze(w)
}

/// The [`SCOPE_BINS`]-wide window starting `d_bins` above the centred one.
///
/// Looking `d` bins higher makes every partial appear `d` bins lower, so the
/// result reads like the analysis of the signal shifted down by `d / 2`
/// semitones at 24 bins per octave.
pub fn shift_scope(c: &CqtMatrix, d_bins: i32) -> Result<CqtMatrix> {
    let bins = c.bins();
    if bins < SCOPE_BINS {
        return Err(Error::shape("cqt bins", SCOPE_BINS, bins));
    }
    let max = (bins - SCOPE_BINS) / 2;
    if d_bins.unsigned_abs() as usize > max {
        return Err(Error::ShiftOutOfRange {
            shift: d_bins,
            max: max as i32,
        });
    }
    let start = (max as i64 + d_bins as i64) as usize;
    let m = c.magnitudes();
    let out = Frames::from_fn(m.rows(), SCOPE_BINS, |t, j| m.get(t, start + j));
    CqtMatrix::new(out, c.bins_per_octave, c.bin_frequency(start))
}
