//! Subharmonic-summation pitch guide over a log-frequency grid and the hinge
//! losses that compare pitch distributions against it.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::spectral::{AmplitudeSpectrogram, LagWindow, AMPLITUDE_FLOOR, DEFAULT_LIFTER_CUTOFF_S};
use crate::{Error, Frames, Result};

/// Number of candidate frequencies.
pub const GRID_BINS: usize = 1024;
pub const GRID_MIN_HZ: f64 = 20.0;
pub const GRID_MAX_HZ: f64 = 2000.0;

/// Grid bins per octave, `1023 / log2(100)`.
pub fn grid_bins_per_octave() -> f64 {
    (GRID_BINS - 1) as f64 / (GRID_MAX_HZ / GRID_MIN_HZ).log2()
}

/// `freq_axis[i] = 20 * 100^(i / 1023)`, endpoints exact.
pub fn grid_frequency(i: usize) -> f64 {
    match i {
        0 => GRID_MIN_HZ,
        i if i == GRID_BINS - 1 => GRID_MAX_HZ,
        i => GRID_MIN_HZ * (GRID_MAX_HZ / GRID_MIN_HZ).powf(i as f64 / (GRID_BINS - 1) as f64),
    }
}

pub fn frequency_axis() -> Vec<f64> {
    (0..GRID_BINS).map(grid_frequency).collect()
}

/// Fractional grid position of `hz` (unclamped).
pub fn grid_position(hz: f64) -> f64 {
    (hz / GRID_MIN_HZ).log2() * grid_bins_per_octave()
}

/// Grid-bin offset of a pitch shift, `round(semitones / 12 * bins_per_octave)`.
/// Positive values shift pitch upwards.
pub fn semitones_to_guide_bins(semitones: f64) -> i32 {
    (semitones / 12.0 * grid_bins_per_octave()).round() as i32
}

/// Subharmonic summation on a linear-frequency spectrum whose column `c`
/// lies at `(c + 1) * bin_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubharmonicSummation {
    pub n_harmonics: usize,
    pub decay: f64,
}

impl Default for SubharmonicSummation {
    fn default() -> Self {
        Self {
            n_harmonics: 8,
            decay: 0.86,
        }
    }
}

impl SubharmonicSummation {
    /// `sum_n decay^(n-1) * L(n f)`; harmonics above Nyquist are skipped.
    pub fn salience(&self, row: &[f64], bin_hz: f64, f: f64) -> f64 {
        let nyquist = bin_hz * row.len() as f64;
        let mut weight = 1.0;
        let mut total = 0.0;
        for n in 1..=self.n_harmonics {
            let fh = n as f64 * f;
            if fh > nyquist {
                break;
            }
            total += weight * interpolate_linear(row, fh / bin_hz - 1.0);
            weight *= self.decay;
        }
        total
    }

    /// Salience of every row on the guide grid.
    pub fn apply(&self, input: &Frames, bin_hz: f64) -> Frames {
        let axis = frequency_axis();
        let mut out = Frames::zeros(input.rows(), GRID_BINS);
        for t in 0..input.rows() {
            let row = input.row(t);
            for (i, &f) in axis.iter().enumerate() {
                out.set(t, i, self.salience(row, bin_hz, f));
            }
        }
        out
    }
}

fn interpolate_linear(row: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        // below the first stored bin there is nothing to interpolate towards
        return if pos > -1.0 {
            row[0] * (1.0 + pos)
        } else {
            0.0
        };
    }
    let i = pos.floor() as usize;
    if i + 1 >= row.len() {
        return if i < row.len() { row[i] } else { 0.0 };
    }
    let frac = pos - i as f64;
    row[i] * (1.0 - frac) + row[i + 1] * frac
}

/// `shs` over a `T x K` nonnegative input with the given harmonic model.
pub fn shs(fine_spec_exp: &Frames, n_harmonics: usize, decay: f64, sample_rate: u32) -> Frames {
    let bin_hz = sample_rate as f64 / (2 * fine_spec_exp.cols()) as f64;
    SubharmonicSummation { n_harmonics, decay }.apply(fine_spec_exp, bin_hz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideConfig {
    pub summation: SubharmonicSummation,
    pub lifter_cutoff_s: f64,
    /// Exponential high-frequency roll-off `exp(-f / weight_hz)` applied to
    /// `exp(psi(S))` before summation; `None` disables it. Without it an
    /// envelope-flattened comb scores the same at `f0` and `2 f0`.
    pub weight_hz: Option<f64>,
}

impl Default for GuideConfig {
    fn default() -> Self {
        Self {
            summation: SubharmonicSummation::default(),
            lifter_cutoff_s: DEFAULT_LIFTER_CUTOFF_S,
            weight_hz: Some(2000.0),
        }
    }
}

/// Per-frame prior over the guide grid, max-normalised to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchGuide {
    values: Frames,
    silent: Vec<bool>,
}

impl PitchGuide {
    pub fn new(values: Frames, silent: Vec<bool>) -> Result<Self> {
        if values.cols() != GRID_BINS {
            return Err(Error::shape(
                "pitch guide columns",
                GRID_BINS,
                values.cols(),
            ));
        }
        if silent.len() != values.rows() {
            return Err(Error::shape("silent flags", values.rows(), silent.len()));
        }
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("pitch guide", "values must lie in [0, 1]"));
        }
        Ok(Self { values, silent })
    }

    pub fn values(&self) -> &Frames {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn is_silent(&self, t: usize) -> bool {
        self.silent[t]
    }

    pub fn silent_flags(&self) -> &[bool] {
        &self.silent
    }

    pub fn argmax(&self, t: usize) -> usize {
        let row = self.values.row(t);
        (0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
    }

    /// Value at `f0_hz` by linear interpolation in log2 frequency. Returns the
    /// value and whether `f0_hz` had to be clamped into the grid.
    pub fn value_at(&self, t: usize, f0_hz: f64) -> (f64, bool) {
        let clamped = !(GRID_MIN_HZ..=GRID_MAX_HZ).contains(&f0_hz);
        let (v, _) = self.value_and_slope(t, f0_hz.clamp(GRID_MIN_HZ, GRID_MAX_HZ).log2());
        (v, clamped)
    }

    /// Interpolated value and its derivative with respect to `log2 f0`.
    pub fn value_and_slope(&self, t: usize, log2_f0: f64) -> (f64, f64) {
        let pos = (log2_f0 - GRID_MIN_HZ.log2()) * grid_bins_per_octave();
        let pos = pos.clamp(0.0, (GRID_BINS - 1) as f64);
        let row = self.values.row(t);
        let i = (pos.floor() as usize).min(GRID_BINS - 2);
        let frac = pos - i as f64;
        let v = row[i] * (1.0 - frac) + row[i + 1] * frac;
        (v, (row[i + 1] - row[i]) * grid_bins_per_octave())
    }
}

/// Row-stochastic distribution over the guide grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchDistribution {
    values: Frames,
}

impl PitchDistribution {
    pub fn new(values: Frames) -> Result<Self> {
        if values.cols() != GRID_BINS {
            return Err(Error::shape(
                "pitch distribution columns",
                GRID_BINS,
                values.cols(),
            ));
        }
        for row in values.rows_iter() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::param(
                    "pitch distribution",
                    "rows must be nonnegative and sum to 1",
                ));
            }
        }
        Ok(Self { values })
    }

    pub fn one_hot(bins: &[usize]) -> Result<Self> {
        if let Some(&b) = bins.iter().find(|&&b| b >= GRID_BINS) {
            return Err(Error::param(
                "bin",
                alloc::format!("{b} is outside the grid"),
            ));
        }
        Self::new(Frames::from_fn(bins.len(), GRID_BINS, |t, i| {
            if bins[t] == i {
                1.0
            } else {
                0.0
            }
        }))
    }

    pub fn uniform(frames: usize) -> Self {
        Self {
            values: Frames::filled(frames, GRID_BINS, 1.0 / GRID_BINS as f64),
        }
    }

    pub fn values(&self) -> &Frames {
        &self.values
    }
}

/// Builds the guide from `exp(psi(S))`. Frames whose spectrum never rises
/// above the amplitude floor are silent: their row is all zero and they are
/// flagged.
pub fn build_pitch_guide(s: &AmplitudeSpectrogram, config: &GuideConfig) -> Result<PitchGuide> {
    let lag = LagWindow::for_spectrogram(s, config.lifter_cutoff_s)?;
    let psi = lag.fine_structure_of_log(&s.log_floored());
    let mut input = psi.map(f64::exp);
    if let Some(weight_hz) = config.weight_hz {
        for t in 0..input.rows() {
            for (c, v) in input.row_mut(t).iter_mut().enumerate() {
                *v *= (-s.bin_hz(c) / weight_hz).exp();
            }
        }
    }
    let bin_hz = s.bin_hz(0);
    let mut values = config.summation.apply(&input, bin_hz);
    let mut silent = Vec::with_capacity(s.frames());
    for t in 0..s.frames() {
        let is_silent = s.values().row(t).iter().all(|&v| v <= AMPLITUDE_FLOOR);
        let row = values.row_mut(t);
        let max = row.iter().cloned().fold(0.0, f64::max);
        if is_silent || max <= 0.0 {
            row.iter_mut().for_each(|v| *v = 0.0);
            silent.push(true);
        } else {
            row.iter_mut().for_each(|v| *v /= max);
            silent.push(false);
        }
    }
    PitchGuide::new(values, silent)
}

fn check_axes(p: &Frames, g: &PitchGuide) -> Result<()> {
    if p.rows() != g.frames() {
        return Err(Error::shape(
            "pitch distribution frames",
            g.frames(),
            p.rows(),
        ));
    }
    Ok(())
}

/// Hinge guide loss, averaged over non-silent frames.
pub fn guide_loss(p: &PitchDistribution, g: &PitchGuide, m: f64) -> Result<f64> {
    shifted_guide_loss(p, g, 0, m)
}

/// Guide loss against `G[t, f - delta_f_bins]`; entries outside the grid
/// count as zero.
pub fn shifted_guide_loss(
    p_shift: &PitchDistribution,
    g: &PitchGuide,
    delta_f_bins: i32,
    m: f64,
) -> Result<f64> {
    check_axes(p_shift.values(), g)?;
    let mut total = 0.0;
    let mut frames = 0usize;
    for t in 0..g.frames() {
        if g.is_silent(t) {
            continue;
        }
        let prow = p_shift.values().row(t);
        let grow = g.values().row(t);
        let inner: f64 = (0..GRID_BINS)
            .filter_map(|f| {
                let src = f as i64 - delta_f_bins as i64;
                (0..GRID_BINS as i64)
                    .contains(&src)
                    .then(|| prow[f] * grow[src as usize])
            })
            .sum();
        total += (1.0 - inner - m).max(0.0);
        frames += 1;
    }
    Ok(if frames == 0 {
        0.0
    } else {
        total / frames as f64
    })
}

/// Interpolated guide value at `f0_hz` for frame `t`; see [`PitchGuide::value_at`].
pub fn guide_value_at(g: &PitchGuide, t: usize, f0_hz: f64) -> (f64, bool) {
    g.value_at(t, f0_hz)
}
