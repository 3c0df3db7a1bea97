//! Reference pitch annotations as text.
//!
//! Each non-empty line holds either `time_s value` (two columns) or a single
//! per-frame `value`, separated by whitespace or commas. Lines starting with
//! `#` are ignored. Values are Hz or MIDI semitones, and 0 marks an unvoiced
//! frame in either unit.

use std::path::Path;

use pitchdsp_core::audio::semitone_to_hz;
use pitchdsp_core::PitchLabelTrack;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelUnits {
    #[default]
    Hz,
    Semitone,
}

impl std::str::FromStr for LabelUnits {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hz" => Ok(LabelUnits::Hz),
            "semitone" => Ok(LabelUnits::Semitone),
            other => Err(format!("expected `hz` or `semitone`, got `{other}`")),
        }
    }
}

impl LabelUnits {
    fn to_hz(self, v: f64) -> f64 {
        match self {
            _ if v == 0.0 => 0.0,
            LabelUnits::Hz => v,
            LabelUnits::Semitone => semitone_to_hz(v),
        }
    }
}

/// One-column files are placed on a grid of `frame_shift_s` starting at 0.
pub fn parse_pitch_labels(
    text: &str,
    frame_shift_s: f64,
    units: LabelUnits,
) -> Result<PitchLabelTrack> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut columns = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Labels {
                line: line_no,
                reason: format!("{e} in `{line}`"),
            })?;
        if !matches!(fields.len(), 1 | 2) || *columns.get_or_insert(fields.len()) != fields.len() {
            return Err(Error::Labels {
                line: line_no,
                reason: "every row needs the same number of columns, one or two".into(),
            });
        }
        if fields.len() == 2 {
            if times.last().is_some_and(|&t| fields[0] <= t) {
                return Err(Error::Labels {
                    line: line_no,
                    reason: format!("time {} does not increase", fields[0]),
                });
            }
            times.push(fields[0]);
        }
        values.push(units.to_hz(*fields.last().expect("one or two fields")));
    }
    let track = if columns == Some(2) {
        PitchLabelTrack::new(times, values)
    } else {
        PitchLabelTrack::uniform(frame_shift_s, values)
    };
    track.map_err(Error::from)
}

pub fn load_pitch_labels(
    path: impl AsRef<Path>,
    frame_shift_s: f64,
    units: LabelUnits,
) -> Result<PitchLabelTrack> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pitch_labels(&text, frame_shift_s, units)
}

/// Two-column `time_s f0_hz` text, the format [`parse_pitch_labels`] reads.
pub fn format_pitch_labels(times: &[f64], f0_hz: &[f64]) -> String {
    times
        .iter()
        .zip(f0_hz)
        .map(|(t, f)| format!("{t:.6} {f:.6}\n"))
        .collect()
}
