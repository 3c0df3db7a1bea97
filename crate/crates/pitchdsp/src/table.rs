//! CSV exports for plotting and inspection.

use std::path::Path;

use pitchdsp_core::guide::frequency_axis;
use pitchdsp_core::{PitchGuide, VocoderFeatureSet};

use crate::{Error, Result};

/// A header row and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    /// Reads a table written by [`Table::write`].
    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Container(format!("csv field `{f}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// One row per frame: time, F0, voicing flag, soft voicing ratio and the
/// band aperiodicities.
pub fn features_table(f: &VocoderFeatureSet) -> Table {
    let bands = f.bap.bands();
    let mut header: Vec<String> = ["frame", "time_s", "f0_hz", "voiced", "vuv_ratio"]
        .map(String::from)
        .into();
    header.extend((0..bands).map(|b| format!("bap_{b}")));
    let rows = (0..f.pitch.len())
        .map(|t| {
            let mut row = vec![
                t as f64,
                t as f64 * f.frame_shift_s,
                f.pitch.f0_hz()[t],
                f.voicing.flags()[t] as u8 as f64,
                f.voicing.soft_ratio()[t],
            ];
            row.extend_from_slice(f.bap.values().row(t));
            row
        })
        .collect();
    Table { header, rows }
}

/// One row per frame; the header lists the grid frequencies in Hz.
pub fn guide_table(g: &PitchGuide, frame_shift_s: f64) -> Table {
    let mut header = vec!["time_s".to_string()];
    header.extend(frequency_axis().iter().map(|f| f.to_string()));
    let rows = (0..g.frames())
        .map(|t| {
            let mut row = vec![t as f64 * frame_shift_s];
            row.extend_from_slice(g.values().row(t));
            row
        })
        .collect();
    Table { header, rows }
}
