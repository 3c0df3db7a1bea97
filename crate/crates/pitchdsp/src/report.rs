//! Metrics report in `key=value` lines and JSON.

use pitchdsp_core::metrics::MetricsReport;
use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Report {
    pub rpa_50: f64,
    pub rpa_100: f64,
    pub rca_50: f64,
    pub log_f0_rmse: f64,
    pub vuv_error_rate: f64,
    pub frames: usize,
    pub voiced_frames: usize,
}

impl From<MetricsReport> for Report {
    fn from(m: MetricsReport) -> Self {
        Self {
            rpa_50: m.rpa_50,
            rpa_100: m.rpa_100,
            rca_50: m.rca_50,
            log_f0_rmse: m.log_f0_rmse,
            vuv_error_rate: m.vuv_error_rate,
            frames: m.frames,
            voiced_frames: m.voiced_frames,
        }
    }
}

impl Report {
    pub fn to_key_value(&self) -> String {
        format!(
            "rpa_50={}\nrpa_100={}\nrca_50={}\nlog_f0_rmse={}\nvuv_error_rate={}\nframes={}\nvoiced_frames={}\n",
            self.rpa_50, self.rpa_100, self.rca_50, self.log_f0_rmse, self.vuv_error_rate, self.frames, self.voiced_frames
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
