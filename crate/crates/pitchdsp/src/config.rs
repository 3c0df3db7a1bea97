//! Estimator overrides from command-line flags and `key = value` files.

use std::path::Path;

use pitchdsp_core::estimator::LossWeights;
use pitchdsp_core::EstimatorConfig;

use crate::{Error, Result};

/// Optional replacements for [`EstimatorConfig`] fields. Unset fields keep
/// the defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub warmup_steps: Option<usize>,
    pub hop_ms: Option<f64>,
    pub fft_size: Option<usize>,
    pub theta: Option<f64>,
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub weights: Option<LossWeights>,
    pub lr_log2_f0: Option<f64>,
    pub lr_bap_logit: Option<f64>,
    pub lifter_cutoff_ms: Option<f64>,
    pub guide_weight_hz: Option<f64>,
}

/// `w_pseudo,w_g,w_recon,w_tv`.
pub fn parse_weights(s: &str) -> std::result::Result<LossWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [pseudo, guide, recon, tv] => Ok(LossWeights {
            pseudo,
            guide,
            recon,
            tv,
        }),
        _ => Err(format!(
            "expected four comma-separated weights, got {}",
            parts.len()
        )),
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl Overrides {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut o = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            match key {
                "seed" => o.seed = Some(parse(key, value)?),
                "steps" => o.steps = Some(parse(key, value)?),
                "warmup_steps" => o.warmup_steps = Some(parse(key, value)?),
                "hop_ms" => o.hop_ms = Some(parse(key, value)?),
                "fft_size" => o.fft_size = Some(parse(key, value)?),
                "theta" => o.theta = Some(parse(key, value)?),
                "m" => o.m = Some(parse(key, value)?),
                "alpha" => o.alpha = Some(parse(key, value)?),
                "eps" => o.eps = Some(parse(key, value)?),
                "weights" => {
                    o.weights = Some(
                        parse_weights(value)
                            .map_err(|e| Error::Config(format!("`weights`: {e}")))?,
                    )
                }
                "lr_log2_f0" => o.lr_log2_f0 = Some(parse(key, value)?),
                "lr_bap_logit" => o.lr_bap_logit = Some(parse(key, value)?),
                "lifter_cutoff_ms" => o.lifter_cutoff_ms = Some(parse(key, value)?),
                "guide_weight_hz" => o.guide_weight_hz = Some(parse(key, value)?),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged_with(self, other: &Overrides) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: other.$f.clone().or(self.$f)),* } };
        }
        pick!(
            seed,
            steps,
            warmup_steps,
            hop_ms,
            fft_size,
            theta,
            m,
            alpha,
            eps,
            weights,
            lr_log2_f0,
            lr_bap_logit,
            lifter_cutoff_ms,
            guide_weight_hz
        )
    }

    /// Applies the overrides and validates the result. A warm-up that would
    /// swallow a shortened run is cut to a tenth of the steps.
    pub fn to_config(&self) -> Result<EstimatorConfig> {
        let mut c = EstimatorConfig::default();
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
            if self.warmup_steps.is_none() {
                c.warmup_steps = c.warmup_steps.min(v / 10);
            }
        }
        if let Some(v) = self.warmup_steps {
            c.warmup_steps = v;
        }
        if let Some(v) = self.hop_ms {
            c.frame_shift_s = v / 1000.0;
        }
        if let Some(v) = self.fft_size {
            c.fft_size = v;
        }
        if let Some(v) = self.theta {
            c.theta = v;
        }
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = self.weights {
            c.weights = v;
        }
        if let Some(v) = self.lr_log2_f0 {
            c.lr_log2_f0 = v;
        }
        if let Some(v) = self.lr_bap_logit {
            c.lr_bap_logit = v;
        }
        if let Some(v) = self.lifter_cutoff_ms {
            c.lifter_cutoff_s = v / 1000.0;
        }
        if let Some(v) = self.guide_weight_hz {
            c.guide.weight_hz = (v > 0.0).then_some(v);
        }
        if !c.fft_size.is_power_of_two() || c.fft_size < 4 {
            return Err(Error::Config(format!(
                "fft_size {} is not a power of two >= 4",
                c.fft_size
            )));
        }
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }
}
