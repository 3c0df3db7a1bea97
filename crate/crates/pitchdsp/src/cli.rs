//! Command-line front end: `analyze`, `synth`, `guide`, `eval` and
//! `pseudo-demo`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pitchdsp_core::cqt::{CqtAnalyzer, CqtConfig};
use pitchdsp_core::estimator::{Analysis, Estimator, LossWeights};
use pitchdsp_core::metrics::{evaluate, EstimatedPitch, LogBase};
use pitchdsp_core::pseudo::pseudo_periodic_excitation;
use pitchdsp_core::synth::Synthesizer;
use pitchdsp_core::{estimator, AmplitudeSpectrogram, EstimatorConfig, PitchTrack, SAMPLE_RATE};
use rayon::prelude::*;

use crate::config::{parse_weights, Overrides};
use crate::container::{self, Record, Tag};
use crate::labels::{load_pitch_labels, LabelUnits};
use crate::report::Report;
use crate::table::{features_table, guide_table, Table};
use crate::wav::{load_wav_internal_rate, save_wav, Channel, SampleFormat};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "pitchdsp",
    version,
    about = "Pitch, aperiodicity and voicing analysis by differentiable DSP"
)]
pub struct Cli {
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Estimator settings shared by every subcommand. Flags override values read
/// from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct EstimatorArgs {
    /// `key = value` file with estimator settings
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub warmup_steps: Option<usize>,
    #[arg(long, global = true, value_name = "MS")]
    pub hop_ms: Option<f64>,
    #[arg(long, global = true)]
    pub fft_size: Option<usize>,
    /// Voicing threshold on the soft voicing ratio
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Guide hinge margin
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Weight of the repulsive reconstruction term
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Floor and noise scale of the pseudo excitation
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Loss weights as `pseudo,guide,recon,tv`
    #[arg(long, global = true, value_parser = parse_weights, value_name = "W,W,W,W")]
    pub weights: Option<LossWeights>,
    /// Input channel: `mix` or a zero-based index
    #[arg(long, global = true, default_value = "mix")]
    pub channel: Channel,
    /// Worker threads for multi-file runs (0 picks the CPU count)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

impl EstimatorArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            steps: self.steps,
            warmup_steps: self.warmup_steps,
            hop_ms: self.hop_ms,
            fft_size: self.fft_size,
            theta: self.theta,
            m: self.m,
            alpha: self.alpha,
            eps: self.eps,
            weights: self.weights,
            ..Overrides::default()
        }
    }

    /// Config file values, then flags.
    pub fn to_config(&self) -> Result<EstimatorConfig> {
        let base = match &self.config {
            Some(path) => Overrides::load(path)?,
            None => Overrides::default(),
        };
        base.merged_with(&self.overrides()).to_config()
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate F0, aperiodicity and voicing and write a feature container
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file for one input, or a directory for several
        #[arg(short, long)]
        out: PathBuf,
        /// Also write a per-frame CSV next to each container
        #[arg(long)]
        csv: bool,
    },
    /// Render a feature container to a WAV file at the internal rate
    Synth {
        features: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value = "pcm16")]
        format: SampleFormat,
    },
    /// Write the pitch guide as CSV
    Guide {
        wav: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the spectrogram, guide and constant-Q records
        #[arg(long, value_name = "FILE")]
        container: Option<PathBuf>,
    },
    /// Score an estimate against reference pitch labels
    Eval {
        /// Feature container or pitch label file
        estimate: PathBuf,
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Units::Hz)]
        ref_units: Units,
        /// Frame shift for single-column label files
        #[arg(long, default_value_t = 5.0, value_name = "MS")]
        ref_frame_shift_ms: f64,
        #[arg(long, value_enum, default_value_t = Units::Hz)]
        est_units: Units,
        #[arg(long, default_value_t = 5.0, value_name = "MS")]
        est_frame_shift_ms: f64,
        #[arg(long, value_enum, default_value_t = Base::Natural)]
        log_base: Base,
        #[arg(long, value_enum, default_value_t = Format::Kv)]
        format: Format,
        /// Also write the report as JSON to this file
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Write one frame of the target and pseudo spectra after optimisation
    PseudoDemo {
        wav: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        frame: i64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Hz,
    Semitone,
}

impl From<Units> for LabelUnits {
    fn from(u: Units) -> Self {
        match u {
            Units::Hz => LabelUnits::Hz,
            Units::Semitone => LabelUnits::Semitone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Base {
    Natural,
    Log2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Kv,
    Json,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status: 0 on success, 1 for usage errors and 2 for data
/// errors.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pitchdsp: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let args = &cli.estimator;
    match &cli.command {
        Command::Analyze { inputs, out, csv } => analyze(args, inputs, out, *csv),
        Command::Synth {
            features,
            out,
            format,
        } => synth(args, features, out, *format),
        Command::Guide {
            wav,
            out,
            container,
        } => guide(args, wav, out, container.as_deref()),
        Command::Eval {
            estimate,
            reference,
            ref_units,
            ref_frame_shift_ms,
            est_units,
            est_frame_shift_ms,
            log_base,
            format,
            json,
        } => {
            let report = eval(
                estimate,
                (*est_units).into(),
                est_frame_shift_ms / 1000.0,
                reference,
                (*ref_units).into(),
                ref_frame_shift_ms / 1000.0,
                match log_base {
                    Base::Natural => LogBase::Natural,
                    Base::Log2 => LogBase::Two,
                },
            )?;
            match format {
                Format::Kv => print!("{}", report.to_key_value()),
                Format::Json => println!("{}", report.to_json()?),
            }
            if let Some(path) = json {
                std::fs::write(path, report.to_json()? + "\n").map_err(|e| Error::io(path, e))?;
            }
            Ok(())
        }
        Command::PseudoDemo { wav, frame, out } => pseudo_demo(args, wav, *frame, out),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

fn output_paths(inputs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if inputs.len() == 1 && !out.is_dir() {
        return Ok(vec![out.to_path_buf()]);
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    inputs
        .iter()
        .map(|input| {
            let stem = input
                .file_stem()
                .ok_or_else(|| Error::Config(format!("{}: no file name", input.display())))?;
            Ok(out.join(stem).with_extension("slsh"))
        })
        .collect()
}

fn analyze(args: &EstimatorArgs, inputs: &[PathBuf], out: &Path, csv: bool) -> Result<()> {
    let cfg = args.to_config()?;
    let outputs = output_paths(inputs, out)?;
    let analyze_one = |(input, output): (&PathBuf, &PathBuf)| -> Result<()> {
        let w = load_wav_internal_rate(input, args.channel)?;
        let features = estimator::analyze_features(&w, &cfg)?;
        container::save_features(output, &features)?;
        if csv {
            features_table(&features).save(output.with_extension("csv"))?;
        }
        eprintln!(
            "{}: {} frames, {} voiced -> {}",
            input.display(),
            features.pitch.len(),
            features.voicing.voiced_count(),
            output.display()
        );
        Ok(())
    };
    thread_pool(args.jobs)?.install(|| inputs.par_iter().zip(&outputs).try_for_each(analyze_one))
}

fn synth(args: &EstimatorArgs, features: &Path, out: &Path, format: SampleFormat) -> Result<()> {
    let f = container::load_features(features)?;
    let fft_size = 2 * f.envelope.log_values.cols();
    let synthesizer = Synthesizer::new(fft_size, f.frame_shift_s, SAMPLE_RATE)?;
    let seed = args.seed.unwrap_or(0);
    let s = synthesizer.synthesize(&f.pitch, &f.envelope, &f.aperiodicity, seed)?;
    save_wav(out, &s.waveform, format)
}

fn guide(args: &EstimatorArgs, wav: &Path, out: &Path, records: Option<&Path>) -> Result<()> {
    let cfg = args.to_config()?;
    let w = load_wav_internal_rate(wav, args.channel)?;
    let analysis = Analysis::new(&w, &cfg)?;
    guide_table(&analysis.guide, cfg.frame_shift_s).save(out)?;
    if let Some(path) = records {
        let cqt = CqtAnalyzer::new(CqtConfig {
            frame_shift_s: cfg.frame_shift_s,
            ..CqtConfig::default()
        })?
        .analyze(&w)?;
        let shift = cfg.frame_shift_s;
        container::save_records(
            path,
            &[
                Record::new(Tag::Spec, shift, analysis.spectrogram.values().clone()),
                Record::new(Tag::Guide, shift, analysis.guide.values().clone()),
                Record::new(Tag::Cqt, shift, cqt.magnitudes().clone()),
            ],
        )?;
    }
    Ok(())
}

fn load_estimate(path: &Path, units: LabelUnits, frame_shift_s: f64) -> Result<EstimatedPitch> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if container::is_container(&bytes) {
        let f = container::features_from_records(&container::read_records(bytes.as_slice())?)?;
        return Ok(EstimatedPitch::from_track(
            &f.pitch,
            &f.voicing,
            f.frame_shift_s,
        )?);
    }
    Ok(EstimatedPitch::from_labels(&load_pitch_labels(
        path,
        frame_shift_s,
        units,
    )?)?)
}

/// Metrics of an estimate (container or label file) against reference labels.
pub fn eval(
    estimate: &Path,
    est_units: LabelUnits,
    est_frame_shift_s: f64,
    reference: &Path,
    ref_units: LabelUnits,
    ref_frame_shift_s: f64,
    base: LogBase,
) -> Result<Report> {
    let est = load_estimate(estimate, est_units, est_frame_shift_s)?;
    let reference = load_pitch_labels(reference, ref_frame_shift_s, ref_units)?;
    Ok(evaluate(&est, &reference, base)?.into())
}

/// Per-bin spectra of one frame after the full optimisation: target log
/// amplitude, pseudo excitation, and the fine structures of the target and
/// of the pseudo spectrogram.
pub fn pseudo_demo_table(analysis: &Analysis, cfg: &EstimatorConfig, frame: i64) -> Result<Table> {
    let frames = analysis.spectrogram.frames();
    let t = usize::try_from(frame)
        .ok()
        .filter(|&t| t < frames)
        .ok_or_else(|| Error::OutOfRange(format!("frame {frame} outside 0..{frames}")))?;
    let mut est = Estimator::new(analysis, cfg)?;
    while est.steps_taken() < cfg.steps {
        est.step()?;
    }
    let p: PitchTrack = est.pitch()?;
    let voicing = est.voicing()?;
    let (excitation, noise_seed) = est.step_excitation()?;
    let objective = est.pseudo_context(&excitation, voicing.flags(), noise_seed)?;
    let s = &analysis.spectrogram;
    let s_star = AmplitudeSpectrogram::new(
        objective.pseudo_spectrogram(&p)?,
        s.frame_shift_s(),
        s.sample_rate(),
    )?;
    let psi_star = analysis
        .lag_window()
        .fine_structure_of_log(&s_star.log_floored());
    let e_star = pseudo_periodic_excitation(
        &p,
        cfg.eps,
        noise_seed,
        s.sample_rate(),
        s.bins(),
        s.frame_shift_s(),
    )?;
    let log_s = s.log_floored();
    let header = [
        "bin",
        "freq_hz",
        "log_s",
        "pseudo_excitation",
        "psi_s",
        "psi_s_star",
    ]
    .map(String::from)
    .into();
    let rows = (0..s.bins())
        .map(|c| {
            vec![
                (c + 1) as f64,
                s.bin_hz(c),
                log_s.get(t, c),
                e_star.values().get(t, c),
                analysis.fine_structure.get(t, c),
                psi_star.get(t, c),
            ]
        })
        .collect();
    eprintln!(
        "frame {t}: f0 {:.2} Hz, {}",
        p.f0_hz()[t],
        if voicing.flags()[t] {
            "voiced"
        } else {
            "unvoiced"
        }
    );
    Ok(Table { header, rows })
}

fn pseudo_demo(args: &EstimatorArgs, wav: &Path, frame: i64, out: &Path) -> Result<()> {
    let cfg = args.to_config()?;
    if frame < 0 {
        return Err(Error::OutOfRange(format!("frame {frame} is negative")));
    }
    let w = load_wav_internal_rate(wav, args.channel)?;
    let analysis = Analysis::new(&w, &cfg)?;
    pseudo_demo_table(&analysis, &cfg, frame)?.save(out)
}
