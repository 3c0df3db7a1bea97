//! Little-endian binary container for frame matrices.
//!
//! A record is
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `SLSH` |
//! | 2 | version (u16) |
//! | 4 | ASCII type tag, NUL padded |
//! | 4 | frames `T` (u32) |
//! | 4 | columns `K` (u32) |
//! | 8 | frame shift in seconds (f64) |
//! | 4 T K | row-major f32 payload |
//!
//! A file holds one or more records back to back.

use std::io::{Read, Write};
use std::path::Path;

use pitchdsp_core::synth::{bap_to_aperiodicity, VoicingMask};
use pitchdsp_core::{BandAperiodicity, Frames, PitchTrack, SpectralEnvelope, VocoderFeatureSet};

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SLSH";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    /// F0 in Hz, one column.
    F0,
    /// Log-amplitude spectral envelope.
    Env,
    /// Band aperiodicity.
    Bap,
    /// Voicing flag and soft voicing ratio.
    Vuv,
    Cqt,
    Guide,
    /// Amplitude spectrogram.
    Spec,
    /// Pseudo spectrogram `S*`.
    PseudoSpec,
}

impl Tag {
    pub fn bytes(self) -> [u8; 4] {
        match self {
            Tag::F0 => *b"F0\0\0",
            Tag::Env => *b"ENV\0",
            Tag::Bap => *b"BAP\0",
            Tag::Vuv => *b"VUV\0",
            Tag::Cqt => *b"CQT\0",
            Tag::Guide => *b"GUID",
            Tag::Spec => *b"SPEC",
            Tag::PseudoSpec => *b"PSPC",
        }
    }

    pub fn from_bytes(b: [u8; 4]) -> Option<Self> {
        [
            Tag::F0,
            Tag::Env,
            Tag::Bap,
            Tag::Vuv,
            Tag::Cqt,
            Tag::Guide,
            Tag::Spec,
            Tag::PseudoSpec,
        ]
        .into_iter()
        .find(|t| t.bytes() == b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub tag: Tag,
    pub frame_shift_s: f64,
    pub data: Frames,
}

impl Record {
    pub fn new(tag: Tag, frame_shift_s: f64, data: Frames) -> Self {
        Self {
            tag,
            frame_shift_s,
            data,
        }
    }
}

pub fn write_record<W: Write>(mut out: W, record: &Record) -> Result<()> {
    let (rows, cols) = record.data.shape();
    let dim = |n: usize, what: &str| {
        u32::try_from(n)
            .map_err(|_| Error::Container(format!("{what} count {n} does not fit in u32")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * rows * cols);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&record.tag.bytes());
    buf.extend_from_slice(&dim(rows, "frame")?.to_le_bytes());
    buf.extend_from_slice(&dim(cols, "column")?.to_le_bytes());
    buf.extend_from_slice(&record.frame_shift_s.to_le_bytes());
    for v in record.data.as_slice() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)
        .map_err(|e| Error::Container(format!("write failed: {e}")))
}

/// Reads the next record, or `None` at a clean end of input.
pub fn read_record<R: Read>(mut input: R) -> Result<Option<Record>> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match input.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Container("truncated header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Container(format!("read failed: {e}"))),
        }
    }
    if header[..4] != MAGIC {
        return Err(Error::Container("bad magic, expected SLSH".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let tag_bytes: [u8; 4] = header[6..10].try_into().expect("4 bytes");
    let tag = Tag::from_bytes(tag_bytes).ok_or_else(|| {
        Error::Container(format!(
            "unknown tag {:?}",
            String::from_utf8_lossy(&tag_bytes)
        ))
    })?;
    let rows = u32::from_le_bytes(header[10..14].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(header[14..18].try_into().expect("4 bytes")) as usize;
    let frame_shift_s = f64::from_le_bytes(header[18..26].try_into().expect("8 bytes"));
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Container("payload size overflows".into()))?;
    let mut payload = Vec::new();
    input
        .take(len as u64)
        .read_to_end(&mut payload)
        .map_err(|e| Error::Container(format!("read failed: {e}")))?;
    if payload.len() != len {
        return Err(Error::Container(format!(
            "truncated payload: {} of {len} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Some(Record::new(
        tag,
        frame_shift_s,
        Frames::from_vec(rows, cols, values)?,
    )))
}

pub fn write_records<W: Write>(mut out: W, records: &[Record]) -> Result<()> {
    records.iter().try_for_each(|r| write_record(&mut out, r))
}

pub fn read_records<R: Read>(mut input: R) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    while let Some(r) = read_record(&mut input)? {
        records.push(r);
    }
    Ok(records)
}

pub fn save_records(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_records(bytes.as_slice())
}

/// True when `bytes` starts with the container magic.
pub fn is_container(bytes: &[u8]) -> bool {
    bytes.starts_with(&MAGIC)
}

/// F0, ENV, BAP and VUV records of a feature set.
pub fn feature_records(f: &VocoderFeatureSet) -> Vec<Record> {
    let t = f.pitch.len();
    let shift = f.frame_shift_s;
    let vuv = Frames::from_fn(t, 2, |r, c| match c {
        0 => f.voicing.flags()[r] as u8 as f64,
        _ => f.voicing.soft_ratio()[r],
    });
    vec![
        Record::new(
            Tag::F0,
            shift,
            Frames::from_vec(t, 1, f.pitch.f0_hz().to_vec()).expect("t x 1"),
        ),
        Record::new(Tag::Env, shift, f.envelope.log_values.clone()),
        Record::new(Tag::Bap, shift, f.bap.values().clone()),
        Record::new(Tag::Vuv, shift, vuv),
    ]
}

fn find(records: &[Record], tag: Tag) -> Result<&Record> {
    records
        .iter()
        .find(|r| r.tag == tag)
        .ok_or_else(|| Error::Container(format!("missing {:?} record", tag)))
}

/// Rebuilds a feature set; the full-resolution aperiodicity is
/// re-interpolated from the bands with the default anchor layout.
pub fn features_from_records(records: &[Record]) -> Result<VocoderFeatureSet> {
    let (f0, env, bap, vuv) = (
        find(records, Tag::F0)?,
        find(records, Tag::Env)?,
        find(records, Tag::Bap)?,
        find(records, Tag::Vuv)?,
    );
    let t = f0.data.rows();
    if f0.data.cols() != 1 || vuv.data.cols() != 2 {
        return Err(Error::Container("F0 needs one column and VUV two".into()));
    }
    if [env.data.rows(), bap.data.rows(), vuv.data.rows()]
        .iter()
        .any(|&r| r != t)
    {
        return Err(Error::Container(
            "records disagree on the frame count".into(),
        ));
    }
    if [env, bap, vuv]
        .iter()
        .any(|r| r.frame_shift_s != f0.frame_shift_s)
    {
        return Err(Error::Container(
            "records disagree on the frame shift".into(),
        ));
    }
    let bins = env.data.cols();
    let rate = pitchdsp_core::SAMPLE_RATE;
    let bap = BandAperiodicity::new(bap.data.clone())?;
    if bap.bands() != pitchdsp_core::synth::DEFAULT_BAP_ANCHORS_HZ.len() {
        return Err(Error::Container(format!(
            "expected 8 aperiodicity bands, found {}",
            bap.bands()
        )));
    }
    let flags = (0..t).map(|r| vuv.data.get(r, 0) != 0.0).collect();
    let ratios = (0..t).map(|r| vuv.data.get(r, 1)).collect();
    Ok(VocoderFeatureSet {
        pitch: PitchTrack::from_hz(f0.data.as_slice().to_vec())?,
        envelope: SpectralEnvelope {
            log_values: env.data.clone(),
        },
        aperiodicity: bap_to_aperiodicity(&bap, bins, rate)?,
        bap,
        voicing: VoicingMask::from_parts(flags, ratios)?,
        frame_shift_s: f0.frame_shift_s,
    })
}

pub fn save_features(path: impl AsRef<Path>, f: &VocoderFeatureSet) -> Result<()> {
    save_records(path, &feature_records(f))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<VocoderFeatureSet> {
    features_from_records(&load_records(path)?)
}
