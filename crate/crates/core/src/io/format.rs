//! Little-endian binary containers.
//!
//! Every file starts with a four-byte magic whose last byte is the format
//! version. Layouts (all integers u32, all reals f64, unless noted):
//!
//! | magic  | contents |
//! |--------|----------|
//! | `HPC1` | `n_f, frame_rate, flags`, subject if `flags & 1`, label if `flags & 2`, then per frame `index, count, count × (x, y, z)` |
//! | `HPD1` | `n, dim, m, psi, echo_len, echo bytes (UTF-8)`, then per row `subject, label` and `dim` reals |
//! | `HPK1` | `n, dim, subject, label`, then per keypoint `frame, x, y, z, r, tau, eta, offset (u64)`, then `n × dim` reals |
//! | `HPB1` | `k, dim`, then `k × dim` reals |
//! | `HPM1` | `kernel (u8), pad (3 bytes), c, n_classes, classes, n_sv, dim, support rows, coef rows, biases` |

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::geom::{Frame, Point3, PointCloudSequence};
use crate::learn::svm::{DualModel, KernelKind};
use crate::learn::{ClassifierModel, Codebook};
use crate::stkp::Keypoint;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: String },
    #[error("version mismatch: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload")]
    TruncatedPayload,
}

pub const SEQUENCE_MAGIC: &[u8; 4] = b"HPC1";
pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"HPD1";
pub const KEYPOINT_MAGIC: &[u8; 4] = b"HPK1";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"HPB1";
pub const MODEL_MAGIC: &[u8; 4] = b"HPM1";

const FLAG_SUBJECT: u32 = 1;
const FLAG_LABEL: u32 = 2;
/// Stored in place of a missing subject or label in row-tagged files.
pub const NO_TAG: u32 = u32::MAX;

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::TruncatedPayload)?;
        let s = self.buf.get(self.pos..end).ok_or(FormatError::TruncatedPayload)?;
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let want = String::from_utf8_lossy(expected).into_owned();
        let got = self.take(4).map_err(|_| FormatError::MalformedHeader("file shorter than magic".into()))?;
        if got == expected {
            Ok(())
        } else if got[..3] == expected[..3] {
            Err(FormatError::VersionMismatch { expected: want, found: String::from_utf8_lossy(got).into_owned() })
        } else {
            Err(FormatError::BadMagic { expected: want })
        }
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads `n` reals after checking the remaining length, so corrupt
    /// counts cannot trigger huge allocations.
    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let bytes = self.take(n.checked_mul(8).ok_or(FormatError::TruncatedPayload)?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(FormatError::MalformedHeader(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

#[derive(Default)]
pub(crate) struct Writer {
    pub(crate) buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }
    pub(crate) fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }
    pub(crate) fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }
    pub(crate) fn f64(&mut self, v: f64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }
    pub(crate) fn f64s(&mut self, v: &[f64]) -> &mut Self {
        v.iter().for_each(|x| {
            self.f64(*x);
        });
        self
    }
}

fn count_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::data(format!("{what} count {n} exceeds the format limit")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn encode_sequence(seq: &PointCloudSequence) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    let flags = (u32::from(seq.subject_id.is_some()) * FLAG_SUBJECT) | (u32::from(seq.action_label.is_some()) * FLAG_LABEL);
    w.bytes(SEQUENCE_MAGIC).u32(count_u32(seq.n_frames(), "frame")?).f64(seq.frame_rate).u32(flags);
    if let Some(s) = seq.subject_id {
        w.u32(s);
    }
    if let Some(l) = seq.action_label {
        w.u32(l);
    }
    for f in seq.frames() {
        w.u32(f.index).u32(count_u32(f.points.len(), "point")?);
        for p in &f.points {
            w.f64(p.x).f64(p.y).f64(p.z);
        }
    }
    Ok(w.buf)
}

pub fn decode_sequence(bytes: &[u8]) -> Result<PointCloudSequence> {
    let mut r = Reader::new(bytes);
    r.magic(SEQUENCE_MAGIC)?;
    let n_f = r.u32()?;
    let rate = r.f64()?;
    let flags = r.u32()?;
    if flags & !(FLAG_SUBJECT | FLAG_LABEL) != 0 {
        return Err(FormatError::MalformedHeader(format!("unknown flag bits {flags:#x}")).into());
    }
    let subject = if flags & FLAG_SUBJECT != 0 { Some(r.u32()?) } else { None };
    let label = if flags & FLAG_LABEL != 0 { Some(r.u32()?) } else { None };
    let mut frames = Vec::new();
    for _ in 0..n_f {
        let index = r.u32()?;
        let count = r.u32()? as usize;
        let xyz = r.f64s(count * 3)?;
        frames.push(Frame::new(index, xyz.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect()));
    }
    r.finish()?;
    Ok(PointCloudSequence::new(frames, rate)?.with_tags(subject, label))
}

pub fn save_sequence(seq: &PointCloudSequence, path: &Path) -> Result<()> {
    write_file(path, &encode_sequence(seq)?)
}

/// Loads a native sequence file, or a directory of 16-bit PGM depth frames
/// with an `intrinsics.txt` sidecar.
pub fn load_sequence(path: &Path) -> Result<PointCloudSequence> {
    if path.is_dir() {
        return super::depth::load_pgm_dir(path);
    }
    decode_sequence(&fs::read(path)?)
}

/// Rows of equal-length descriptors with per-row subject and label tags.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub dim: usize,
    pub m: u32,
    pub psi: f64,
    /// Parameters the rows were computed with, as config text.
    pub echo: String,
    pub rows: Vec<DescriptorRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRow {
    pub subject: Option<u32>,
    pub label: Option<u32>,
    pub values: Vec<f64>,
}

fn tag(v: Option<u32>) -> u32 {
    v.unwrap_or(NO_TAG)
}

fn untag(v: u32) -> Option<u32> {
    (v != NO_TAG).then_some(v)
}

pub fn encode_descriptors(set: &DescriptorSet) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(DESCRIPTOR_MAGIC)
        .u32(count_u32(set.rows.len(), "row")?)
        .u32(count_u32(set.dim, "dimension")?)
        .u32(set.m)
        .f64(set.psi)
        .u32(count_u32(set.echo.len(), "echo byte")?)
        .bytes(set.echo.as_bytes());
    for row in &set.rows {
        if row.values.len() != set.dim {
            return Err(Error::data("descriptor row length differs from set dimension"));
        }
        w.u32(tag(row.subject)).u32(tag(row.label)).f64s(&row.values);
    }
    Ok(w.buf)
}

pub fn decode_descriptors(bytes: &[u8]) -> Result<DescriptorSet> {
    let mut r = Reader::new(bytes);
    r.magic(DESCRIPTOR_MAGIC)?;
    let n = r.u32()?;
    let dim = r.u32()? as usize;
    let m = r.u32()?;
    let psi = r.f64()?;
    let echo_len = r.u32()? as usize;
    let echo = String::from_utf8(r.take(echo_len)?.to_vec())
        .map_err(|_| FormatError::MalformedHeader("parameter echo is not UTF-8".into()))?;
    let mut rows = Vec::new();
    for _ in 0..n {
        let subject = untag(r.u32()?);
        let label = untag(r.u32()?);
        rows.push(DescriptorRow { subject, label, values: r.f64s(dim)? });
    }
    r.finish()?;
    Ok(DescriptorSet { dim, m, psi, echo, rows })
}

pub fn save_descriptors(set: &DescriptorSet, path: &Path) -> Result<()> {
    write_file(path, &encode_descriptors(set)?)
}

pub fn load_descriptors(path: &Path) -> Result<DescriptorSet> {
    decode_descriptors(&fs::read(path)?)
}

/// One keypoint record of a dump; `offset` indexes the descriptor block in
/// reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointRecord {
    pub frame: u32,
    pub p: Point3,
    pub r: f64,
    pub tau: u32,
    pub eta: f64,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointDump {
    pub dim: usize,
    pub subject: Option<u32>,
    pub label: Option<u32>,
    pub records: Vec<KeypointRecord>,
    pub descriptors: Vec<f64>,
}

impl KeypointDump {
    pub fn new(keypoints: &[Keypoint], descriptors: &[Vec<f64>], dim: usize) -> Result<Self> {
        if keypoints.len() != descriptors.len() || descriptors.iter().any(|d| d.len() != dim) {
            return Err(Error::data("one descriptor of the stated dimension per keypoint is required"));
        }
        let records = keypoints
            .iter()
            .enumerate()
            .map(|(i, k)| KeypointRecord {
                frame: k.t as u32,
                p: k.p,
                r: k.r,
                tau: k.tau as u32,
                eta: k.eta,
                offset: (i * dim) as u64,
            })
            .collect();
        Ok(KeypointDump { dim, subject: None, label: None, records, descriptors: descriptors.concat() })
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        let o = self.records[i].offset as usize;
        &self.descriptors[o..o + self.dim]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,x,y,z,r,tau,eta,offset\n");
        for k in &self.records {
            s.push_str(&format!("{},{},{},{},{},{},{},{}\n", k.frame, k.p.x, k.p.y, k.p.z, k.r, k.tau, k.eta, k.offset));
        }
        s
    }
}

pub fn encode_keypoints(dump: &KeypointDump) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(KEYPOINT_MAGIC)
        .u32(count_u32(dump.records.len(), "keypoint")?)
        .u32(count_u32(dump.dim, "dimension")?)
        .u32(tag(dump.subject))
        .u32(tag(dump.label));
    for k in &dump.records {
        w.u32(k.frame).f64(k.p.x).f64(k.p.y).f64(k.p.z).f64(k.r).u32(k.tau).f64(k.eta).u64(k.offset);
    }
    w.f64s(&dump.descriptors);
    Ok(w.buf)
}

pub fn decode_keypoints(bytes: &[u8]) -> Result<KeypointDump> {
    let mut r = Reader::new(bytes);
    r.magic(KEYPOINT_MAGIC)?;
    let n = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let subject = untag(r.u32()?);
    let label = untag(r.u32()?);
    let mut records = Vec::new();
    for _ in 0..n {
        let frame = r.u32()?;
        let p = Point3::new(r.f64()?, r.f64()?, r.f64()?);
        let rad = r.f64()?;
        let tau = r.u32()?;
        let eta = r.f64()?;
        let offset = r.u64()?;
        if offset as usize + dim > n * dim {
            return Err(FormatError::MalformedHeader("keypoint descriptor offset out of range".into()).into());
        }
        records.push(KeypointRecord { frame, p, r: rad, tau, eta, offset });
    }
    let descriptors = r.f64s(n * dim)?;
    r.finish()?;
    Ok(KeypointDump { dim, subject, label, records, descriptors })
}

pub fn save_keypoints(dump: &KeypointDump, path: &Path) -> Result<()> {
    write_file(path, &encode_keypoints(dump)?)
}

pub fn load_keypoints(path: &Path) -> Result<KeypointDump> {
    decode_keypoints(&fs::read(path)?)
}

pub fn encode_codebook(cb: &Codebook) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(CODEBOOK_MAGIC).u32(count_u32(cb.k(), "center")?).u32(count_u32(cb.dim, "dimension")?);
    cb.centers.iter().for_each(|c| {
        w.f64s(c);
    });
    Ok(w.buf)
}

pub fn decode_codebook(bytes: &[u8]) -> Result<Codebook> {
    let mut r = Reader::new(bytes);
    r.magic(CODEBOOK_MAGIC)?;
    let k = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let centers = (0..k).map(|_| r.f64s(dim)).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Codebook::new(centers)
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    write_file(path, &encode_codebook(cb)?)
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    decode_codebook(&fs::read(path)?)
}

pub fn encode_model(m: &ClassifierModel) -> Result<Vec<u8>> {
    let dim = m.support.first().map_or(0, Vec::len);
    let mut w = Writer::default();
    w.bytes(MODEL_MAGIC).bytes(&[m.kernel.id(), 0, 0, 0]).f64(m.c).u32(count_u32(m.dual.classes.len(), "class")?);
    m.dual.classes.iter().for_each(|c| {
        w.u32(*c);
    });
    w.u32(count_u32(m.support.len(), "support vector")?).u32(count_u32(dim, "dimension")?);
    m.support.iter().for_each(|s| {
        w.f64s(s);
    });
    m.dual.coef.iter().for_each(|c| {
        w.f64s(c);
    });
    w.f64s(&m.dual.bias);
    Ok(w.buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<ClassifierModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let kernel = KernelKind::from_id(r.u8()?).ok_or_else(|| FormatError::MalformedHeader("unknown kernel id".into()))?;
    r.take(3)?;
    let c = r.f64()?;
    let n_classes = r.u32()? as usize;
    let classes = (0..n_classes).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let n_sv = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let support = (0..n_sv).map(|_| r.f64s(dim)).collect::<Result<Vec<_>, _>>()?;
    let coef = (0..n_classes).map(|_| r.f64s(n_sv)).collect::<Result<Vec<_>, _>>()?;
    let bias = r.f64s(n_classes)?;
    r.finish()?;
    Ok(ClassifierModel { kernel, c, support, dual: DualModel { classes, coef, bias } })
}

pub fn save_model(m: &ClassifierModel, path: &Path) -> Result<()> {
    write_file(path, &encode_model(m)?)
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> PointCloudSequence {
        let frames = (1..=3)
            .map(|i| Frame::new(i, (0..i).map(|j| Point3::new(j as f64 * 0.1, -1.5, 1e-300)).collect()))
            .collect();
        PointCloudSequence::new(frames, 30.0).unwrap().with_tags(Some(4), None)
    }

    #[test]
    fn sequence_round_trip() {
        let s = seq();
        let back = decode_sequence(&encode_sequence(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_sequence(&seq()).unwrap();
        for cut in [bytes.len() - 1, bytes.len() - 8, 30] {
            let err = decode_sequence(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::Format(FormatError::TruncatedPayload)), "{err}");
        }
    }

    #[test]
    fn version_and_magic() {
        let mut bytes = encode_sequence(&seq()).unwrap();
        bytes[3] = b'2';
        assert!(matches!(decode_sequence(&bytes), Err(Error::Format(FormatError::VersionMismatch { .. }))));
        bytes[0] = b'X';
        assert!(matches!(decode_sequence(&bytes), Err(Error::Format(FormatError::BadMagic { .. }))));
        assert!(matches!(decode_sequence(b"HP"), Err(Error::Format(FormatError::MalformedHeader(_)))));
    }

    #[test]
    fn unknown_flags_rejected() {
        let mut bytes = encode_sequence(&seq()).unwrap();
        bytes[16] = 0x80;
        assert!(matches!(decode_sequence(&bytes), Err(Error::Format(FormatError::MalformedHeader(_)))));
    }

    #[test]
    fn codebook_round_trip() {
        let cb = Codebook::new(vec![vec![1.0, 2.0], vec![-0.5, f64::MIN_POSITIVE]]).unwrap();
        assert_eq!(decode_codebook(&encode_codebook(&cb).unwrap()).unwrap(), cb);
    }

    #[test]
    fn descriptor_round_trip() {
        let set = DescriptorSet {
            dim: 2,
            m: 20,
            psi: 5f64.sqrt() / 3.0,
            echo: "theta = 1.12\n".into(),
            rows: vec![
                DescriptorRow { subject: Some(1), label: None, values: vec![0.25, 0.75] },
                DescriptorRow { subject: None, label: Some(3), values: vec![1.0, 0.0] },
            ],
        };
        assert_eq!(decode_descriptors(&encode_descriptors(&set).unwrap()).unwrap(), set);
    }

    #[test]
    fn model_round_trip() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.4]];
        let m = crate::learn::svm_train(&xs, &[0, 1, 0], 1.0, KernelKind::HistogramIntersection).unwrap();
        assert_eq!(decode_model(&encode_model(&m).unwrap()).unwrap(), m);
    }
}
