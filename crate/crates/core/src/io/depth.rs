//! Depth images to pointclouds: pinhole back-projection, 16-bit PGM frame
//! directories and an MSRAction3D-style binary adapter.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::{Frame, Point3, PointCloudSequence};

/// Name of the intrinsics file expected next to depth frames.
pub const INTRINSICS_FILE: &str = "intrinsics.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Scene units per raw depth value.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.fx) && ok(self.fy) && ok(self.depth_scale) && self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    /// Parses `key = value` lines with keys `fx fy cx cy depth_scale` and an
    /// optional `frame_rate`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<(Self, Option<f64>)> {
        let (mut fx, mut fy, mut cx, mut cy, mut scale, mut rate) = (None, None, None, None, None, None);
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::config(format!("intrinsics line {}: expected key = value", n + 1)))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::config(format!("intrinsics line {}: bad number", n + 1)))?;
            let slot = match k.trim() {
                "fx" => &mut fx,
                "fy" => &mut fy,
                "cx" => &mut cx,
                "cy" => &mut cy,
                "depth_scale" => &mut scale,
                "frame_rate" => &mut rate,
                other => return Err(Error::config(format!("unknown intrinsics key {other:?}"))),
            };
            *slot = Some(v);
        }
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| Error::config(format!("intrinsics missing {k}")));
        let intr = CameraIntrinsics {
            fx: need(fx, "fx")?,
            fy: need(fy, "fy")?,
            cx: need(cx, "cx")?,
            cy: need(cy, "cy")?,
            depth_scale: need(scale, "depth_scale")?,
        };
        intr.validate()?;
        Ok((intr, rate))
    }

    pub fn to_text(&self, frame_rate: Option<f64>) -> String {
        let mut s = format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\ndepth_scale = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.depth_scale
        );
        if let Some(r) = frame_rate {
            s.push_str(&format!("frame_rate = {r}\n"));
        }
        s
    }
}

/// Back-projects every pixel with a positive raw depth. Pixels are row-major,
/// `u` the column and `v` the row.
pub fn depth_to_cloud(depth: &[u32], width: usize, height: usize, intr: &CameraIntrinsics, index: u32) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(Error::data("depth image needs positive dimensions"));
    }
    if depth.len() != width * height {
        return Err(Error::data(format!("depth buffer has {} values, expected {}x{}", depth.len(), width, height)));
    }
    intr.validate()?;
    let mut points = Vec::new();
    for (i, &d) in depth.iter().enumerate() {
        if d == 0 {
            continue;
        }
        let (u, v) = ((i % width) as f64, (i / width) as f64);
        let z = d as f64 * intr.depth_scale;
        points.push(Point3::new((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z));
    }
    Ok(Frame::new(index, points))
}

/// A decoded 16-bit (or 8-bit) greyscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u32>,
}

fn pgm_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::data("PGM header truncated")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::data("malformed PGM header"))
}

/// Decodes binary PGM (`P5`). Samples above 8 bits are big-endian.
pub fn decode_pgm(bytes: &[u8]) -> Result<DepthImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::data("not a binary PGM (P5) image"));
    }
    let mut pos = 2;
    let width = pgm_token(bytes, &mut pos)?;
    let height = pgm_token(bytes, &mut pos)?;
    let maxval = pgm_token(bytes, &mut pos)?;
    if !(1..=65535).contains(&maxval) || width == 0 || height == 0 {
        return Err(Error::data("PGM dimensions or maxval out of range"));
    }
    pos += 1;
    let bps = if maxval > 255 { 2 } else { 1 };
    let body = bytes.get(pos..pos + width * height * bps).ok_or_else(|| Error::data("PGM pixel data truncated"))?;
    let data = if bps == 2 {
        body.chunks_exact(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))).collect()
    } else {
        body.iter().map(|&b| u32::from(b)).collect()
    };
    Ok(DepthImage { width, height, data })
}

pub fn encode_pgm16(img: &DepthImage) -> Result<Vec<u8>> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for &d in &img.data {
        let v = u16::try_from(d).map_err(|_| Error::data(format!("depth {d} exceeds 16 bits")))?;
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn read_intrinsics(dir: &Path) -> Result<(CameraIntrinsics, Option<f64>)> {
    let path = dir.join(INTRINSICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    CameraIntrinsics::parse(&text)
}

/// Loads every `*.pgm` in `dir` (sorted by file name) as frames 1..n,
/// back-projected with the `intrinsics.txt` sidecar. Frame rate defaults to
/// 30 when the sidecar omits it.
pub fn load_pgm_dir(dir: &Path) -> Result<PointCloudSequence> {
    let (intr, rate) = read_intrinsics(dir)?;
    let files = sorted_files(dir, "pgm")?;
    if files.is_empty() {
        return Err(Error::data(format!("no .pgm frames in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let img = decode_pgm(&fs::read(f)?)?;
        frames.push(depth_to_cloud(&img.data, img.width, img.height, &intr, i as u32 + 1)?);
    }
    PointCloudSequence::new(frames, rate.unwrap_or(30.0))
}

/// Writes depth frames plus the intrinsics sidecar in the layout
/// [`load_pgm_dir`] reads.
pub fn save_pgm_dir(dir: &Path, images: &[DepthImage], intr: &CameraIntrinsics, frame_rate: Option<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, img) in images.iter().enumerate() {
        fs::write(dir.join(format!("frame_{:05}.pgm", i + 1)), encode_pgm16(img)?)?;
    }
    fs::write(dir.join(INTRINSICS_FILE), intr.to_text(frame_rate))?;
    Ok(())
}

/// Decodes one MSRAction3D depth binary: little-endian i32 header
/// `(frames, width, height)` followed by row-major i32 depths per frame.
pub fn decode_msr_depth(bytes: &[u8]) -> Result<Vec<DepthImage>> {
    let mut r = super::format::Reader::new(bytes);
    let n = r.i32()?;
    let w = r.i32()?;
    let h = r.i32()?;
    if n <= 0 || w <= 0 || h <= 0 {
        return Err(Error::data(format!("bad MSR depth header ({n}, {w}, {h})")));
    }
    let (n, w, h) = (n as usize, w as usize, h as usize);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let data = (0..w * h).map(|_| r.i32().map(|d| d.max(0) as u32)).collect::<Result<Vec<_>, _>>()?;
        out.push(DepthImage { width: w, height: h, data });
    }
    Ok(out)
}

/// Parses `aXX_sYY_eZZ` file stems into (action, subject).
pub fn msr_tags(stem: &str) -> Option<(u32, u32)> {
    let mut parts = stem.split('_');
    let a = parts.next()?.strip_prefix('a')?.parse().ok()?;
    let s = parts.next()?.strip_prefix('s')?.parse().ok()?;
    Some((a, s))
}

/// Loads every `*.bin` sequence of an MSRAction3D-style directory, tagged
/// with action and subject from the file names. The directory must hold an
/// `intrinsics.txt` sidecar.
pub fn load_msr_dir(dir: &Path) -> Result<Vec<PointCloudSequence>> {
    let (intr, rate) = read_intrinsics(dir)?;
    let files = sorted_files(dir, "bin")?;
    if files.is_empty() {
        return Err(Error::data(format!("no .bin sequences in {}", dir.display())));
    }
    let mut out = Vec::new();
    for f in files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (action, subject) =
            msr_tags(stem).ok_or_else(|| Error::data(format!("cannot parse action/subject from {}", f.display())))?;
        let frames = decode_msr_depth(&fs::read(&f)?)?
            .iter()
            .enumerate()
            .map(|(i, img)| depth_to_cloud(&img.data, img.width, img.height, &intr, i as u32 + 1))
            .collect::<Result<Vec<_>>>()?;
        out.push(PointCloudSequence::new(frames, rate.unwrap_or(15.0))?.with_tags(Some(subject), Some(action)));
    }
    Ok(out)
}
