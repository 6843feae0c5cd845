//! File formats: PR2D raw float arrays, PGM/PBM images, key-value sidecars.
//!
//! PR2D layout: a 32-byte ASCII header `PR2D <N> <kind> <dc>` padded with
//! spaces and terminated by `\n`, followed by `N²` little-endian `f64`
//! values in row-major order (`2N²` interleaved re/im pairs for `field`).
//! Unmeasured pattern samples are stored as NaN.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{shift_dc_to_center, shift_dc_to_corner, ComplexField, GridGeometry, RealImage};
use crate::pattern::{MeasuredPattern, PatternKind};

pub const PR2D_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pr2dKind {
    Diffraction,
    Hologram,
    Field,
}

impl Pr2dKind {
    pub fn name(self) -> &'static str {
        match self {
            Pr2dKind::Diffraction => "diffraction",
            Pr2dKind::Hologram => "hologram",
            Pr2dKind::Field => "field",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "diffraction" => Some(Pr2dKind::Diffraction),
            "hologram" => Some(Pr2dKind::Hologram),
            "field" => Some(Pr2dKind::Field),
            _ => None,
        }
    }
}

impl From<PatternKind> for Pr2dKind {
    fn from(k: PatternKind) -> Self {
        match k {
            PatternKind::Diffraction => Pr2dKind::Diffraction,
            PatternKind::Hologram => Pr2dKind::Hologram,
        }
    }
}

/// Where the zero-frequency sample sits in the stored array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcOrigin {
    Corner,
    Center,
}

impl DcOrigin {
    pub fn name(self) -> &'static str {
        match self {
            DcOrigin::Corner => "corner",
            DcOrigin::Center => "center",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.strip_prefix("dc:").unwrap_or(s) {
            "corner" => Some(DcOrigin::Corner),
            "center" => Some(DcOrigin::Center),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pr2dHeader {
    pub n: usize,
    pub kind: Pr2dKind,
    pub dc: DcOrigin,
}

impl Pr2dHeader {
    pub fn encode(&self) -> Result<[u8; PR2D_HEADER_LEN]> {
        let text = format!("PR2D {} {} {}", self.n, self.kind.name(), self.dc.name());
        if text.len() >= PR2D_HEADER_LEN {
            return Err(Error::Format(format!("header for N = {} does not fit", self.n)));
        }
        let mut out = [b' '; PR2D_HEADER_LEN];
        out[..text.len()].copy_from_slice(text.as_bytes());
        out[PR2D_HEADER_LEN - 1] = b'\n';
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PR2D_HEADER_LEN || bytes[PR2D_HEADER_LEN - 1] != b'\n' {
            return Err(Error::Format("truncated PR2D header".into()));
        }
        let text = std::str::from_utf8(&bytes[..PR2D_HEADER_LEN - 1])
            .map_err(|_| Error::Format("PR2D header is not ASCII".into()))?;
        let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
        let bad = || Error::Format(format!("bad PR2D header {:?}", text.trim_end()));
        if tokens.len() != 4 || tokens[0] != "PR2D" {
            return Err(bad());
        }
        let n: usize = tokens[1].parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        Ok(Self {
            n,
            kind: Pr2dKind::parse(tokens[2]).ok_or_else(bad)?,
            dc: DcOrigin::parse(tokens[3]).ok_or_else(bad)?,
        })
    }

    fn value_count(&self) -> usize {
        let samples = self.n * self.n;
        match self.kind {
            Pr2dKind::Field => 2 * samples,
            _ => samples,
        }
    }
}

/// Raw PR2D contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Pr2d {
    pub header: Pr2dHeader,
    pub values: Vec<f64>,
}

impl Pr2d {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.values.len() != self.header.value_count() {
            return Err(Error::Dimension(format!(
                "{} values for header {:?}",
                self.values.len(),
                self.header
            )));
        }
        let mut out = Vec::with_capacity(PR2D_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(&self.header.encode()?);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Pr2dHeader::decode(bytes)?;
        let body = &bytes[PR2D_HEADER_LEN..];
        if body.len() != 8 * header.value_count() {
            return Err(Error::Format(format!(
                "PR2D body has {} bytes, expected {}",
                body.len(),
                8 * header.value_count()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self { header, values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// Diffraction patterns are written DC-at-corner, holograms in detector
/// order (tagged `center`).
pub fn pattern_to_pr2d(pattern: &MeasuredPattern) -> Pr2d {
    let values = pattern
        .amplitude()
        .iter()
        .zip(pattern.mask())
        .map(|(&a, &m)| if m { a } else { f64::NAN })
        .collect();
    let dc = match pattern.kind() {
        PatternKind::Diffraction => DcOrigin::Corner,
        PatternKind::Hologram => DcOrigin::Center,
    };
    Pr2d {
        header: Pr2dHeader {
            n: pattern.side(),
            kind: pattern.kind().into(),
            dc,
        },
        values,
    }
}

/// Rebuilds a pattern; a diffraction pattern stored DC-centred is shifted
/// back to corner order.
pub fn pr2d_to_pattern(file: &Pr2d, geometry: GridGeometry) -> Result<MeasuredPattern> {
    let kind = match file.header.kind {
        Pr2dKind::Diffraction => PatternKind::Diffraction,
        Pr2dKind::Hologram => PatternKind::Hologram,
        Pr2dKind::Field => {
            return Err(Error::Format("expected a pattern, found a complex field".into()))
        }
    };
    let n = file.header.n;
    let mut values = file.values.clone();
    if kind == PatternKind::Diffraction && file.header.dc == DcOrigin::Center {
        let shifted = shift_dc_to_corner(&ComplexField::from_vec_unchecked(
            n,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        ))?;
        values = shifted.as_slice().iter().map(|c| c.re).collect();
    }
    let mask: Vec<bool> = values.iter().map(|v| !v.is_nan()).collect();
    let amplitude: Vec<f64> = values.iter().map(|&v| if v.is_nan() { 0.0 } else { v }).collect();
    if amplitude.iter().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(Error::Format("pattern amplitudes must be finite and non-negative".into()));
    }
    MeasuredPattern::new(RealImage::new_unchecked(n, amplitude), mask, geometry, kind)
}

pub fn write_pattern(path: &Path, pattern: &MeasuredPattern) -> Result<()> {
    pattern_to_pr2d(pattern).write(path)
}

pub fn read_pattern(path: &Path, geometry: GridGeometry) -> Result<MeasuredPattern> {
    pr2d_to_pattern(&Pr2d::read(path)?, geometry)
}

pub fn field_to_pr2d(field: &ComplexField, dc: DcOrigin) -> Result<Pr2d> {
    let data = match dc {
        DcOrigin::Corner => field.clone(),
        DcOrigin::Center => shift_dc_to_center(field)?,
    };
    Ok(Pr2d {
        header: Pr2dHeader {
            n: field.side(),
            kind: Pr2dKind::Field,
            dc,
        },
        values: data.as_slice().iter().flat_map(|c| [c.re, c.im]).collect(),
    })
}

/// Returns the field in DC-at-corner order.
pub fn pr2d_to_field(file: &Pr2d) -> Result<ComplexField> {
    if file.header.kind != Pr2dKind::Field {
        return Err(Error::Format(format!(
            "expected a complex field, found {}",
            file.header.kind.name()
        )));
    }
    let data = file
        .values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let field = ComplexField::from_vec(file.header.n, data)?;
    match file.header.dc {
        DcOrigin::Corner => Ok(field),
        DcOrigin::Center => shift_dc_to_corner(&field),
    }
}

// ---- netpbm ----

struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: Option<u32>,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8], with_maxval: bool) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Format("not a netpbm file".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = Vec::new();
    let wanted = if with_maxval { 3 } else { 2 };
    while fields.len() < wanted {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated netpbm header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        fields.push(
            text.parse::<u32>()
                .map_err(|_| Error::Format(format!("bad netpbm header field {text}")))?,
        );
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated netpbm header".into()));
    }
    Ok(PnmHeader {
        magic,
        width: fields[0] as usize,
        height: fields[1] as usize,
        maxval: with_maxval.then(|| fields[2]),
        data_start: pos + 1,
    })
}

/// Reads a binary (P5) PGM, 8- or 16-bit, scaled to `[0, 1]` by `maxval`.
pub fn read_pgm(path: &Path) -> Result<RealImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<RealImage> {
    let h = parse_pnm_header(bytes, true)?;
    if &h.magic != b"P5" {
        return Err(Error::Format("only binary PGM (P5) is supported".into()));
    }
    if h.width != h.height {
        return Err(Error::Dimension(format!(
            "image is {}x{}, a square image is required",
            h.width, h.height
        )));
    }
    let maxval = h.maxval.expect("maxval parsed");
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let count = h.width * h.height;
    let raster = &bytes[h.data_start..];
    let wide = maxval > 255;
    let needed = if wide { 2 * count } else { count };
    if raster.len() < needed {
        return Err(Error::Format("PGM raster is truncated".into()));
    }
    let scale = maxval as f64;
    let data = if wide {
        raster[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]).min(maxval as u16) as f64 / scale)
            .collect()
    } else {
        raster[..needed]
            .iter()
            .map(|&b| (b as u32).min(maxval) as f64 / scale)
            .collect()
    };
    RealImage::new(h.width, data)
}

/// Encodes a 16-bit PGM with linear max-normalization. Returns the bytes and
/// the scale `s` such that `value ≈ s · sample / 65535`.
pub fn encode_pgm16(image: &RealImage) -> (Vec<u8>, f64) {
    let n = image.side();
    let max = image.max();
    let mut out = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for &v in image.as_slice() {
        let q = if max > 0.0 {
            (v / max * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    (out, max)
}

/// 8-bit preview of an intensity image, `log10(1 + I/I_max·10⁶)` normalized.
/// Display only.
pub fn encode_log_preview(intensity: &RealImage) -> Vec<u8> {
    let n = intensity.side();
    let max = intensity.max();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for &v in intensity.as_slice() {
        let q = if max > 0.0 {
            ((1.0 + v / max * 1e6).log10() / 6.0 * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        out.push(q);
    }
    out
}

/// Packs a square boolean mask as a binary (P4) PBM, bit 1 = measured.
pub fn encode_pbm(mask: &[bool], n: usize) -> Result<Vec<u8>> {
    if mask.len() != n * n {
        return Err(Error::Dimension(format!("mask has {} entries for {n}x{n}", mask.len())));
    }
    let mut out = format!("P4\n{n} {n}\n").into_bytes();
    let row_bytes = n.div_ceil(8);
    for row in mask.chunks_exact(n) {
        let mut packed = vec![0u8; row_bytes];
        for (c, &m) in row.iter().enumerate() {
            if m {
                packed[c / 8] |= 0x80 >> (c % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    Ok(out)
}

pub fn decode_pbm(bytes: &[u8]) -> Result<(Vec<bool>, usize)> {
    let h = parse_pnm_header(bytes, false)?;
    if &h.magic != b"P4" {
        return Err(Error::Format("only binary PBM (P4) is supported".into()));
    }
    if h.width != h.height {
        return Err(Error::Dimension(format!("mask is {}x{}", h.width, h.height)));
    }
    let n = h.width;
    let row_bytes = n.div_ceil(8);
    let raster = &bytes[h.data_start..];
    if raster.len() < row_bytes * n {
        return Err(Error::Format("PBM raster is truncated".into()));
    }
    let mut mask = Vec::with_capacity(n * n);
    for row in raster.chunks_exact(row_bytes).take(n) {
        for c in 0..n {
            mask.push(row[c / 8] & (0x80 >> (c % 8)) != 0);
        }
    }
    Ok((mask, n))
}

pub fn read_pbm(path: &Path) -> Result<(Vec<bool>, usize)> {
    decode_pbm(&fs::read(path)?)
}

// ---- sidecars ----

/// Ordered `key = value` metadata written next to an output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sidecar {
    entries: Vec<(String, String)>,
}

impl Sidecar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Standard provenance block.
    pub fn provenance(command: &str, config_hash: &str, seed: Option<u64>) -> Self {
        let mut s = Self::new();
        s.set("command", command);
        s.set("config_sha256", config_hash);
        if let Some(seed) = seed {
            s.set("seed", seed);
        }
        s.set("version", crate::VERSION);
        s
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").expect("write to string");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key = value, got {line:?}")))?;
            s.set(k.trim(), v.trim());
        }
        Ok(s)
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".meta");
        output.with_file_name(name)
    }

    pub fn write_for(&self, output: &Path) -> Result<()> {
        fs::write(Self::path_for(output), self.render())?;
        Ok(())
    }

    pub fn read_for(output: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(Self::path_for(output))?)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("write to string");
        s
    })
}

/// Writes `bytes` to `path` and the sidecar next to it.
pub fn write_with_sidecar(path: &Path, bytes: &[u8], sidecar: &Sidecar) -> Result<()> {
    fs::write(path, bytes)?;
    sidecar.write_for(path)
}
