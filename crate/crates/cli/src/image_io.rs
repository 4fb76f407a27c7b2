//! MRAW and binary PGM (P5) images.
//!
//! MRAW: `"MRAW" | H u32 LE | W u32 LE | H*W f32 LE`, row-major. Exact.
//! PGM: maxval 255 or 65535 only; samples map to `[0, 1]` by division on
//! read and by rounding `v * maxval` to nearest on write.

use std::fs;
use std::path::Path;

use moco_core::{Error, Image32, Result};

pub const MRAW_MAGIC: [u8; 4] = *b"MRAW";

fn format_err<T>(what: impl Into<String>, offset: usize) -> Result<T> {
    Err(Error::Format { what: what.into(), offset: offset as u64 })
}

pub fn encode_mraw(img: &Image32) -> Vec<u8> {
    let (h, w) = img.dims();
    let mut out = Vec::with_capacity(12 + 4 * h * w);
    out.extend_from_slice(&MRAW_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_mraw(bytes: &[u8]) -> Result<Image32> {
    if bytes.len() < 4 {
        return format_err("truncated magic", 0);
    }
    if bytes[..4] != MRAW_MAGIC {
        return format_err("bad magic", 0);
    }
    if bytes.len() < 12 {
        return format_err("truncated header", bytes.len());
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if h == 0 || w == 0 {
        return format_err(format!("zero dimension {h}x{w}"), 4);
    }
    let need = h.checked_mul(w).and_then(|n| n.checked_mul(4)).and_then(|n| n.checked_add(12));
    match need {
        Some(n) if bytes.len() < n => return format_err("truncated payload", bytes.len()),
        Some(n) if bytes.len() > n => return format_err("trailing bytes", n),
        None => return format_err(format!("dimension overflow {h}x{w}"), 4),
        _ => {}
    }
    let data: Vec<f32> = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return format_err("non-finite pixel", 12 + 4 * i);
    }
    Image32::new(h, w, data)
}

pub fn read_mraw(path: impl AsRef<Path>) -> Result<Image32> {
    decode_mraw(&fs::read(path)?)
}

pub fn write_mraw(path: impl AsRef<Path>, img: &Image32) -> Result<()> {
    fs::write(path, encode_mraw(img))?;
    Ok(())
}

/// Reads whitespace-separated header tokens, skipping `#` comments.
struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmHeader<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return format_err(format!("expected {what}"), start);
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| format_err(format!("{what} out of range"), start), Ok)
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image32> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return format_err("bad magic", 0);
    }
    let mut hdr = PgmHeader { bytes, pos: 2 };
    let w = hdr.number("width")?;
    let h = hdr.number("height")?;
    let maxval_at = {
        hdr.skip_space();
        hdr.pos
    };
    let maxval = hdr.number("maxval")?;
    if maxval != 255 && maxval != 65535 {
        return format_err(format!("unsupported maxval {maxval}"), maxval_at);
    }
    if hdr.pos >= bytes.len() || !bytes[hdr.pos].is_ascii_whitespace() {
        return format_err("expected whitespace after maxval", hdr.pos);
    }
    let start = hdr.pos + 1;
    if w == 0 || h == 0 {
        return format_err(format!("zero dimension {h}x{w}"), 2);
    }
    let sample = if maxval == 255 { 1 } else { 2 };
    let need = start + h * w * sample;
    if bytes.len() < need {
        return format_err("truncated payload", bytes.len());
    }
    let m = maxval as f32;
    let data: Vec<f32> = if sample == 1 {
        bytes[start..need].iter().map(|&b| b as f32 / m).collect()
    } else {
        bytes[start..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / m).collect()
    };
    Image32::new(h, w, data)
}

pub fn encode_pgm(img: &Image32, maxval: u16) -> Result<Vec<u8>> {
    if maxval != 255 && maxval != 65535 {
        return Err(Error::InvalidArgument { op: "write_pgm", detail: format!("maxval must be 255 or 65535, got {maxval}") });
    }
    let (h, w) = img.dims();
    let mut out = format!("P5\n{w} {h}\n{maxval}\n").into_bytes();
    let m = maxval as f32;
    for &v in img.data() {
        let q = (v * m).round().clamp(0.0, m) as u16;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image32> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Image32, maxval: u16) -> Result<()> {
    fs::write(path, encode_pgm(img, maxval)?)?;
    Ok(())
}

/// Reads `.mraw` or `.pgm` by extension.
pub fn read_image(path: &Path) -> Result<Image32> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mraw") => read_mraw(path),
        Some("pgm") => read_pgm(path),
        _ => Err(Error::InvalidArgument { op: "read_image", detail: format!("unknown image extension: {}", path.display()) }),
    }
}

pub fn is_image(path: &Path) -> bool {
    path.is_file() && matches!(path.extension().and_then(|e| e.to_str()), Some("mraw" | "pgm"))
}
