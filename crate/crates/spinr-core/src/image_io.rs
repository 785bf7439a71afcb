//! Binary PPM (P6) reading and writing.
//!
//! P6 is the interchange format for every raster the tools touch: inputs,
//! rendered reconstructions, and stage snapshots. The writer emits a
//! canonical header (`P6\n<w> <h>\n255\n`), so save -> load -> save is
//! byte-identical. The reader accepts the full P6 grammar, including
//! `#` comments and arbitrary header whitespace, and every parse error
//! reports the byte offset at which the file stopped making sense.

use std::path::Path;

use crate::error::ImageIoError;
use crate::image::Image;

/// Parse a P6 image from raw file bytes.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, ImageIoError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        if bytes.first() == Some(&b'P') {
            // Another PNM flavor (P1-P5); recognized but not supported.
            return Err(ImageIoError::UnsupportedFormat);
        }
        return Err(ImageIoError::BadHeader { offset: 0, what: "missing P6 magic" });
    }
    cur.pos = 2;
    let width = cur.read_uint()? as usize;
    let height = cur.read_uint()? as usize;
    let maxval = cur.read_uint()?;
    if maxval != 255 {
        return Err(ImageIoError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageIoError::BadHeader { offset: cur.pos, what: "zero dimension" });
    }
    // Exactly one whitespace byte separates the header from the payload.
    match cur.buf.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => {
            return Err(ImageIoError::BadHeader {
                offset: cur.pos,
                what: "expected single whitespace before payload",
            })
        }
        None => return Err(ImageIoError::BadHeader { offset: cur.pos, what: "unexpected end of file" }),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or(ImageIoError::BadHeader { offset: cur.pos, what: "dimensions overflow" })?;
    let payload = &cur.buf[cur.pos..];
    if payload.len() < expected {
        return Err(ImageIoError::TruncatedPayload {
            offset: cur.buf.len(),
            expected,
        });
    }
    Ok(Image::from_bytes(height, width, &payload[..expected]))
}

/// Serialize to canonical P6 bytes.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixel_count() * 3);
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.to_bytes());
    out
}

/// Read a P6 file from disk.
pub fn load_ppm(path: &Path) -> Result<Image, ImageIoError> {
    let bytes = std::fs::read(path)?;
    decode_ppm(&bytes)
}

/// Write a P6 file to disk.
pub fn save_ppm(path: &Path, img: &Image) -> Result<(), ImageIoError> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skip whitespace and `#`-to-end-of-line comments.
    fn skip_separators(&mut self) {
        loop {
            match self.buf.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.buf.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn read_uint(&mut self) -> Result<u32, ImageIoError> {
        self.skip_separators();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.buf.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(ImageIoError::BadHeader { offset: start, what: "number out of range" });
            }
            self.pos += 1;
        }
        if self.pos == start {
            let what = if self.pos >= self.buf.len() {
                "unexpected end of file"
            } else {
                "expected decimal integer"
            };
            return Err(ImageIoError::BadHeader { offset: self.pos, what });
        }
        Ok(value as u32)
    }
}
