//! Binary PPM (P6) and PGM (P5) with maxval 255.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::ImageBuffer;

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("not a binary PPM/PGM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("pixel data too short: expected {expected} bytes, found {found}")]
    ShortBody { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PpmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PpmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PpmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parses an in-memory P5/P6 file.
pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer, PpmError> {
    if bytes.len() < 2 {
        return Err(PpmError::BadMagic(String::from_utf8_lossy(bytes).into_owned()));
    }
    let channels = match &bytes[..2] {
        b"P6" => 3,
        b"P5" => 1,
        other => return Err(PpmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PpmError::MalformedHeader(format!(
            "zero-sized image {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PpmError::UnsupportedMaxval(maxval));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(PpmError::MalformedHeader(
                "expected one whitespace byte after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| PpmError::MalformedHeader("dimensions overflow".into()))?;
    let body = &bytes[cur.pos..];
    if body.len() < expected {
        return Err(PpmError::ShortBody {
            expected,
            found: body.len(),
        });
    }
    Ok(ImageBuffer::new(width, height, channels, body[..expected].to_vec())
        .expect("dimensions checked"))
}

/// Serialises as P6 (RGB) or P5 (gray).
pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer, PpmError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| PpmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_pnm(&bytes)
}

pub fn write_ppm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), PpmError> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|source| PpmError::Io {
        path: path.display().to_string(),
        source,
    })
}
