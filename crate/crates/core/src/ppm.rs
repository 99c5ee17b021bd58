//! Binary PPM (P6, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_interleaved());
    out
}

pub fn save_ppm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, &path.display().to_string())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.context, self.pos, msg)
    }

    fn skip_space_and_comments(&mut self) {
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
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {}", what)));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(self.context, start, format!("{} out of range", what)))
    }
}

pub fn decode_ppm(bytes: &[u8], context: &str) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0, context };
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(cur.err("missing P6 magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::parse(context, maxval_at, format!("maxval {} unsupported (only 255)", maxval)));
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image extent"));
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace before raster")),
    }
    let need = 3 * width * height;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(Error::parse(
            context,
            bytes.len(),
            format!("truncated raster: {} of {} bytes", payload.len(), need),
        ));
    }
    Image::from_interleaved(width, height, &payload[..need])
}
