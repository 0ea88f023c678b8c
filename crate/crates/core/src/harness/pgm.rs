//! Binary 8-bit PGM (P5) reading and writing.

use std::fs;
use std::path::Path;

use crate::semantics::GrayImage;
use crate::{Error, Result};

pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn save_image(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

struct Header<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.buf.get(self.at) {
            if c == b'#' {
                while self.buf.get(self.at).is_some_and(|&c| c != b'\n') {
                    self.at += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.at += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.at;
        while self.buf.get(self.at).is_some_and(u8::is_ascii_digit) {
            self.at += 1;
        }
        std::str::from_utf8(&self.buf[start..self.at])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("missing or invalid {what}")))
    }
}

pub fn parse_pgm(buf: &[u8]) -> Result<GrayImage> {
    let magic = buf.get(..2).unwrap_or(buf);
    if magic != b"P5" {
        return Err(Error::UnsupportedMagic(
            String::from_utf8_lossy(magic).into_owned(),
        ));
    }
    let mut h = Header { buf, at: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if !buf.get(h.at).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::MalformedHeader(
            "expected whitespace after maxval".into(),
        ));
    }
    let payload = &buf[h.at + 1..];
    let expected = width * height;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    GrayImage::new(width, height, payload[..expected].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let img = parse_pgm(b"P5\n2 2\n255\n\x00\x80\xff\x40").unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 128, 255, 64]);
    }

    #[test]
    fn comments_in_header() {
        let img = parse_pgm(b"P5 # made by hand\n2 # w\n1\n255\n\x01\x02").unwrap();
        assert_eq!(img.pixels(), &[1, 2]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            parse_pgm(b"P2\n1 1\n255\n0"),
            Err(Error::UnsupportedMagic(_))
        ));
        assert!(matches!(
            parse_pgm(b"P5\n1 1\n65535\n\0\0"),
            Err(Error::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            parse_pgm(b"P5\nx 1\n255\n\0"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_pgm(b"P5\n3 3\n255\n\0\0"),
            Err(Error::TruncatedPayload {
                expected: 9,
                found: 2
            })
        ));
    }

    #[test]
    fn roundtrip() {
        let img = GrayImage::new(3, 2, vec![9, 8, 7, 6, 5, 4]).unwrap();
        assert_eq!(parse_pgm(&encode_pgm(&img)).unwrap(), img);
    }
}
