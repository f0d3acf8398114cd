//! Binary greyscale PGM (P5) with 8-bit samples.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::restoration::ImageGray;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
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
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::Parse {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<ImageGray> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(Error::Parse {
            offset: 0,
            reason: "missing P5 magic".into(),
        });
    }
    let mut c = Cursor { data, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            offset: c.pos,
            reason: "zero image dimension".into(),
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse {
            offset: c.pos,
            reason: format!("maxval {maxval} is not an 8-bit range"),
        });
    }
    if c.pos >= data.len() || !data[c.pos].is_ascii_whitespace() {
        return Err(Error::Parse {
            offset: c.pos,
            reason: "expected whitespace before the raster".into(),
        });
    }
    let start = c.pos + 1;
    let needed = width * height;
    if data.len() - start < needed {
        return Err(Error::Parse {
            offset: data.len(),
            reason: format!("raster truncated: {} of {needed} bytes", data.len() - start),
        });
    }
    let pixels = data[start..start + needed]
        .iter()
        .map(|&b| (b as f64 / maxval as f64).min(1.0))
        .collect();
    ImageGray::new(width, height, pixels)
}

/// Clamps to `[0, 1]` and rounds to 8 bits.
pub fn encode_pgm(image: &ImageGray) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ImageGray> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&data)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &ImageGray) -> Result<()> {
    write_atomic(path, &encode_pgm(image))
}

/// A mask image: nonzero pixels are set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let img = read_pgm(path)?;
    Ok((img.width, img.height, img.pixels.iter().map(|&p| p > 0.0).collect()))
}
