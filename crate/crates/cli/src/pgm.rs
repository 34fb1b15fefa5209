//! Binary PGM (P5) images, 8 or 16 bits per sample.
//!
//! Samples above 255 take two bytes, most significant first.

use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("ASCII PGM (P2) is not supported, convert the image to binary P5")]
    Ascii,
    #[error("not a binary PGM: magic number {found:?} at byte 0")]
    Magic { found: String },
    #[error("malformed PGM header at byte {offset}: {detail}")]
    Header { offset: usize, detail: String },
    #[error("PGM raster truncated at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {value} at index {index} exceeds maxval {maxval}")]
    Sample {
        index: usize,
        value: u16,
        maxval: u16,
    },
}

/// Raw samples, row by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn bytes_per_sample(&self) -> usize {
        if self.maxval > 255 {
            2
        } else {
            1
        }
    }

    /// Gray levels rescaled to `[0, 255]` whatever the depth.
    pub fn to_gray(&self) -> Vec<f64> {
        let s = 255.0 / f64::from(self.maxval);
        self.samples.iter().map(|v| f64::from(*v) * s).collect()
    }

    /// Rounds `values` mapped linearly from `[lo, hi]` onto `[0, maxval]`,
    /// clamping outside the range; a flat range maps to mid-gray.
    pub fn quantize(
        width: usize,
        height: usize,
        values: &[f64],
        lo: f64,
        hi: f64,
        maxval: u16,
    ) -> Self {
        let top = f64::from(maxval);
        let samples = values
            .iter()
            .map(|v| {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                (t.clamp(0.0, 1.0) * top).round() as u16
            })
            .collect();
        Self {
            width,
            height,
            maxval,
            samples,
        }
    }
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

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            let detail = match self.bytes.get(self.pos) {
                None => format!("missing {what}"),
                Some(b) => format!("expected {what}, found byte 0x{b:02x}"),
            };
            return Err(PgmError::Header {
                offset: self.pos,
                detail,
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ASCII digits")
            .parse()
            .map_err(|_| PgmError::Header {
                offset: start,
                detail: format!("{what} is out of range"),
            })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pgm, PgmError> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err(PgmError::Ascii),
        other => {
            return Err(PgmError::Magic {
                found: String::from_utf8_lossy(other.unwrap_or(bytes)).into_owned(),
            })
        }
    }
    let mut c = Cursor { bytes, pos: 2 };
    if !c
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(PgmError::Header {
            offset: 2,
            detail: "expected whitespace after the magic number".into(),
        });
    }
    let width = c.number("width")? as usize;
    let height = c.number("height")? as usize;
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::Header {
            offset: maxval_at,
            detail: format!("empty image {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::Header {
            offset: maxval_at,
            detail: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    match c.bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => {
            return Err(PgmError::Header {
                offset: c.pos,
                detail: "expected one whitespace byte before the raster".into(),
            })
        }
    }
    let maxval = maxval as u16;
    let bps = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bps;
    let raster = &bytes[c.pos..];
    if raster.len() < expected {
        return Err(PgmError::Truncated {
            offset: c.pos,
            expected,
            found: raster.len(),
        });
    }
    let samples: Vec<u16> = if bps == 1 {
        raster[..expected].iter().map(|b| u16::from(*b)).collect()
    } else {
        raster[..expected]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect()
    };
    if let Some(index) = samples.iter().position(|v| *v > maxval) {
        return Err(PgmError::Sample {
            index,
            value: samples[index],
            maxval,
        });
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        samples,
    })
}

pub fn encode(img: &Pgm) -> Result<Vec<u8>, PgmError> {
    if let Some(index) = img.samples.iter().position(|v| *v > img.maxval) {
        return Err(PgmError::Sample {
            index,
            value: img.samples[index],
            maxval: img.maxval,
        });
    }
    let mut header = String::new();
    let _ = write!(header, "P5\n{} {}\n{}\n", img.width, img.height, img.maxval);
    let mut out = header.into_bytes();
    if img.bytes_per_sample() == 1 {
        out.extend(img.samples.iter().map(|v| *v as u8));
    } else {
        out.extend(img.samples.iter().flat_map(|v| v.to_be_bytes()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_is_big_endian() {
        let img = Pgm {
            width: 2,
            height: 1,
            maxval: 65535,
            samples: vec![0x0102, 0xfffe],
        };
        let bytes = encode(&img).unwrap();
        assert_eq!(bytes, b"P5\n2 1\n65535\n\x01\x02\xff\xfe");
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P5 # made by hand\n2 # width\n2\n255\n\x00\x01\x02\x03";
        let img = decode(bytes).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (2, 2, 255));
        assert_eq!(img.samples, vec![0, 1, 2, 3]);
    }

    #[test]
    fn errors_carry_offsets() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::Ascii)));
        assert!(matches!(
            decode(b"P6\n1 1\n255\n\0\0\0"),
            Err(PgmError::Magic { .. })
        ));
        match decode(b"P5\n4 x\n255\n") {
            Err(PgmError::Header { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match decode(b"P5\n2 2\n255\n\0\0") {
            Err(PgmError::Truncated {
                offset,
                expected,
                found,
            }) => assert_eq!((offset, expected, found), (11, 4, 2)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode(b"P5\n1 1\n70000\n\0\0"),
            Err(PgmError::Header { .. })
        ));
        assert!(matches!(
            decode(b"P5\n1 1\n10\n\x0b"),
            Err(PgmError::Sample { .. })
        ));
    }

    #[test]
    fn quantize_clamps_and_rescales() {
        let p = Pgm::quantize(3, 1, &[-1.0, 0.5, 9.0], 0.0, 1.0, 255);
        assert_eq!(p.samples, vec![0, 128, 255]);
        assert_eq!(Pgm::quantize(1, 1, &[3.0], 2.0, 2.0, 100).samples, vec![50]);
        let gray = Pgm {
            width: 1,
            height: 1,
            maxval: 1023,
            samples: vec![1023],
        }
        .to_gray();
        assert_eq!(gray, vec![255.0]);
    }
}
