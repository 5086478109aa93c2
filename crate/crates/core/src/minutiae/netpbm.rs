//! PBM (P1, P4) and PGM (P2, P5) decoding into binary images.
//!
//! PBM stores 1 for black, which is taken as ridge. PGM samples darker than
//! half the maximum value (128 of 255) are ridge.

use super::image::BinaryImage;
use crate::error::{Error, Result};

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Image(msg.into()))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return err(format!("missing or invalid {what} in header"));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| err(format!("{what} out of range")), Ok)
    }

    /// The single whitespace byte separating a binary header from its raster.
    fn raster_separator(&mut self) -> Result<()> {
        match self.data.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => err("truncated header"),
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.data[self.pos.min(self.data.len())..]
    }
}

pub fn decode(data: &[u8]) -> Result<BinaryImage> {
    if data.len() < 2 || data[0] != b'P' {
        return err("not a netpbm file");
    }
    let magic = data[1];
    if !matches!(magic, b'1' | b'2' | b'4' | b'5') {
        return err(format!(
            "unsupported format P{}",
            char::from(magic).escape_default()
        ));
    }
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.header_uint("width")?;
    let height = cur.header_uint("height")?;
    let count = width
        .checked_mul(height)
        .filter(|&c| c <= 1 << 30)
        .map_or_else(|| err("image dimensions too large"), Ok)?;

    let pixels = match magic {
        b'1' => {
            let mut pixels = Vec::with_capacity(count);
            for &b in cur.rest() {
                match b {
                    b'0' => pixels.push(0),
                    b'1' => pixels.push(1),
                    b'#' => return err("comments inside P1 raster are not supported"),
                    _ if b.is_ascii_whitespace() => {}
                    _ => return err(format!("invalid P1 sample byte 0x{b:02x}")),
                }
                if pixels.len() == count {
                    break;
                }
            }
            if pixels.len() < count {
                return err("truncated P1 raster");
            }
            pixels
        }
        b'4' => {
            cur.raster_separator()?;
            let row_bytes = width.div_ceil(8);
            let raster = cur.rest();
            if raster.len() < row_bytes * height {
                return err("truncated P4 raster");
            }
            let mut pixels = Vec::with_capacity(count);
            for row in raster.chunks(row_bytes).take(height) {
                for x in 0..width {
                    pixels.push((row[x / 8] >> (7 - x % 8)) & 1);
                }
            }
            pixels
        }
        _ => {
            let maxval = cur.header_uint("maxval")?;
            if maxval == 0 || maxval > 65535 {
                return err(format!("invalid maxval {maxval}"));
            }
            let threshold = maxval.div_ceil(2);
            let ridge = |v: usize| -> Result<u8> {
                if v > maxval {
                    return err(format!("sample {v} exceeds maxval {maxval}"));
                }
                Ok((v < threshold) as u8)
            };
            if magic == b'2' {
                let text = std::str::from_utf8(cur.rest())
                    .map_or_else(|_| err("P2 raster is not ASCII"), Ok)?;
                let mut pixels = Vec::with_capacity(count);
                for tok in text.split_ascii_whitespace().take(count) {
                    let v: usize = tok
                        .parse()
                        .map_or_else(|_| err(format!("invalid P2 sample {tok:?}")), Ok)?;
                    pixels.push(ridge(v)?);
                }
                if pixels.len() < count {
                    return err("truncated P2 raster");
                }
                pixels
            } else {
                cur.raster_separator()?;
                let raster = cur.rest();
                let sample_bytes = if maxval > 255 { 2 } else { 1 };
                if raster.len() < count * sample_bytes {
                    return err("truncated P5 raster");
                }
                raster
                    .chunks(sample_bytes)
                    .take(count)
                    .map(|s| {
                        let v = if sample_bytes == 2 {
                            u16::from_be_bytes([s[0], s[1]]) as usize
                        } else {
                            s[0] as usize
                        };
                        ridge(v)
                    })
                    .collect::<Result<Vec<u8>>>()?
            }
        }
    };
    BinaryImage::from_pixels(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_pbm() {
        let img = decode(b"P1\n3 3\n0 0 0\n0 0 0\n0 0 0\n").unwrap();
        assert_eq!((img.width(), img.height()), (3, 3));
        assert_eq!(img.count_ridge(), 0);

        let img = decode(b"P1\n# comment\n4 2\n1001\n0110").unwrap();
        assert_eq!(img.pixels(), &[1, 0, 0, 1, 0, 1, 1, 0]);
        assert_eq!(decode(&img.to_pbm()).unwrap(), img);
    }

    #[test]
    fn raw_pbm_rows_are_padded() {
        let img = decode(&[b'P', b'4', b'\n', b'1', b'0', b' ', b'2', b'\n', 0b1000_0000, 0b0100_0000, 0b0000_0001, 0b1100_0000])
            .unwrap();
        assert_eq!(img.get(0, 0), 1);
        assert_eq!(img.get(9, 0), 1);
        assert_eq!(img.get(7, 1), 1);
        assert_eq!(img.get(8, 1), 1);
        assert_eq!(img.get(9, 1), 1);
        assert_eq!(img.count_ridge(), 5);
    }

    #[test]
    fn pgm_dark_is_ridge() {
        let mut p5 = b"P5\n2 2\n255\n".to_vec();
        p5.extend([0, 0, 0, 0]);
        assert_eq!(decode(&p5).unwrap().count_ridge(), 4);

        let img = decode(b"P2\n4 1\n255\n0 127 128 255\n").unwrap();
        assert_eq!(img.pixels(), &[1, 1, 0, 0]);

        let mut wide = b"P5\n2 1\n65535\n".to_vec();
        wide.extend([0x00, 0x10, 0xff, 0xff]);
        assert_eq!(decode(&wide).unwrap().pixels(), &[1, 0]);
    }

    #[test]
    fn format_errors() {
        for bad in [
            &b"P7\n1 1\n"[..],
            b"",
            b"GIF89a",
            b"P1\n3 3\n0 0 0",
            b"P4\n8 2\n\x00",
            b"P5\n2 2\n255\n\x00\x00\x00",
            b"P2\n2 1\n255\n0 300\n",
            b"P5\n2 x\n255\n",
            b"P2\n1 1\n0\n0\n",
        ] {
            assert!(matches!(decode(bad), Err(Error::Image(_))), "{bad:?}");
        }
    }
}
