use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major binary raster; 1 is ridge, 0 is background.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

/// A binary image whose ridges are one pixel wide.
pub type SkeletonImage = BinaryImage;

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(Error::invalid("pixel values must be 0 or 1"));
        }
        Ok(BinaryImage {
            width,
            height,
            pixels,
        })
    }

    /// Parses rows of `#` (ridge) and `.` (background). Handy for tests.
    pub fn from_ascii(art: &str) -> Result<Self> {
        let rows: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let width = rows.first().map_or(0, |r| r.len());
        let mut pixels = Vec::with_capacity(width * rows.len());
        for row in &rows {
            if row.len() != width {
                return Err(Error::invalid("ragged ascii image"));
            }
            for c in row.chars() {
                pixels.push(match c {
                    '#' | '1' => 1,
                    '.' | '0' => 0,
                    _ => return Err(Error::invalid(format!("unexpected character {c:?}"))),
                });
            }
        }
        Self::from_pixels(width, rows.len(), pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel value with everything outside the image reading as background.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0
        } else {
            self.get(x as usize, y as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.pixels[y * self.width + x] = value as u8;
    }

    pub fn count_ridge(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        super::netpbm::decode(&bytes)
    }

    /// Plain (P1) PBM encoding.
    pub fn to_pbm(&self) -> Vec<u8> {
        let mut out = format!("P1\n{} {}\n", self.width, self.height).into_bytes();
        for row in self.pixels.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
        out
    }

    pub fn save_pbm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_pbm()))
            .map_err(|e| Error::io(path, e))
    }
}

impl fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryImage {}x{}", self.width, self.height)?;
        for row in self.pixels.chunks(self.width.max(1)) {
            let line: String = row.iter().map(|&p| if p == 1 { '#' } else { '.' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
