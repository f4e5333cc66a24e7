//! 8-bit grayscale images, binary PGM I/O and distortion metrics.

use std::fs;
use std::io;
use std::path::Path;

use num_rational::Ratio;
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest representable pixel value.
pub const MAX_PIXEL: u8 = 255;
/// Number of pixel levels, `|I|` for 8-bit images.
pub const PIXEL_LEVELS: i32 = 256;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM file (expected magic P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0}, only 255 is supported")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row-major 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        let idx = self.index(x, y);
        self.pixels[idx] = value;
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Parses a binary PGM (P5, maxval 255) byte buffer.
    pub fn from_pgm_bytes(data: &[u8]) -> Result<Self, PgmError> {
        let mut header = HeaderReader { data, pos: 0 };
        if data.len() < 2 || &data[..2] != b"P5" {
            return Err(PgmError::BadMagic);
        }
        header.pos = 2;
        let width = header.number("width")?;
        let height = header.number("height")?;
        let maxval = header.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(PgmError::MalformedHeader("zero dimension"));
        }
        if maxval != 255 {
            return Err(PgmError::UnsupportedMaxval(maxval));
        }
        // exactly one whitespace byte separates the header from the raster
        match data.get(header.pos) {
            Some(b) if b.is_ascii_whitespace() => header.pos += 1,
            _ => return Err(PgmError::MalformedHeader("missing whitespace after maxval")),
        }
        let expected = (width as usize)
            .checked_mul(height as usize)
            .ok_or(PgmError::MalformedHeader("dimensions overflow"))?;
        let raster = &data[header.pos..];
        if raster.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                found: raster.len(),
            });
        }
        Ok(Self::new(
            width as usize,
            height as usize,
            raster[..expected].to_vec(),
        )?)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn same_dimensions(&self, other: &GrayImage) -> Result<(), ImageError> {
        if self.dimensions() != other.dimensions() {
            return Err(ImageError::DimensionMismatch(
                self.dimensions(),
                other.dimensions(),
            ));
        }
        Ok(())
    }
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
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

    fn number(&mut self, what: &'static str) -> Result<u32, PgmError> {
        let start = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == start {
            return Err(PgmError::MalformedHeader(what));
        }
        let digits_start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == digits_start || self.pos - digits_start > 9 {
            return Err(PgmError::MalformedHeader(what));
        }
        std::str::from_utf8(&self.data[digits_start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::MalformedHeader(what))
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, PgmError> {
    GrayImage::from_pgm_bytes(&fs::read(path)?)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), PgmError> {
    fs::write(path, img.to_pgm_bytes())?;
    Ok(())
}

/// Sum of squared pixel differences over a pixel count.
///
/// Kept as an exact integer pair; converting to a mean is left to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Distortion {
    pub sse: u64,
    pub count: u64,
}

impl Distortion {
    pub fn mse(&self) -> f64 {
        self.sse as f64 / self.count as f64
    }

    pub fn ratio(&self) -> Ratio<i64> {
        Ratio::new(self.sse as i64, self.count as i64)
    }

    /// Mean in an arbitrary scalar type; exact for rationals, truncating for integers.
    pub fn mean<S: Scalar>(&self) -> S {
        let sse = S::from_u64(self.sse).expect("sse representable");
        let count = S::from_u64(self.count).expect("count representable");
        sse / count
    }

    pub fn psnr(&self) -> f64 {
        if self.sse == 0 {
            return f64::INFINITY;
        }
        10.0 * (f64::from(MAX_PIXEL).powi(2) / self.mse()).log10()
    }
}

/// Squared-error distortion between two same-sized images.
pub fn distortion(a: &GrayImage, b: &GrayImage) -> Result<Distortion, ImageError> {
    a.same_dimensions(b)?;
    let sse = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| {
            let d = i64::from(p) - i64::from(q);
            (d * d) as u64
        })
        .sum();
    Ok(Distortion {
        sse,
        count: a.len() as u64,
    })
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    distortion(a, b).map(|d| d.mse())
}

/// PSNR in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    distortion(a, b).map(|d| d.psnr())
}
