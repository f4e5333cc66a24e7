//! Seeded synthetic test images.
//!
//! The classic natural test images are not redistributed; these classes
//! span the smoothness range that matters for prediction-error histograms.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ImageClass {
    /// Constant mid-gray with a faint one-level dither.
    Flat,
    /// Diagonal ramp plus mild Gaussian noise.
    Gradient,
    /// Mid-gray with Gaussian noise of standard deviation 6.
    Noise,
    /// Fractal value noise resembling natural texture.
    Natural,
}

impl ImageClass {
    pub const ALL: [ImageClass; 4] = [
        ImageClass::Flat,
        ImageClass::Gradient,
        ImageClass::Noise,
        ImageClass::Natural,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ImageClass::Flat => "flat",
            ImageClass::Gradient => "gradient",
            ImageClass::Noise => "noise",
            ImageClass::Natural => "natural",
        }
    }
}

impl fmt::Display for ImageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ImageClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown image class {s:?}"))
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn build(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| f(x, y)).expect("positive dimensions")
}

pub fn generate(class: ImageClass, width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match class {
        ImageClass::Flat => {
            let base: u8 = rng.random_range(96..160);
            build(width, height, |_, _| base + u8::from(rng.random_bool(0.1)))
        }
        ImageClass::Gradient => {
            let noise = Normal::new(0.0, 1.0).expect("valid sigma");
            let span = (width + height).max(2) as f64;
            build(width, height, |x, y| {
                clamp_u8(40.0 + 170.0 * (x + y) as f64 / span + noise.sample(&mut rng))
            })
        }
        ImageClass::Noise => {
            let noise = Normal::new(0.0, 6.0).expect("valid sigma");
            build(width, height, |_, _| clamp_u8(128.0 + noise.sample(&mut rng)))
        }
        ImageClass::Natural => value_noise(width, height, &mut rng),
    }
}

/// Four octaves of bilinear value noise over a random lattice.
fn value_noise(width: usize, height: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    const OCTAVES: usize = 4;
    let mut acc = vec![0.0f64; width * height];
    let mut amplitude = 1.0;
    let mut total = 0.0;
    for octave in 0..OCTAVES {
        let cell = (32 >> octave).max(2) as f64;
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..height {
            let fy = y as f64 / cell;
            let (y0, ty) = (fy.floor() as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (x0, tx) = (fx.floor() as usize, smooth(fx.fract()));
                let at = |i: usize, j: usize| lattice[j * gw + i];
                let top = lerp(at(x0, y0), at(x0 + 1, y0), tx);
                let bottom = lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), tx);
                acc[y * width + x] += amplitude * lerp(top, bottom, ty);
            }
        }
        total += amplitude;
        amplitude *= 0.35;
    }
    let noise = Normal::new(0.0, 0.6).expect("valid sigma");
    build(width, height, |x, y| {
        clamp_u8(30.0 + 195.0 * acc[y * width + x] / total + noise.sample(&mut *rng))
    })
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        for class in ImageClass::ALL {
            let a = generate(class, 40, 30, 9);
            let b = generate(class, 40, 30, 9);
            assert_eq!(a, b, "{class}");
            assert_eq!(a.dimensions(), (40, 30));
        }
        assert_ne!(
            generate(ImageClass::Noise, 16, 16, 1),
            generate(ImageClass::Noise, 16, 16, 2)
        );
    }

    #[test]
    fn names_roundtrip() {
        for class in ImageClass::ALL {
            assert_eq!(class.name().parse::<ImageClass>().unwrap(), class);
        }
        assert!("lena".parse::<ImageClass>().is_err());
    }
}
