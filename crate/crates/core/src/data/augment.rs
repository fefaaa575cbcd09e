//! Label-preserving image augmentation.
//!
//! Each variant applies a seeded random non-empty subset of the enabled
//! operations, with parameters drawn from ranges that exclude the identity,
//! so a variant never equals its source on ordinary images. Everything is
//! deterministic given the configured seed.

use super::image::Image;
use super::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f32::consts::PI;

/// The augmentation menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentOp {
    Reflection,
    Noise,
    Rotation,
    Hue,
    BrightnessJitter,
    Saturation,
    Translation,
    Shear,
    Contrast,
    Scaling,
}

impl AugmentOp {
    pub fn all() -> Vec<AugmentOp> {
        use AugmentOp::*;
        vec![
            Reflection, Noise, Rotation, Hue, BrightnessJitter, Saturation, Translation, Shear,
            Contrast, Scaling,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Reflection => "reflection",
            Self::Noise => "noise",
            Self::Rotation => "rotation",
            Self::Hue => "hue",
            Self::BrightnessJitter => "brightness",
            Self::Saturation => "saturation",
            Self::Translation => "translation",
            Self::Shear => "shear",
            Self::Contrast => "contrast",
            Self::Scaling => "scaling",
        }
    }

    pub fn from_name(name: &str) -> Option<AugmentOp> {
        AugmentOp::all().into_iter().find(|op| op.name() == name)
    }
}

/// Enabled operations, variant count and seed.
#[derive(Debug, Clone)]
pub struct AugmentationSpec {
    pub ops: Vec<AugmentOp>,
    pub variants_per_image: usize,
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn new(ops: Vec<AugmentOp>, variants_per_image: usize, seed: u64) -> Self {
        assert!(variants_per_image >= 1, "variants_per_image must be at least 1");
        assert!(!ops.is_empty(), "at least one augmentation op must be enabled");
        AugmentationSpec { ops, variants_per_image, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        AugmentationSpec { ops: self.ops.clone(), variants_per_image: self.variants_per_image, seed }
    }

    /// Generate `variants_per_image` transformed copies of `image`.
    pub fn variants(&self, image: &Image) -> Result<Vec<Image>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.variants_per_image)
            .map(|_| self.one_variant(image, &mut rng))
            .collect()
    }

    fn one_variant(&self, image: &Image, rng: &mut ChaCha8Rng) -> Result<Image> {
        let mut chosen: Vec<AugmentOp> =
            self.ops.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if chosen.is_empty() {
            chosen.push(self.ops[rng.gen_range(0..self.ops.len())]);
        }
        let mut img = image.clone();
        for op in chosen {
            img = apply_op(op, &img, rng)?;
        }
        Ok(img)
    }
}

/// Magnitude in `[min, max]` with a random sign; never inside the identity
/// neighbourhood.
fn signed(rng: &mut ChaCha8Rng, min: f32, max: f32) -> f32 {
    let magnitude = rng.gen_range(min..=max);
    if rng.gen_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    // Box-Muller; u1 kept away from zero.
    let u1: f32 = rng.gen_range(1e-7f32..1.0);
    let u2: f32 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn apply_op(op: AugmentOp, image: &Image, rng: &mut ChaCha8Rng) -> Result<Image> {
    match op {
        AugmentOp::Reflection => Ok(reflect_horizontal(image)),
        AugmentOp::Noise => Ok(add_noise(image, 0.02, rng)),
        AugmentOp::Rotation => {
            let degrees = signed(rng, 3.0, 30.0);
            Ok(rotate(image, degrees))
        }
        AugmentOp::Hue => {
            let shift = signed(rng, 0.02, 0.10) * 360.0;
            Ok(map_hsv(image, |h, s, v| (h + shift, s, v)))
        }
        AugmentOp::BrightnessJitter => {
            let factor = 1.0 + signed(rng, 0.05, 0.20);
            Ok(map_pixels(image, |v| v * factor))
        }
        AugmentOp::Saturation => {
            let factor = 1.0 + signed(rng, 0.05, 0.20);
            Ok(map_hsv(image, move |h, s, v| (h, (s * factor).clamp(0.0, 1.0), v)))
        }
        AugmentOp::Translation => {
            let dx = signed(rng, 0.02, 0.10) * image.width() as f32;
            let dy = signed(rng, 0.02, 0.10) * image.height() as f32;
            Ok(warp(image, move |x, y| (x - dx, y - dy)))
        }
        AugmentOp::Shear => {
            let factor = signed(rng, 3.0, 15.0).to_radians().tan();
            Ok(warp(image, move |x, y| (x - factor * y, y)))
        }
        AugmentOp::Contrast => {
            let factor = 1.0 + signed(rng, 0.05, 0.20);
            Ok(map_pixels(image, move |v| (v - 127.5) * factor + 127.5))
        }
        AugmentOp::Scaling => {
            let scale = 1.0 + signed(rng, 0.05, 0.15);
            Ok(warp(image, move |x, y| (x / scale, y / scale)))
        }
    }
}

fn reflect_horizontal(image: &Image) -> Image {
    let (w, h) = (image.width(), image.height());
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let mx = w - 1 - x;
            for c in 0..3 {
                pixels.push(image.get(mx, y, c));
            }
        }
    }
    Image::new(w, h, pixels).expect("same dimensions")
}

fn add_noise(image: &Image, sigma_unit: f32, rng: &mut ChaCha8Rng) -> Image {
    let sigma = sigma_unit * 255.0;
    let mut out = image.clone();
    for v in out.pixels_mut() {
        let noisy = *v as f32 + gaussian(rng) * sigma;
        *v = noisy.clamp(0.0, 255.0).round() as u8;
    }
    out
}

fn map_pixels(image: &Image, f: impl Fn(f32) -> f32) -> Image {
    let mut out = image.clone();
    for v in out.pixels_mut() {
        *v = f(*v as f32).clamp(0.0, 255.0).round() as u8;
    }
    out
}

/// Resample through an inverse mapping from destination to source
/// coordinates (both centered); out-of-bounds reads become black.
fn warp(image: &Image, dst_to_src: impl Fn(f32, f32) -> (f32, f32)) -> Image {
    let (w, h) = (image.width(), image.height());
    let (cx, cy) = ((w as f32 - 1.0) / 2.0, (h as f32 - 1.0) / 2.0);
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = dst_to_src(x as f32 - cx, y as f32 - cy);
            let (sx, sy) = (sx + cx, sy + cy);
            let inside = sx >= -0.5 && sx <= w as f32 - 0.5 && sy >= -0.5 && sy <= h as f32 - 0.5;
            for c in 0..3 {
                if inside {
                    pixels.push(image.sample_bilinear(sx, sy, c).round() as u8);
                } else {
                    pixels.push(0);
                }
            }
        }
    }
    Image::new(w, h, pixels).expect("same dimensions")
}

fn rotate(image: &Image, degrees: f32) -> Image {
    let theta = degrees.to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());
    // Inverse rotation: rotate destination coordinates by -theta.
    warp(image, move |x, y| (cos * x + sin * y, -sin * x + cos * y))
}

fn map_hsv(image: &Image, f: impl Fn(f32, f32, f32) -> (f32, f32, f32)) -> Image {
    let mut out = image.clone();
    for p in out.pixels_mut().chunks_exact_mut(3) {
        let (h, s, v) = rgb_to_hsv(p[0], p[1], p[2]);
        let (h, s, v) = f(h, s, v);
        let rgb = hsv_to_rgb(h.rem_euclid(360.0), s.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        p.copy_from_slice(&rgb);
    }
    out
}

fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f32, f32, f32) {
    let r = r as f32 / 255.0;
    let g = g as f32 / 255.0;
    let b = b as f32 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((g + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((b + m) * 255.0).round().clamp(0.0, 255.0) as u8,
    ]
}
