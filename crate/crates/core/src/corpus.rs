//! Deterministic synthetic 8-bit test images.
//!
//! Textures mix fractal value noise, piecewise-constant shapes with soft
//! edges and oriented gratings, which exercises both smooth and busy blocks.

use crate::error::Result;
use crate::image::{to_pixel, GrayImage};
use crate::prng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    Clouds,
    Shapes,
    Grating,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    pub texture: Texture,
    pub seed: u64,
    /// Output intensity range.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub name: String,
    pub image: GrayImage,
    /// Minimum pixel value over 200; mild amplification already clips.
    pub bright: bool,
}

pub const CORPUS_SIZE: usize = 256;

fn lattice_value(rng: &CounterRng, octave: u64, gx: i64, gy: i64) -> f64 {
    let cell = ((gx as u64) << 32) ^ (gy as u64 & 0xffff_ffff);
    rng.uniform(cell, octave)
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(rng: &CounterRng, x: f64, y: f64, octaves: u32) -> f64 {
    let (mut sum, mut amp, mut freq, mut total) = (0.0, 1.0, 1.0 / 64.0, 0.0);
    for o in 0..octaves as u64 {
        let (fx, fy) = (x * freq, y * freq);
        let (ix, iy) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
        let v00 = lattice_value(rng, o, ix, iy);
        let v10 = lattice_value(rng, o, ix + 1, iy);
        let v01 = lattice_value(rng, o, ix, iy + 1);
        let v11 = lattice_value(rng, o, ix + 1, iy + 1);
        let top = v00 + (v10 - v00) * tx;
        let bottom = v01 + (v11 - v01) * tx;
        sum += amp * (top + (bottom - top) * ty);
        total += amp;
        amp *= 0.55;
        freq *= 2.0;
    }
    sum / total
}

fn shapes(rng: &CounterRng, x: f64, y: f64, size: f64) -> f64 {
    let mut v = 0.3 + 0.4 * rng.uniform(0, 99) * (x + y) / (2.0 * size);
    for k in 0..9u64 {
        let cx = rng.uniform(k, 0) * size;
        let cy = rng.uniform(k, 1) * size;
        let r = (0.08 + 0.2 * rng.uniform(k, 2)) * size;
        let level = rng.uniform(k, 3);
        let d = if k % 2 == 0 {
            ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r
        } else {
            (x - cx).abs().max((y - cy).abs()) - r
        };
        let w = 1.0 / (1.0 + (d / 1.5).exp());
        v = v * (1.0 - w) + level * w;
    }
    v
}

fn grating(rng: &CounterRng, x: f64, y: f64) -> f64 {
    let mut v = 0.0;
    for k in 0..3u64 {
        let theta = std::f64::consts::PI * rng.uniform(k, 10);
        let period = 6.0 + 40.0 * rng.uniform(k, 11);
        let phase = std::f64::consts::TAU * rng.uniform(k, 12);
        let t = x * theta.cos() + y * theta.sin();
        v += libm::sin(std::f64::consts::TAU * t / period + phase);
    }
    0.5 + v / 6.0
}

/// Renders one recipe at the given size.
pub fn render(recipe: &Recipe, width: usize, height: usize) -> Result<GrayImage> {
    let rng = CounterRng::new(recipe.seed, 0x636f_7270);
    let grain = CounterRng::new(recipe.seed, 0x0067_726e);
    let size = width.max(height) as f64;
    let mut raw = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let v = match recipe.texture {
                Texture::Clouds => value_noise(&rng, fx, fy, 6),
                Texture::Shapes => {
                    0.85 * shapes(&rng, fx, fy, size) + 0.15 * value_noise(&rng, fx, fy, 4)
                }
                Texture::Grating => {
                    0.7 * grating(&rng, fx, fy) + 0.3 * value_noise(&rng, fx, fy, 3)
                }
                Texture::Mixed => {
                    0.4 * shapes(&rng, fx, fy, size)
                        + 0.3 * grating(&rng, fx, fy)
                        + 0.3 * value_noise(&rng, fx, fy, 5)
                }
            };
            raw.push(v + 0.02 * grain.gaussian((y * width + x) as u64, 0));
        }
    }
    let (min, max) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = (max - min).max(1e-12);
    let pixels = raw
        .into_iter()
        .map(|v| to_pixel(recipe.lo + (recipe.hi - recipe.lo) * (v - min) / span))
        .collect();
    GrayImage::new(width, height, pixels)
}

/// The sixteen recipes of the standard corpus: twelve mid-intensity, four bright.
pub fn recipes() -> Vec<(String, Recipe)> {
    let textures = [
        Texture::Clouds,
        Texture::Shapes,
        Texture::Grating,
        Texture::Mixed,
    ];
    let mut out = Vec::with_capacity(16);
    for i in 0..12u64 {
        let texture = textures[i as usize % 4];
        let lo = 30.0 + 4.0 * (i % 3) as f64;
        let hi = 205.0 + 5.0 * (i % 4) as f64;
        out.push((
            format!("mid{i:02}"),
            Recipe {
                texture,
                seed: 1000 + i,
                lo,
                hi,
            },
        ));
    }
    for i in 0..4u64 {
        let texture = textures[i as usize];
        out.push((
            format!("bright{i:02}"),
            Recipe {
                texture,
                seed: 2000 + i,
                lo: 205.0,
                hi: 252.0,
            },
        ));
    }
    out
}

/// All sixteen corpus images at 256×256.
pub fn standard_corpus() -> Result<Vec<CorpusImage>> {
    recipes()
        .into_iter()
        .map(|(name, r)| {
            let image = render(&r, CORPUS_SIZE, CORPUS_SIZE)?;
            Ok(CorpusImage {
                bright: r.lo > 200.0,
                name,
                image,
            })
        })
        .collect()
}

/// The twelve mid-intensity corpus images.
pub fn mid_intensity_corpus() -> Result<Vec<CorpusImage>> {
    Ok(standard_corpus()?
        .into_iter()
        .filter(|c| !c.bright)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_in_range() {
        let a = standard_corpus().unwrap();
        let b = standard_corpus().unwrap();
        assert_eq!(a.len(), 16);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image, y.image);
            assert_eq!((x.image.width(), x.image.height()), (256, 256));
            let min = *x.image.pixels().iter().min().unwrap();
            let max = *x.image.pixels().iter().max().unwrap();
            if x.bright {
                assert!(min >= 205 && max > 240, "{}: {min}..{max}", x.name);
            } else {
                assert!(min >= 30 && max <= 220, "{}: {min}..{max}", x.name);
            }
        }
        assert_eq!(a.iter().filter(|c| c.bright).count(), 4);
    }

    #[test]
    fn images_differ_and_have_texture() {
        let c = standard_corpus().unwrap();
        for i in 0..c.len() {
            let img = &c[i].image;
            let m = img.mean();
            let var = img
                .pixels()
                .iter()
                .map(|&p| (p as f64 - m).powi(2))
                .sum::<f64>()
                / 65536.0;
            assert!(var > 30.0, "{} too flat: {var}", c[i].name);
            for j in i + 1..c.len() {
                assert_ne!(c[i].image, c[j].image);
            }
        }
    }
}
