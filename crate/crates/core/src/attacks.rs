//! Seeded channel distortions used for robustness benchmarking.

use std::fmt;
use std::str::FromStr;

use crate::blockdct::{dct_block, idct_block, BLOCK};
use crate::error::{Error, Result};
use crate::image::{to_pixel, GrayImage};
use crate::prng::CounterRng;

const STREAM_GAUSSIAN: u64 = 0x4741_5553;
const STREAM_SALT_PEPPER: u64 = 0x5341_4c54;

/// Baseline JPEG luminance quantization table, row-major.
pub const JPEG_LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    Gaussian,
    SaltPepper,
    Jpeg,
    Scale,
}

impl AttackKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackKind::Gaussian => "gaussian",
            AttackKind::SaltPepper => "saltpepper",
            AttackKind::Jpeg => "jpeg",
            AttackKind::Scale => "scale",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(AttackKind::Gaussian),
            "saltpepper" | "salt-pepper" | "sp" => Ok(AttackKind::SaltPepper),
            "jpeg" => Ok(AttackKind::Jpeg),
            "scale" | "amplitude" => Ok(AttackKind::Scale),
            other => Err(Error::invalid(format!("unknown attack '{other}'"))),
        }
    }
}

/// An attack and its parameter: σ, density, quality or β depending on the kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub param: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, param: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, param, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.param;
        let ok = p.is_finite()
            && match self.kind {
                AttackKind::Gaussian => p >= 0.0,
                AttackKind::SaltPepper => (0.0..=1.0).contains(&p),
                AttackKind::Jpeg => (1.0..=100.0).contains(&p) && p.fract() == 0.0,
                AttackKind::Scale => p > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "parameter {p} out of range for {} attack",
                self.kind
            )))
        }
    }

    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        self.validate()?;
        Ok(match self.kind {
            AttackKind::Gaussian => gaussian_noise(img, self.param, self.seed),
            AttackKind::SaltPepper => salt_pepper(img, self.param, self.seed),
            AttackKind::Jpeg => jpeg_compress(img, self.param as u8)?,
            AttackKind::Scale => amplitude_scale(img, self.param),
        })
    }
}

/// Adds i.i.d. `N(0, σ²)` noise per pixel, then rounds and clips.
pub fn gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let rng = CounterRng::new(seed, STREAM_GAUSSIAN);
    let mut out = img.clone();
    for (i, p) in out.pixels_mut().iter_mut().enumerate() {
        *p = to_pixel(*p as f64 + sigma * rng.gaussian(i as u64, 0));
    }
    out
}

/// Each pixel independently becomes 0 or 255 (equally likely) with probability `density`.
pub fn salt_pepper(img: &GrayImage, density: f64, seed: u64) -> GrayImage {
    let rng = CounterRng::new(seed, STREAM_SALT_PEPPER);
    let mut out = img.clone();
    for (i, p) in out.pixels_mut().iter_mut().enumerate() {
        if rng.uniform(i as u64, 0) < density {
            *p = if rng.uniform(i as u64, 1) < 0.5 {
                0
            } else {
                255
            };
        }
    }
    out
}

/// Luminance table scaled for `quality` the way the IJG encoder does it.
pub fn jpeg_table(quality: u8) -> Result<[f64; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid(format!(
            "JPEG quality {quality} outside [1, 100]"
        )));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut table = [0.0; 64];
    for (t, &base) in table.iter_mut().zip(&JPEG_LUMA_TABLE) {
        *t = ((base as u32 * scale + 50) / 100).max(1) as f64;
    }
    Ok(table)
}

/// Baseline JPEG round trip of the coefficient quantization stage.
///
/// Entropy coding is lossless and therefore skipped. Partial edge blocks are
/// padded by edge replication.
pub fn jpeg_compress(img: &GrayImage, quality: u8) -> Result<GrayImage> {
    let table = jpeg_table(quality)?;
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let mut block = [0.0; 64];
            for r in 0..BLOCK {
                for c in 0..BLOCK {
                    let (x, y) = ((bx + c).min(w - 1), (by + r).min(h - 1));
                    block[r * BLOCK + c] = img.get(x, y) as f64 - 128.0;
                }
            }
            let mut coeffs = dct_block(&block);
            for (v, q) in coeffs.iter_mut().zip(&table) {
                *v = (*v / q).round() * q;
            }
            let px = idct_block(&coeffs);
            for r in 0..BLOCK.min(h - by) {
                for c in 0..BLOCK.min(w - bx) {
                    out.pixels_mut()[(by + r) * w + bx + c] = to_pixel(px[r * BLOCK + c] + 128.0);
                }
            }
        }
    }
    Ok(out)
}

/// `pixel ← clip(round(β·pixel))`.
pub fn amplitude_scale(img: &GrayImage, beta: f64) -> GrayImage {
    img.map(|p| to_pixel(beta * p as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    fn textured(seed: u64) -> GrayImage {
        let mut s = seed;
        GrayImage::from_fn(64, 64, |x, y| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let smooth = 128.0 + 60.0 * ((x as f64) / 9.0).sin() * ((y as f64) / 13.0).cos();
            (smooth + ((s >> 59) as f64 - 16.0)).clamp(0.0, 255.0) as u8
        })
        .unwrap()
    }

    #[test]
    fn gaussian_examples() {
        let img = textured(1);
        assert_eq!(gaussian_noise(&img, 0.0, 4), img);
        assert_eq!(gaussian_noise(&img, 3.0, 4), gaussian_noise(&img, 3.0, 4));
        assert_ne!(gaussian_noise(&img, 3.0, 4), gaussian_noise(&img, 3.0, 5));

        let flat = GrayImage::filled(256, 256, 128).unwrap();
        let noisy = gaussian_noise(&flat, 5.0, 7);
        let n = noisy.pixels().len() as f64;
        let mean = noisy.mean();
        let std = (noisy
            .pixels()
            .iter()
            .map(|&p| (p as f64 - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        assert!((4.75..=5.25).contains(&std), "std {std}");
    }

    #[test]
    fn salt_pepper_examples() {
        let img = textured(2);
        assert_eq!(salt_pepper(&img, 0.0, 1), img);
        assert!(salt_pepper(&img, 1.0, 1)
            .pixels()
            .iter()
            .all(|&p| p == 0 || p == 255));

        let flat = GrayImage::filled(256, 256, 128).unwrap();
        let out = salt_pepper(&flat, 0.02, 3);
        let frac = out.pixels().iter().filter(|&&p| p != 128).count() as f64 / 65536.0;
        assert!((0.015..=0.025).contains(&frac), "fraction {frac}");
        let salt = out.pixels().iter().filter(|&&p| p == 255).count() as f64;
        let pepper = out.pixels().iter().filter(|&&p| p == 0).count() as f64;
        assert!((salt / (salt + pepper) - 0.5).abs() < 0.06);
    }

    #[test]
    fn jpeg_table_scaling() {
        let t50 = jpeg_table(50).unwrap();
        assert_eq!(t50[0], 16.0);
        assert!(jpeg_table(100).unwrap().iter().all(|&q| q == 1.0));
        // quality 10: scale 500, 16 → 80
        assert_eq!(jpeg_table(10).unwrap()[0], 80.0);
        assert!(jpeg_table(0).is_err());
    }

    #[test]
    fn jpeg_quality_behaviour() {
        for seed in 0..3 {
            let img = textured(seed);
            assert!(psnr(&img, &jpeg_compress(&img, 100).unwrap()).unwrap() > 40.0);
            let mut last = f64::INFINITY;
            for q in [90, 70, 50, 30] {
                let p = psnr(&img, &jpeg_compress(&img, q).unwrap()).unwrap();
                assert!(p <= last, "quality {q}: {p} > {last}");
                last = p;
            }
        }
    }

    #[test]
    fn jpeg_keeps_exactly_representable_constants() {
        let mid = GrayImage::filled(16, 16, 128).unwrap();
        for q in [5, 30, 50, 75, 95] {
            assert_eq!(jpeg_compress(&mid, q).unwrap(), mid);
        }
        // at quality 50 the DC step is 16, so 8·(c − 128) must be a multiple of 16
        for c in [100u8, 126, 130, 160, 200] {
            let img = GrayImage::filled(16, 8, c).unwrap();
            assert_eq!(jpeg_compress(&img, 50).unwrap(), img);
        }
        for c in [3u8, 77, 129, 251] {
            let img = GrayImage::filled(8, 8, c).unwrap();
            assert_eq!(jpeg_compress(&img, 100).unwrap(), img);
        }
    }

    #[test]
    fn jpeg_handles_partial_blocks() {
        let img = GrayImage::from_fn(13, 10, |x, y| (x * 10 + y * 7) as u8).unwrap();
        let out = jpeg_compress(&img, 80).unwrap();
        assert!(out.same_size(&img));
    }

    #[test]
    fn amplitude_scale_examples() {
        let img = GrayImage::filled(8, 8, 100).unwrap();
        assert!(amplitude_scale(&img, 1.1)
            .pixels()
            .iter()
            .all(|&p| p == 110));
        let bright = GrayImage::filled(8, 8, 250).unwrap();
        assert!(amplitude_scale(&bright, 1.2)
            .pixels()
            .iter()
            .all(|&p| p == 255));
        let t = textured(3);
        assert_eq!(amplitude_scale(&t, 1.0), t);
    }

    #[test]
    fn attack_parameters_are_validated() {
        assert!(AttackSpec::new(AttackKind::Jpeg, 0.0, 0).is_err());
        assert!(AttackSpec::new(AttackKind::Jpeg, 50.5, 0).is_err());
        assert!(AttackSpec::new(AttackKind::SaltPepper, 1.5, 0).is_err());
        assert!(AttackSpec::new(AttackKind::Gaussian, -1.0, 0).is_err());
        assert!(AttackSpec::new(AttackKind::Scale, 0.0, 0).is_err());
        let spec = AttackSpec::new(AttackKind::Gaussian, 2.0, 9).unwrap();
        let img = textured(4);
        assert_eq!(spec.apply(&img).unwrap(), gaussian_noise(&img, 2.0, 9));
        assert_eq!(
            "salt-pepper".parse::<AttackKind>().unwrap(),
            AttackKind::SaltPepper
        );
    }
}
