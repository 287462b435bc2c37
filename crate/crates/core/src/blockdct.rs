//! 8×8 block DCT, host-vector extraction and mean-intensity step scaling.
//!
//! The transform is the orthonormal DCT-II applied to raw pixel values, with no
//! level shift. Orthonormality makes squared error in the coefficient domain
//! equal squared error in the pixel domain.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::{to_pixel, GrayImage};
use crate::stdm::HostVector;

pub const BLOCK: usize = 8;

/// Coefficients per host vector: zig-zag positions 2 through 8.
pub const HOST_LENGTH: usize = 7;

/// Intensity at which the effective step equals the base step.
pub const MEAN_ANCHOR: f64 = 128.0;

/// Row-major indices of the 8×8 block in zig-zag scan order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20,
    13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59,
    52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Orthonormal DCT-II basis, `A[k][n] = c(k)·cos((2n + 1)kπ/16)`.
pub(crate) fn dct_matrix() -> &'static [[f64; BLOCK]; BLOCK] {
    static A: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    A.get_or_init(|| {
        let mut a = [[0.0; BLOCK]; BLOCK];
        for (k, row) in a.iter_mut().enumerate() {
            let c = if k == 0 {
                (1.0 / BLOCK as f64).sqrt()
            } else {
                (2.0 / BLOCK as f64).sqrt()
            };
            for (n, v) in row.iter_mut().enumerate() {
                *v = c * libm::cos(((2 * n + 1) * k) as f64 * std::f64::consts::PI / 16.0);
            }
        }
        a
    })
}

/// `A·X·Aᵀ` for one row-major block.
pub(crate) fn dct_block(x: &[f64; 64]) -> [f64; 64] {
    let a = dct_matrix();
    let mut tmp = [0.0; 64];
    for k in 0..BLOCK {
        for c in 0..BLOCK {
            tmp[k * BLOCK + c] = (0..BLOCK).map(|r| a[k][r] * x[r * BLOCK + c]).sum();
        }
    }
    let mut out = [0.0; 64];
    for k in 0..BLOCK {
        for l in 0..BLOCK {
            out[k * BLOCK + l] = (0..BLOCK).map(|c| tmp[k * BLOCK + c] * a[l][c]).sum();
        }
    }
    out
}

/// `Aᵀ·Y·A` for one row-major block.
pub(crate) fn idct_block(y: &[f64; 64]) -> [f64; 64] {
    let a = dct_matrix();
    let mut tmp = [0.0; 64];
    for r in 0..BLOCK {
        for l in 0..BLOCK {
            tmp[r * BLOCK + l] = (0..BLOCK).map(|k| a[k][r] * y[k * BLOCK + l]).sum();
        }
    }
    let mut out = [0.0; 64];
    for r in 0..BLOCK {
        for c in 0..BLOCK {
            out[r * BLOCK + c] = (0..BLOCK).map(|l| tmp[r * BLOCK + l] * a[l][c]).sum();
        }
    }
    out
}

/// Per-block DCT coefficients, blocks in row-major order over the block grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPlane {
    blocks_x: usize,
    blocks_y: usize,
    blocks: Vec<[f64; 64]>,
}

impl CoefficientPlane {
    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn blocks(&self) -> &[[f64; 64]] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [[f64; 64]] {
        &mut self.blocks
    }

    pub fn width(&self) -> usize {
        self.blocks_x * BLOCK
    }

    pub fn height(&self) -> usize {
        self.blocks_y * BLOCK
    }

    /// All coefficients flattened block by block.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// Inverse transform without rounding or clipping, row-major.
    pub fn to_real_pixels(&self) -> Vec<f64> {
        let w = self.width();
        let mut out = vec![0.0; w * self.height()];
        for (b, block) in self.blocks.iter().enumerate() {
            let (bx, by) = (b % self.blocks_x, b / self.blocks_x);
            let px = idct_block(block);
            for r in 0..BLOCK {
                let row = (by * BLOCK + r) * w + bx * BLOCK;
                out[row..row + BLOCK].copy_from_slice(&px[r * BLOCK..(r + 1) * BLOCK]);
            }
        }
        out
    }
}

pub(crate) fn check_block_dims(width: usize, height: usize) -> Result<()> {
    if !width.is_multiple_of(BLOCK) || !height.is_multiple_of(BLOCK) {
        return Err(Error::InvalidImage(format!(
            "dimensions {width}x{height} are not multiples of {BLOCK}"
        )));
    }
    Ok(())
}

/// Forward transform of real-valued pixels laid out row-major.
pub fn forward_block_dct_real(
    width: usize,
    height: usize,
    pixels: &[f64],
) -> Result<CoefficientPlane> {
    check_block_dims(width, height)?;
    if pixels.len() != width * height {
        return Err(Error::InvalidImage(
            "pixel count does not match dimensions".into(),
        ));
    }
    let (blocks_x, blocks_y) = (width / BLOCK, height / BLOCK);
    let blocks = (0..blocks_x * blocks_y)
        .map(|b| {
            let (bx, by) = (b % blocks_x, b / blocks_x);
            let mut x = [0.0; 64];
            for r in 0..BLOCK {
                let row = (by * BLOCK + r) * width + bx * BLOCK;
                x[r * BLOCK..(r + 1) * BLOCK].copy_from_slice(&pixels[row..row + BLOCK]);
            }
            dct_block(&x)
        })
        .collect();
    Ok(CoefficientPlane {
        blocks_x,
        blocks_y,
        blocks,
    })
}

pub fn forward_block_dct(img: &GrayImage) -> Result<CoefficientPlane> {
    let real: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
    forward_block_dct_real(img.width(), img.height(), &real)
}

/// Inverse transform, rounded half away from zero and clipped to 8 bits.
pub fn inverse_block_dct(plane: &CoefficientPlane) -> GrayImage {
    let pixels = plane.to_real_pixels().into_iter().map(to_pixel).collect();
    GrayImage::new(plane.width(), plane.height(), pixels).expect("plane dimensions are valid")
}

/// Zig-zag positions 2..=8 of every block.
pub fn assemble_host_vectors(plane: &CoefficientPlane) -> Vec<HostVector> {
    assemble_host_vectors_with_length(plane, HOST_LENGTH)
}

/// The first `length` AC coefficients of every block in zig-zag order.
pub fn assemble_host_vectors_with_length(
    plane: &CoefficientPlane,
    length: usize,
) -> Vec<HostVector> {
    let length = length.clamp(1, 63);
    plane
        .blocks
        .iter()
        .map(|b| HostVector::from_vec_unchecked(ZIGZAG[1..=length].iter().map(|&i| b[i]).collect()))
        .collect()
}

/// Writes host vectors back to their zig-zag positions; everything else is untouched.
pub fn scatter_host_vectors(
    plane: &CoefficientPlane,
    vectors: &[HostVector],
) -> Result<CoefficientPlane> {
    if vectors.len() != plane.blocks.len() {
        return Err(Error::invalid(format!(
            "{} host vectors for {} blocks",
            vectors.len(),
            plane.blocks.len()
        )));
    }
    let mut out = plane.clone();
    for (block, v) in out.blocks.iter_mut().zip(vectors) {
        if v.is_empty() || v.len() > 63 {
            return Err(Error::invalid(format!(
                "host vector length {} out of range",
                v.len()
            )));
        }
        for (&pos, &c) in ZIGZAG[1..=v.len()].iter().zip(v.as_slice()) {
            block[pos] = c;
        }
    }
    Ok(out)
}

/// `mean / 128`, the factor applied to every derived step and dither.
pub fn step_scale(img: &GrayImage) -> Result<f64> {
    let mean = img.mean();
    if !(mean > 0.0) {
        return Err(Error::DegenerateImage);
    }
    Ok(mean / MEAN_ANCHOR)
}

/// `base · mean(pixels) / 128`.
pub fn effective_step(base: f64, img: &GrayImage) -> Result<f64> {
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::invalid(format!(
            "base step must be positive, got {base}"
        )));
    }
    Ok(base * step_scale(img)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noise_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut s = seed;
        GrayImage::from_fn(w, h, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 56) as u8
        })
        .unwrap()
    }

    #[test]
    fn zigzag_is_a_permutation_starting_correctly() {
        let mut seen = [false; 64];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
        // (row, col): (0,1) (1,0) (2,0) (1,1) (0,2) (0,3) (1,2)
        assert_eq!(&ZIGZAG[1..8], &[1, 8, 16, 9, 2, 3, 10]);
    }

    #[test]
    fn dct_matrix_is_orthonormal() {
        let a = dct_matrix();
        for i in 0..8 {
            for j in 0..8 {
                let d: f64 = (0..8).map(|k| a[i][k] * a[j][k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let img = GrayImage::filled(16, 8, 77).unwrap();
        let plane = forward_block_dct(&img).unwrap();
        for b in plane.blocks() {
            assert!((b[0] - 8.0 * 77.0).abs() < 1e-10);
            assert!(b[1..].iter().all(|c| c.abs() < 1e-10));
        }
        assert!(assemble_host_vectors(&plane)
            .iter()
            .all(|v| v.as_slice().iter().all(|c| c.abs() < 1e-10)));
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let img = GrayImage::filled(12, 8, 1).unwrap();
        assert!(matches!(
            forward_block_dct(&img),
            Err(Error::InvalidImage(_))
        ));
    }

    #[test]
    fn round_trip_and_parseval() {
        let img = noise_image(64, 32, 5);
        let plane = forward_block_dct(&img).unwrap();
        assert_eq!(inverse_block_dct(&plane), img);
        let e_pix: f64 = img.pixels().iter().map(|&p| (p as f64).powi(2)).sum();
        let e_coef: f64 = plane.flatten().iter().map(|c| c * c).sum();
        assert!(((e_pix - e_coef) / e_pix).abs() < 1e-6);
    }

    #[test]
    fn inverse_clips_and_zeros_are_black() {
        let img = GrayImage::filled(8, 8, 250).unwrap();
        let mut plane = forward_block_dct(&img).unwrap();
        plane.blocks_mut()[0][0] += 8.0 * 50.0;
        assert!(inverse_block_dct(&plane).pixels().iter().all(|&p| p == 255));
        let zero = CoefficientPlane {
            blocks_x: 2,
            blocks_y: 1,
            blocks: vec![[0.0; 64]; 2],
        };
        assert!(inverse_block_dct(&zero).pixels().iter().all(|&p| p == 0));
    }

    #[test]
    fn host_vector_geometry() {
        let img = noise_image(256, 256, 1);
        let plane = forward_block_dct(&img).unwrap();
        let vs = assemble_host_vectors(&plane);
        assert_eq!(vs.len(), 1024);
        assert!(vs.iter().all(|v| v.len() == 7));
        assert_eq!(scatter_host_vectors(&plane, &vs).unwrap(), plane);
        assert!(scatter_host_vectors(&plane, &vs[1..]).is_err());
    }

    #[test]
    fn scatter_touches_only_its_block_and_never_dc() {
        let img = noise_image(32, 16, 2);
        let plane = forward_block_dct(&img).unwrap();
        let mut vs = assemble_host_vectors(&plane);
        vs[3] = HostVector::new(vec![1000.0; 7]).unwrap();
        let out = scatter_host_vectors(&plane, &vs).unwrap();
        for (b, (before, after)) in plane.blocks().iter().zip(out.blocks()).enumerate() {
            assert_eq!(before[0].to_bits(), after[0].to_bits());
            if b != 3 {
                assert_eq!(before, after);
            } else {
                assert_ne!(before, after);
                for (i, (x, y)) in before.iter().zip(after).enumerate() {
                    if !ZIGZAG[1..8].contains(&i) {
                        assert_eq!(x, y);
                    }
                }
            }
        }
    }

    #[test]
    fn effective_step_examples() {
        let mid = GrayImage::filled(8, 8, 128).unwrap();
        assert_eq!(effective_step(3.5, &mid).unwrap(), 3.5);
        let dim = GrayImage::filled(8, 8, 64).unwrap();
        assert_eq!(effective_step(2.0, &dim).unwrap(), 1.0);
        let img = GrayImage::from_fn(8, 8, |x, y| (10 + x * 3 + y * 5) as u8).unwrap();
        let scaled = img.map(|p| p * 2);
        assert_eq!(
            effective_step(1.7, &scaled).unwrap(),
            2.0 * effective_step(1.7, &img).unwrap()
        );
        assert_eq!(
            effective_step(1.0, &GrayImage::filled(8, 8, 0).unwrap()),
            Err(Error::DegenerateImage)
        );
        assert!(effective_step(0.0, &mid).is_err());
    }

    proptest! {
        #[test]
        fn valumetric_scaling_commutes(seed: u64, beta in 0.1f64..3.0) {
            let img = noise_image(16, 16, seed);
            let real: Vec<f64> = img.pixels().iter().map(|&p| p as f64).collect();
            let scaled: Vec<f64> = real.iter().map(|p| p * beta).collect();
            let a = forward_block_dct_real(16, 16, &real).unwrap();
            let b = forward_block_dct_real(16, 16, &scaled).unwrap();
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                prop_assert!((x * beta - y).abs() < 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn integer_round_trip(seed: u64) {
            let img = noise_image(16, 24, seed);
            prop_assert_eq!(inverse_block_dct(&forward_block_dct(&img).unwrap()), img);
        }
    }
}
