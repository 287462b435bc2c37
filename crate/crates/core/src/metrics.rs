//! Fidelity (MSE, PSNR) and detection quality (BER).

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const PEAK: f64 = 255.0;

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if !a.same_size(b) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(mse_real_iter(
        a.pixels().iter().map(|&p| p as f64),
        b.pixels().iter().map(|&p| p as f64),
    ))
}

/// Mean squared difference of two equally long real sequences.
pub fn mse_real(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(
            "sequences must be non-empty and of equal length",
        ));
    }
    Ok(mse_real_iter(a.iter().copied(), b.iter().copied()))
}

fn mse_real_iter(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = a.zip(b).fold((0.0, 0usize), |(s, n), (x, y)| {
        (s + (x - y) * (x - y), n + 1)
    });
    sum / n as f64
}

/// `10·log10(255² / MSE)`; identical images give `+∞`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Fraction of positions where the bit vectors disagree.
pub fn ber(recovered: &[bool], reference: &[bool]) -> Result<f64> {
    if recovered.len() != reference.len() {
        return Err(Error::invalid(format!(
            "bit counts differ: {} vs {}",
            recovered.len(),
            reference.len()
        )));
    }
    if recovered.is_empty() {
        return Ok(0.0);
    }
    let errors = recovered
        .iter()
        .zip(reference)
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / recovered.len() as f64)
}

/// What one user's detector recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub user_id: String,
    pub bits: Vec<bool>,
    /// `|dist₀ − dist₁| / Δ` per bit.
    pub margins: Vec<f64>,
    pub ber: Option<f64>,
}

impl DetectionReport {
    /// Sets `ber` against the embedded reference.
    pub fn with_reference(mut self, reference: &[bool]) -> Result<Self> {
        self.ber = Some(ber(&self.bits, reference)?);
        Ok(self)
    }

    pub fn mean_margin(&self) -> f64 {
        if self.margins.is_empty() {
            0.0
        } else {
            self.margins.iter().sum::<f64>() / self.margins.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockdct::forward_block_dct_real;

    #[test]
    fn mse_examples() {
        let a = GrayImage::from_fn(16, 8, |x, y| (x * 7 + y * 3) as u8).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.map(|p| p + 1);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        let c = GrayImage::filled(8, 8, 0).unwrap();
        assert!(mse(&a, &c).is_err());
    }

    #[test]
    fn psnr_examples() {
        assert!((psnr_from_mse(1.0) - 48.130803608679).abs() < 1e-9);
        let a = GrayImage::filled(8, 8, 9).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = GrayImage::from_fn(8, 8, |x, _| 9 + x as u8).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn ber_examples() {
        let a = vec![true, false, true, true];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let not: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(ber(&a, &not).unwrap(), 1.0);
        assert!(ber(&a, &a[1..]).is_err());

        let mut s = 99u64;
        let mut bit = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            s >> 63 == 1
        };
        let x: Vec<bool> = (0..1024).map(|_| bit()).collect();
        let y: Vec<bool> = (0..1024).map(|_| bit()).collect();
        assert!((ber(&x, &y).unwrap() - 0.5).abs() <= 0.05);
    }

    #[test]
    fn pixel_and_coefficient_mse_agree() {
        let mut s = 3u64;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 255.0
        };
        let a: Vec<f64> = (0..32 * 24).map(|_| next()).collect();
        let b: Vec<f64> = (0..32 * 24).map(|_| next()).collect();
        let pa = forward_block_dct_real(32, 24, &a).unwrap().flatten();
        let pb = forward_block_dct_real(32, 24, &b).unwrap().flatten();
        let m_pix = mse_real(&a, &b).unwrap();
        let m_coef = mse_real(&pa, &pb).unwrap();
        assert!(((m_pix - m_coef) / m_pix).abs() < 1e-9);
    }

    #[test]
    fn report_ber() {
        let r = DetectionReport {
            user_id: "u".into(),
            bits: vec![true, true, false, false],
            margins: vec![0.5, 0.4, 0.3, 0.2],
            ber: None,
        };
        let r = r.with_reference(&[true, false, false, false]).unwrap();
        assert_eq!(r.ber, Some(0.25));
        assert!((r.mean_margin() - 0.35).abs() < 1e-12);
    }
}
