//! Single-bit spread-transform dither modulation.
//!
//! The host vector is moved only along the secret direction `u`, just far
//! enough that its scalar projection lands on the lattice of the message bit.

use crate::error::{Error, Result};
use crate::quantizer::{dm_detect, dm_quantize, DitherPair};

/// Block-DCT coefficients carrying one bit per user.
#[derive(Debug, Clone, PartialEq)]
pub struct HostVector(Vec<f64>);

impl HostVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid(
                "host vector must have at least one coefficient",
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("host vector entries must be finite"));
        }
        Ok(Self(coeffs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &HostVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }
}

impl AsRef<[f64]> for HostVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scalar projection `⟨v, u⟩ / ‖u‖`.
pub fn project(v: &[f64], u: &[f64]) -> Result<f64> {
    if v.len() != u.len() {
        return Err(Error::invalid(format!(
            "length mismatch: vector {} vs direction {}",
            v.len(),
            u.len()
        )));
    }
    let n = norm(u);
    if !(n > 0.0) {
        return Err(Error::invalid("projection direction must be nonzero"));
    }
    Ok(dot(v, u) / n)
}

/// `g = x + k·u` with `k = (QDM(p) − p) / ‖u‖`, `p = proj(x, u)`.
pub fn stdm_embed_bit(
    x: &HostVector,
    u: &[f64],
    pair: &DitherPair,
    bit: bool,
) -> Result<HostVector> {
    let p = project(x.as_slice(), u)?;
    let k = (dm_quantize(p, pair, bit) - p) / norm(u);
    Ok(HostVector(
        x.0.iter().zip(u).map(|(xi, ui)| xi + k * ui).collect(),
    ))
}

pub fn stdm_detect_bit(g: &HostVector, u: &[f64], pair: &DitherPair) -> Result<bool> {
    Ok(dm_detect(project(g.as_slice(), u)?, pair))
}
