//! Scalar uniform quantization and dither modulation.
//!
//! A bit `b` is carried by the lattice `{ k·Δ − dᵇ : k ∈ ℤ }`. The two lattices
//! for bit 0 and bit 1 are shifts of each other by exactly half a step, so a
//! minimum-distance detector can tell them apart as long as the received value
//! moved by less than a quarter step.

use crate::error::{Error, Result};

/// `+1` for non-negative input, `-1` otherwise. Unlike `f64::signum`, zero maps to `+1`.
#[inline]
fn sign_plus(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `step · round(x / step)` with ties rounded away from zero.
pub fn uniform_quantize(x: f64, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!(
            "quantization step must be positive, got {step}"
        )));
    }
    Ok(quantize_unchecked(x, step))
}

#[inline]
pub(crate) fn quantize_unchecked(x: f64, step: f64) -> f64 {
    // f64::round rounds half away from zero.
    step * (x / step).round()
}

/// The dither pair of one (user, host vector) cell together with its step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitherPair {
    d0: f64,
    d1: f64,
    step: f64,
}

impl DitherPair {
    /// Builds the pair from the bit-0 dither. Equivalent to [`derive_dither_pair`].
    pub fn new(d0: f64, step: f64) -> Result<Self> {
        derive_dither_pair(d0, step)
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Dither used for `bit`.
    #[inline]
    pub fn dither(&self, bit: bool) -> f64 {
        if bit {
            self.d1
        } else {
            self.d0
        }
    }

    /// The same pair with step and dithers multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        derive_dither_pair(self.d0 * factor, self.step * factor)
    }
}

/// `d¹ = d⁰ − sign⁺(d⁰)·Δ/2`, with `d⁰` required to lie in `[−Δ/2, Δ/2]`.
pub fn derive_dither_pair(d0: f64, step: f64) -> Result<DitherPair> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!(
            "dither step must be positive, got {step}"
        )));
    }
    let half = step / 2.0;
    if !d0.is_finite() || d0 < -half || d0 > half {
        return Err(Error::invalid(format!(
            "dither {d0} outside [-{half}, {half}]"
        )));
    }
    Ok(DitherPair {
        d0,
        d1: d0 - sign_plus(d0) * half,
        step,
    })
}

/// Dither-modulation quantizer: `Q(x + dᵇ, Δ) − dᵇ`.
#[inline]
pub fn dm_quantize(x: f64, pair: &DitherPair, bit: bool) -> f64 {
    let d = pair.dither(bit);
    quantize_unchecked(x + d, pair.step) - d
}

/// Minimum-distance detection. Ties go to bit 0.
#[inline]
pub fn dm_detect(y: f64, pair: &DitherPair) -> bool {
    dm_detect_with_margin(y, pair).0
}

/// Detected bit and the confidence margin `|dist₀ − dist₁| / Δ` (at most 1/2).
pub fn dm_detect_with_margin(y: f64, pair: &DitherPair) -> (bool, f64) {
    let dist0 = (y - dm_quantize(y, pair, false)).abs();
    let dist1 = (y - dm_quantize(y, pair, true)).abs();
    (dist1 < dist0, (dist0 - dist1).abs() / pair.step)
}

/// Ordered set of lattice offsets searched around a projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeWindow {
    offsets: Vec<i64>,
}

impl LatticeWindow {
    /// Offsets are kept sorted ascending so that enumeration order is canonical.
    pub fn new(offsets: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut offsets: Vec<i64> = offsets.into_iter().collect();
        if offsets.is_empty() {
            return Err(Error::invalid("lattice window must not be empty"));
        }
        offsets.sort_unstable();
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("lattice window offsets must be distinct"));
        }
        Ok(Self { offsets })
    }

    /// Contiguous window `lo..=hi`.
    pub fn range(lo: i64, hi: i64) -> Result<Self> {
        Self::new(lo..=hi)
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

impl Default for LatticeWindow {
    fn default() -> Self {
        Self {
            offsets: vec![0, 1],
        }
    }
}

/// Lattice points `Δ·(⌊(x + dᵇ)/Δ⌋ + k) − dᵇ` for every offset `k` of the window, ascending.
///
/// Anchoring on the dithered coordinate makes the window `{0, 1}` bracket the
/// nearest point of the bit's lattice.
pub fn lattice_points(x: f64, pair: &DitherPair, bit: bool, window: &LatticeWindow) -> Vec<f64> {
    let d = pair.dither(bit);
    let base = ((x + d) / pair.step).floor();
    window
        .offsets
        .iter()
        .map(|&k| pair.step * (base + k as f64) - d)
        .collect()
}

/// Closest member of the bit's lattice to `target`.
#[inline]
pub fn nearest_lattice_point(target: f64, pair: &DitherPair, bit: bool) -> f64 {
    dm_quantize(target, pair, bit)
}

/// Whether `v` lies on the bit's lattice within `1e-9·Δ`.
pub fn is_lattice_member(v: f64, pair: &DitherPair, bit: bool) -> bool {
    let k = (v + pair.dither(bit)) / pair.step;
    (k - k.round()).abs() <= 1e-9 * k.abs().max(1.0)
}
