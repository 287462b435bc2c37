//! Per-user secret keys and the deterministic derivation of embedding parameters.
//!
//! Each user holds three seeds. For host vector `i` they expand into a step
//! size, a projection direction and a dither through independent keyed
//! streams, so changing one seed only changes its own parameter family.

use std::fmt;

use crate::error::{Error, Result};
use crate::prng::{hash_str, mix64, CounterRng};
use crate::quantizer::{derive_dither_pair, DitherPair};

pub use crate::pipeline::tune_fidelity;

/// Steps at or below this value are rejected and redrawn.
pub const STEP_FLOOR: f64 = 0.05;

const STREAM_STEP: u64 = 0x5354_4550;
const STREAM_DIRECTION: u64 = 0x0055_5f4b_4559;
const STREAM_DITHER: u64 = 0x4449_5448;
const MAX_STEP_ATTEMPTS: u64 = 256;

/// The three secret seeds of one user.
#[derive(Clone, PartialEq, Eq)]
pub struct UserKeySet {
    pub user_id: String,
    pub step_key: u64,
    pub u_key: u64,
    pub dither_key: u64,
}

impl fmt::Debug for UserKeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserKeySet")
            .field("user_id", &self.user_id)
            .finish_non_exhaustive()
    }
}

impl UserKeySet {
    pub fn new(
        user_id: impl Into<String>,
        step_key: u64,
        u_key: u64,
        dither_key: u64,
    ) -> Result<Self> {
        let user_id = user_id.into();
        if user_id.trim().is_empty() || user_id.contains('\n') {
            return Err(Error::invalid("user id must be a non-empty single line"));
        }
        Ok(Self {
            user_id,
            step_key,
            u_key,
            dither_key,
        })
    }

    /// Reproducible key set expanded from one master seed.
    pub fn from_seed(user_id: impl Into<String>, seed: u64) -> Result<Self> {
        let user_id = user_id.into();
        let base = mix64(seed ^ hash_str(&user_id));
        Self::new(user_id, mix64(base ^ 1), mix64(base ^ 2), mix64(base ^ 3))
    }

    /// Parses the four-line key file: user id, step key, direction key, dither key.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != 4 {
            return Err(Error::invalid(format!(
                "key file must have 4 lines, found {}",
                lines.len()
            )));
        }
        let seed = |i: usize, what: &str| {
            lines[i]
                .parse::<u64>()
                .map_err(|e| Error::invalid(format!("{what} on line {}: {e}", i + 1)))
        };
        Self::new(
            lines[0],
            seed(1, "step key")?,
            seed(2, "direction key")?,
            seed(3, "dither key")?,
        )
    }

    pub fn to_file_string(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}\n",
            self.user_id, self.step_key, self.u_key, self.dither_key
        )
    }

    fn rng(&self, seed: u64, stream: u64) -> CounterRng {
        user_rng(&self.user_id, seed, stream)
    }
}

fn user_rng(user_id: &str, seed: u64, stream: u64) -> CounterRng {
    CounterRng::new(seed ^ mix64(hash_str(user_id)), stream)
}

/// Parameters of one (user, host vector) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedParams {
    pub step: f64,
    pub direction: Vec<f64>,
    pub dither: DitherPair,
}

impl EmbedParams {
    pub fn new(direction: Vec<f64>, dither: DitherPair) -> Result<Self> {
        if direction.iter().all(|&v| v == 0.0) || direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("direction must be finite and nonzero"));
        }
        Ok(Self {
            step: dither.step(),
            direction,
            dither,
        })
    }

    /// Step and dithers multiplied by `factor`; the direction is unchanged.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let dither = self.dither.scaled(factor)?;
        Ok(Self {
            step: dither.step(),
            direction: self.direction.clone(),
            dither,
        })
    }

    pub fn with_direction(&self, direction: Vec<f64>) -> Self {
        Self {
            step: self.step,
            direction,
            dither: self.dither,
        }
    }
}

/// Distributions the parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Mean of the step distribution.
    pub f_g: f64,
    pub u_sigma: f64,
    pub step_sigma: f64,
    /// Host vector length.
    pub length: usize,
    pub redraw_limit: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            f_g: 10.0,
            u_sigma: 4.0,
            step_sigma: 2.0,
            length: 7,
            redraw_limit: 16,
        }
    }
}

impl GeneratorConfig {
    pub fn with_f_g(self, f_g: f64) -> Self {
        Self { f_g, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_g > 0.0) || !self.f_g.is_finite() {
            return Err(Error::invalid(format!(
                "f_g must be positive, got {}",
                self.f_g
            )));
        }
        if !(self.u_sigma > 0.0) || !(self.step_sigma > 0.0) {
            return Err(Error::invalid("generator sigmas must be positive"));
        }
        if self.length == 0 {
            return Err(Error::invalid("host vector length must be at least 1"));
        }
        Ok(())
    }
}

/// Direction of one user for host vector `index`, drawn i.i.d. `N(0, u_sigma²)`.
///
/// Only the direction key and user id are needed, which is what a public key
/// ring carries.
pub fn derive_direction(
    user_id: &str,
    u_key: u64,
    index: usize,
    cfg: &GeneratorConfig,
    redraw: u32,
) -> Result<Vec<f64>> {
    if redraw >= cfg.redraw_limit {
        return Err(Error::DerivationFailure { attempts: redraw });
    }
    let rng = user_rng(user_id, u_key, STREAM_DIRECTION);
    let base = (redraw as u64) << 32;
    let dir: Vec<f64> = (0..cfg.length as u64)
        .map(|e| cfg.u_sigma * rng.gaussian(index as u64, base | e))
        .collect();
    if dir.iter().all(|&v| v == 0.0) {
        return Err(Error::DerivationFailure {
            attempts: redraw + 1,
        });
    }
    Ok(dir)
}

/// Derives step, direction and dither for one (user, host vector) cell.
///
/// The step is drawn from `N(f_g, step_sigma²)` and redrawn until it exceeds
/// [`STEP_FLOOR`]; the bit-0 dither is uniform on `[−Δ/2, Δ/2)`. `redraw`
/// selects an alternative direction draw.
pub fn derive_params(
    keys: &UserKeySet,
    vector_index: usize,
    cfg: &GeneratorConfig,
    redraw: u32,
) -> Result<EmbedParams> {
    cfg.validate()?;
    let direction = derive_direction(&keys.user_id, keys.u_key, vector_index, cfg, redraw)?;

    let step_rng = keys.rng(keys.step_key, STREAM_STEP);
    let step = (0..MAX_STEP_ATTEMPTS)
        .map(|a| cfg.f_g + cfg.step_sigma * step_rng.gaussian(vector_index as u64, a))
        .find(|&s| s > STEP_FLOOR)
        .ok_or(Error::DerivationFailure {
            attempts: MAX_STEP_ATTEMPTS as u32,
        })?;

    let u = keys
        .rng(keys.dither_key, STREAM_DITHER)
        .uniform(vector_index as u64, 0);
    let dither = derive_dither_pair(step * (u - 0.5), step)?;
    EmbedParams::new(direction, dither)
}
