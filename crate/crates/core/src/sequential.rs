//! Adding users to an already watermarked image without disturbing earlier ones.
//!
//! Earlier users publish only their user id and direction key. For every host
//! vector the new directions are made orthogonal to the span of all earlier
//! directions, so the new displacement leaves earlier projections untouched.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::keys::{derive_direction, GeneratorConfig, UserKeySet};
use crate::linalg::{orthogonal_component, orthonormal_frame, remove_span, DEPENDENCE_TOLERANCE};
use crate::optimizer::{Method, OptimizerConfig};
use crate::pipeline::{embed_image, EmbedJob, EmbedOutcome, Payload};
use crate::stdm::norm;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingEntry {
    pub user_id: String,
    pub u_key: u64,
}

/// Ordered public direction keys of earlier users.
///
/// Order matters: directions are orthogonalized in ring order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PublicKeyRing {
    entries: Vec<RingEntry>,
}

impl PublicKeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_keys<'a>(keys: impl IntoIterator<Item = &'a UserKeySet>) -> Self {
        let mut ring = Self::new();
        for k in keys {
            ring.push_keys(k);
        }
        ring
    }

    pub fn entries(&self) -> &[RingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, user_id: impl Into<String>, u_key: u64) -> Result<()> {
        let user_id = user_id.into();
        if user_id.trim().is_empty() || user_id.contains(['\n', '\r']) {
            return Err(Error::invalid(
                "ring user id must be a non-empty single line",
            ));
        }
        self.entries.push(RingEntry { user_id, u_key });
        Ok(())
    }

    pub fn push_keys(&mut self, keys: &UserKeySet) {
        self.entries.push(RingEntry {
            user_id: keys.user_id.clone(),
            u_key: keys.u_key,
        });
    }

    /// Entries before the first occurrence of `user_id`, or the whole ring if absent.
    pub fn priors_of(&self, user_id: &str) -> PublicKeyRing {
        let end = self
            .entries
            .iter()
            .position(|e| e.user_id == user_id)
            .unwrap_or(self.entries.len());
        PublicKeyRing {
            entries: self.entries[..end].to_vec(),
        }
    }

    /// One `user_id,u_key` line per entry; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ring = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, key) = line.rsplit_once(',').ok_or_else(|| {
                Error::invalid(format!("ring line {}: expected 'user_id,u_key'", n + 1))
            })?;
            let key = key
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::invalid(format!("ring line {}: {e}", n + 1)))?;
            ring.push(id.trim(), key)
                .map_err(|e| Error::invalid(format!("ring line {}: {e}", n + 1)))?;
        }
        Ok(ring)
    }

    pub fn to_file_string(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PublicKeyRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{},{}", e.user_id, e.u_key)?;
        }
        Ok(())
    }
}

/// `u` with its component in the span of `priors` removed, rescaled to `‖u‖`.
///
/// The priors need not be mutually orthogonal; they are orthonormalized first.
pub fn orthogonalize_against_public<D: AsRef<[f64]>>(u: &[f64], priors: &[D]) -> Result<Vec<f64>> {
    if priors.iter().any(|p| p.as_ref().len() != u.len()) {
        return Err(Error::invalid(
            "prior directions must match the direction length",
        ));
    }
    if priors.len() > u.len() {
        return Err(Error::InfeasibleRank {
            users: priors.len() + 1,
            length: u.len(),
        });
    }
    let frame = orthonormal_frame(priors)?;
    orthogonal_component(u, &frame)
}

/// Growing orthonormal frame plus the rule for resolving one more direction into it.
#[derive(Debug, Clone, Default)]
pub(crate) struct DirectionFrame {
    frame: Vec<Vec<f64>>,
}

impl DirectionFrame {
    /// Frame spanned by the ring's directions for host vector `index`.
    pub(crate) fn from_ring(
        ring: &PublicKeyRing,
        index: usize,
        cfg: &GeneratorConfig,
    ) -> Result<Self> {
        let mut f = Self::default();
        for e in &ring.entries {
            f.resolve(&e.user_id, e.u_key, index, cfg, true)?;
        }
        Ok(f)
    }

    /// Direction of one user orthogonal to the frame, redrawing while it is
    /// numerically dependent. With `extend` the result joins the frame.
    pub(crate) fn resolve(
        &mut self,
        user_id: &str,
        u_key: u64,
        index: usize,
        cfg: &GeneratorConfig,
        extend: bool,
    ) -> Result<Vec<f64>> {
        if self.frame.len() >= cfg.length {
            return Err(Error::InfeasibleRank {
                users: self.frame.len() + 1,
                length: cfg.length,
            });
        }
        for redraw in 0..cfg.redraw_limit {
            let raw = derive_direction(user_id, u_key, index, cfg, redraw)?;
            let r = remove_span(&raw, &self.frame);
            let rn = norm(&r);
            if !(rn >= DEPENDENCE_TOLERANCE * norm(&raw)) || rn == 0.0 {
                continue;
            }
            let u = orthogonal_component(&raw, &self.frame)?;
            if extend {
                self.frame.push(r.into_iter().map(|x| x / rn).collect());
            }
            return Ok(u);
        }
        Err(Error::DerivationFailure {
            attempts: cfg.redraw_limit,
        })
    }
}

/// Embeds the new users into `img` against the public ring of earlier users.
///
/// The new directions are orthogonal to every ring direction; among themselves
/// they are left as drawn unless `method` is [`Method::Uorth`].
pub fn sequential_embed(
    img: &GrayImage,
    new_users: Vec<Payload>,
    ring: &PublicKeyRing,
    method: Method,
    cfg: &GeneratorConfig,
    opt: &OptimizerConfig,
) -> Result<EmbedOutcome> {
    let job = EmbedJob {
        ring: ring.clone(),
        ..EmbedJob::new(img.clone(), new_users, method)
            .with_generator(*cfg)
            .with_optimizer(opt.clone())
    };
    embed_image(&job)
}
