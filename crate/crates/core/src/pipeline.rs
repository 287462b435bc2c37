//! Whole-image embedding and blind detection.

use rayon::prelude::*;

use crate::blockdct::{
    assemble_host_vectors_with_length, forward_block_dct, inverse_block_dct, scatter_host_vectors,
    step_scale,
};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::keys::{derive_params, EmbedParams, GeneratorConfig, UserKeySet};
use crate::metrics::{psnr, DetectionReport};
use crate::optimizer::{embed_bits_prepared, Method, OptimizerConfig};
use crate::quantizer::dm_detect_with_margin;
use crate::sequential::{DirectionFrame, PublicKeyRing};
use crate::stdm::{project, HostVector};

/// One user's keys and the bits to embed, one per host vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub keys: UserKeySet,
    pub bits: Vec<bool>,
}

impl Payload {
    pub fn new(keys: UserKeySet, bits: Vec<bool>) -> Self {
        Self { keys, bits }
    }
}

/// Search range and stopping rule for fidelity tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningConfig {
    pub f_g_min: f64,
    pub f_g_max: f64,
    /// Accepted `|PSNR − target|` in dB.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            f_g_min: 0.05,
            f_g_max: 500.0,
            tolerance: 0.1,
            max_iterations: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbedJob {
    pub image: GrayImage,
    pub users: Vec<Payload>,
    pub method: Method,
    pub generator: GeneratorConfig,
    pub optimizer: OptimizerConfig,
    /// When set, `f_g` is tuned to reach this PSNR first.
    pub target_psnr: Option<f64>,
    pub tuning: TuningConfig,
    /// Earlier users the new directions must stay orthogonal to.
    pub ring: PublicKeyRing,
}

impl EmbedJob {
    pub fn new(image: GrayImage, users: Vec<Payload>, method: Method) -> Self {
        Self {
            image,
            users,
            method,
            generator: GeneratorConfig::default(),
            optimizer: OptimizerConfig::default(),
            target_psnr: None,
            tuning: TuningConfig::default(),
            ring: PublicKeyRing::new(),
        }
    }

    pub fn with_generator(self, generator: GeneratorConfig) -> Self {
        Self { generator, ..self }
    }

    pub fn with_optimizer(self, optimizer: OptimizerConfig) -> Self {
        Self { optimizer, ..self }
    }

    pub fn with_target_psnr(self, target: f64) -> Self {
        Self {
            target_psnr: Some(target),
            ..self
        }
    }

    pub fn with_f_g(self, f_g: f64) -> Self {
        Self {
            generator: self.generator.with_f_g(f_g),
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.users.is_empty() {
            return Err(Error::invalid("at least one user is required"));
        }
        let total = self.users.len() + self.ring.len();
        if total > self.generator.length {
            return Err(Error::InfeasibleRank {
                users: total,
                length: self.generator.length,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub image: GrayImage,
    pub psnr: f64,
    pub f_g: f64,
    /// Host vectors left unmodified because their direction system was unusable.
    pub skipped: usize,
    /// The input ring followed by the newly embedded users.
    pub ring: PublicKeyRing,
    /// `(f_g, PSNR)` pairs evaluated while tuning, in order.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct VectorOutcome {
    pub vectors: Vec<HostVector>,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct Tuning {
    pub f_g: f64,
    pub psnr: f64,
    pub trace: Vec<(f64, f64)>,
    pub outcome: EmbedOutcome,
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::IllConditionedBasis { .. }
            | Error::DegenerateBasis
            | Error::DegenerateDirection
            | Error::DerivationFailure { .. }
    )
}

/// Parameters of every user for host vector `index`, steps multiplied by `scale`.
///
/// Directions are raw draws unless the users must be orthogonal to a ring or,
/// for [`Method::Uorth`], to each other.
fn vector_params(
    users: &[Payload],
    ring: &PublicKeyRing,
    method: Method,
    index: usize,
    cfg: &GeneratorConfig,
    scale: f64,
) -> Result<Vec<EmbedParams>> {
    let mut params = users
        .iter()
        .map(|u| derive_params(&u.keys, index, cfg, 0)?.scaled(scale))
        .collect::<Result<Vec<_>>>()?;
    if method == Method::Uorth || !ring.is_empty() {
        let mut frame = DirectionFrame::from_ring(ring, index, cfg)?;
        for (p, u) in params.iter_mut().zip(users) {
            let dir = frame.resolve(
                &u.keys.user_id,
                u.keys.u_key,
                index,
                cfg,
                method == Method::Uorth,
            )?;
            *p = p.with_direction(dir);
        }
    }
    Ok(params)
}

/// Embeds every user into the given host vectors; no transform, no rounding.
pub fn embed_host_vectors(
    vectors: &[HostVector],
    users: &[Payload],
    ring: &PublicKeyRing,
    method: Method,
    cfg: &GeneratorConfig,
    opt: &OptimizerConfig,
    scale: f64,
) -> Result<VectorOutcome> {
    if let Some(u) = users.iter().find(|u| u.bits.len() != vectors.len()) {
        return Err(Error::invalid(format!(
            "user '{}' has {} bits for {} host vectors",
            u.keys.user_id,
            u.bits.len(),
            vectors.len()
        )));
    }
    let results: Vec<Result<Option<HostVector>>> = vectors
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let bits: Vec<bool> = users.iter().map(|u| u.bits[i]).collect();
            let attempt = vector_params(users, ring, method, i, cfg, scale)
                .and_then(|params| embed_bits_prepared(method, x, &params, &bits, opt));
            match attempt {
                Ok(e) => Ok(Some(e.vector)),
                Err(e) if recoverable(&e) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut skipped = 0;
    let mut out = Vec::with_capacity(vectors.len());
    for (r, x) in results.into_iter().zip(vectors) {
        match r? {
            Some(g) => out.push(g),
            None => {
                skipped += 1;
                out.push(x.clone());
            }
        }
    }
    Ok(VectorOutcome {
        vectors: out,
        skipped,
    })
}

fn embed_at(job: &EmbedJob, f_g: f64) -> Result<EmbedOutcome> {
    let cfg = job.generator.with_f_g(f_g);
    let plane = forward_block_dct(&job.image)?;
    let vectors = assemble_host_vectors_with_length(&plane, cfg.length);
    let scale = step_scale(&job.image)?;
    let res = embed_host_vectors(
        &vectors,
        &job.users,
        &job.ring,
        job.method,
        &cfg,
        &job.optimizer,
        scale,
    )?;
    let image = inverse_block_dct(&scatter_host_vectors(&plane, &res.vectors)?);
    let mut ring = job.ring.clone();
    for u in &job.users {
        ring.push_keys(&u.keys);
    }
    Ok(EmbedOutcome {
        psnr: psnr(&job.image, &image)?,
        image,
        f_g,
        skipped: res.skipped,
        ring,
        trace: Vec::new(),
    })
}

/// Embeds all users, tuning `f_g` first when the job has a PSNR target.
pub fn embed_image(job: &EmbedJob) -> Result<EmbedOutcome> {
    job.validate()?;
    match job.target_psnr {
        Some(target) => Ok(tune_fidelity(job, target)?.outcome),
        None => embed_at(job, job.generator.f_g),
    }
}

/// Bisects `f_g` (geometrically) until the embedded image is within tolerance of `target_psnr`.
pub fn tune_fidelity(job: &EmbedJob, target_psnr: f64) -> Result<Tuning> {
    job.validate()?;
    let t = job.tuning;
    if !(t.f_g_min > 0.0 && t.f_g_max > t.f_g_min)
        || !(t.tolerance > 0.0)
        || !target_psnr.is_finite()
    {
        return Err(Error::invalid("invalid tuning range, tolerance or target"));
    }
    let mut trace = Vec::new();
    let mut best: Option<EmbedOutcome> = None;
    let mut eval = |f_g: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let out = embed_at(job, f_g)?;
        trace.push((f_g, out.psnr));
        let p = out.psnr;
        let closer = best
            .as_ref()
            .is_none_or(|b| (p - target_psnr).abs() < (b.psnr - target_psnr).abs());
        if closer {
            best = Some(out);
        }
        Ok(p)
    };
    let done = |p: f64| (p - target_psnr).abs() <= t.tolerance;

    let (mut lo, mut hi) = (t.f_g_min, t.f_g_max);
    let p_lo = eval(lo, &mut trace)?;
    let mut hit = done(p_lo);
    if !hit && p_lo > target_psnr {
        let p_hi = eval(hi, &mut trace)?;
        hit = done(p_hi);
        if !hit && p_hi < target_psnr {
            let mut iter = 2;
            while iter < t.max_iterations {
                let mid = (lo * hi).sqrt();
                let p = eval(mid, &mut trace)?;
                iter += 1;
                if done(p) {
                    hit = true;
                    break;
                }
                if p > target_psnr {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }

    let mut best = best.expect("at least one evaluation");
    if !hit {
        return Err(Error::TuningFailure {
            target: target_psnr,
            best_fg: best.f_g,
            best_psnr: best.psnr,
        });
    }
    best.trace = trace.clone();
    Ok(Tuning {
        f_g: best.f_g,
        psnr: best.psnr,
        trace,
        outcome: best,
    })
}

/// Recovers one user's bits from host vectors, using the received image's step scale.
pub fn detect_host_vectors(
    vectors: &[HostVector],
    keys: &UserKeySet,
    ring: Option<&PublicKeyRing>,
    bit_count: usize,
    cfg: &GeneratorConfig,
    scale: f64,
) -> Result<(Vec<bool>, Vec<f64>)> {
    cfg.validate()?;
    if bit_count == 0 || bit_count > vectors.len() {
        return Err(Error::invalid(format!(
            "cannot read {bit_count} bits from {} host vectors",
            vectors.len()
        )));
    }
    let priors = ring.map(|r| r.priors_of(&keys.user_id));
    let results: Vec<Result<(bool, f64)>> = vectors[..bit_count]
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut params = derive_params(keys, i, cfg, 0)?.scaled(scale)?;
            if let Some(priors) = &priors {
                match DirectionFrame::from_ring(priors, i, cfg)
                    .and_then(|mut f| f.resolve(&keys.user_id, keys.u_key, i, cfg, false))
                {
                    Ok(dir) => params = params.with_direction(dir),
                    Err(e) if recoverable(&e) => return Ok((false, 0.0)),
                    Err(e) => return Err(e),
                }
            }
            let p = project(g.as_slice(), &params.direction)?;
            Ok(dm_detect_with_margin(p, &params.dither))
        })
        .collect();
    let pairs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

fn detect_impl(
    img: &GrayImage,
    keys: &UserKeySet,
    ring: Option<&PublicKeyRing>,
    bit_count: usize,
    cfg: &GeneratorConfig,
) -> Result<DetectionReport> {
    let plane = forward_block_dct(img)?;
    let vectors = assemble_host_vectors_with_length(&plane, cfg.length);
    let (bits, margins) =
        detect_host_vectors(&vectors, keys, ring, bit_count, cfg, step_scale(img)?)?;
    Ok(DetectionReport {
        user_id: keys.user_id.clone(),
        bits,
        margins,
        ber: None,
    })
}

/// Blind detection: needs only the received image, this user's keys and the generator settings.
pub fn detect_image(
    img: &GrayImage,
    keys: &UserKeySet,
    bit_count: usize,
    cfg: &GeneratorConfig,
) -> Result<DetectionReport> {
    detect_impl(img, keys, None, bit_count, cfg)
}

/// Detection for a user whose direction was orthogonalized against a ring.
///
/// Ring entries from the user's own id onward are ignored.
pub fn detect_image_with_ring(
    img: &GrayImage,
    keys: &UserKeySet,
    ring: &PublicKeyRing,
    bit_count: usize,
    cfg: &GeneratorConfig,
) -> Result<DetectionReport> {
    detect_impl(img, keys, Some(ring), bit_count, cfg)
}
