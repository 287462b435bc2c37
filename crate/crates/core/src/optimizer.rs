//! Fidelity-optimized choice of lattice targets.
//!
//! Any combination of lattice points along the `n` directions yields a valid
//! watermark; the embedders below differ in how they search that pool for
//! the combination closest to the host vector:
//!
//! * **Poptim** enumerates a small window of lattice points per direction.
//! * **Qoptim** fixes `r` targets at their nearest points, minimizes the
//!   distortion quadratic over the others in closed form, and snaps them back
//!   onto their lattices.
//! * **Uorth** orthogonalizes the directions first, after which the nearest
//!   points are globally optimal. Detection then needs every earlier user's
//!   direction.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::keys::EmbedParams;
use crate::linalg::{orthogonal_component, orthonormal_frame};
use crate::multiwm::{
    build_projection_system, check_inputs, directions_of, embed_plain_with, pairs_of, Embedded,
    ProjectionSystem, TargetVector,
};
use crate::quantizer::{lattice_points, nearest_lattice_point, LatticeWindow};
use crate::stdm::HostVector;

pub const DEFAULT_CANDIDATE_CEILING: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PoptimConfig {
    pub window: LatticeWindow,
    /// Largest admissible `t^n`.
    pub ceiling: u64,
}

impl Default for PoptimConfig {
    fn default() -> Self {
        Self {
            window: LatticeWindow::default(),
            ceiling: DEFAULT_CANDIDATE_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoptimConfig {
    /// Number of targets pinned to their nearest point; `None` means `⌊n/2⌋`.
    pub fixed_count: Option<usize>,
    /// Largest admissible `C(n, r)`.
    pub ceiling: u64,
    /// Also score the all-nearest combination, so Qoptim never does worse than plain.
    pub keep_nearest_candidate: bool,
}

impl Default for QoptimConfig {
    fn default() -> Self {
        Self {
            fixed_count: None,
            ceiling: DEFAULT_CANDIDATE_CEILING,
            keep_nearest_candidate: true,
        }
    }
}

impl QoptimConfig {
    pub fn fixed_for(&self, users: usize) -> usize {
        self.fixed_count.unwrap_or(users / 2)
    }
}

/// `√((Qp − P)ᵀ·U_e·(Qp − P))`, the Euclidean distortion the targets would cause.
pub fn embedding_distortion(qp: &[f64], sys: &ProjectionSystem) -> f64 {
    sys.quadratic_distortion(qp).sqrt()
}

/// Exhaustive search over `t` window points per direction; ties keep the
/// lexicographically first offset combination.
pub fn embed_bits_poptim(
    x: &HostVector,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &PoptimConfig,
) -> Result<Embedded> {
    check_inputs(x, params, bits)?;
    let sys = build_projection_system(x, &directions_of(params))?;
    poptim_with(x, &sys, params, bits, cfg)
}

pub(crate) fn poptim_with(
    x: &HostVector,
    sys: &ProjectionSystem,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &PoptimConfig,
) -> Result<Embedded> {
    let n = params.len();
    let t = cfg.window.len();
    let count = (t as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > cfg.ceiling as u128 {
        return Err(Error::SearchTooLarge {
            count,
            ceiling: cfg.ceiling,
        });
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            lattice_points(
                sys.projections()[j],
                &params[j].dither,
                bits[j],
                &cfg.window,
            )
        })
        .collect();

    let mut idx = vec![0usize; n];
    let mut qp: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let mut best_qp = qp.clone();
    let mut best = f64::INFINITY;
    loop {
        let y = sys.quadratic_distortion(&qp);
        if y < best {
            best = y;
            best_qp.copy_from_slice(&qp);
        }
        // odometer: last direction varies fastest
        let mut j = n;
        loop {
            if j == 0 {
                let targets = TargetVector::from_parts_unchecked(best_qp, bits, &pairs_of(params));
                let vector = sys.displace(x, targets.qp())?;
                return Ok(Embedded { vector, targets });
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < t {
                qp[j] = points[j][idx[j]];
                break;
            }
            idx[j] = 0;
            qp[j] = points[j][0];
        }
    }
}

/// Stationary point of `Y = AᵀU_eA` over the free coordinates with the fixed ones held.
///
/// Solves `U_e[free, free]·A_free = −U_e[free, fixed]·A_fixed`. Returns `None`
/// when the reduced matrix is not positive definite.
pub fn qoptim_stationary(
    u_e: &DMatrix<f64>,
    free: &[usize],
    fixed: &[usize],
    a_fixed: &[f64],
) -> Option<Vec<f64>> {
    let t = free.len();
    if t == 0 {
        return Some(Vec::new());
    }
    let m = DMatrix::from_fn(t, t, |i, j| u_e[(free[i], free[j])]);
    let rhs = nalgebra::DVector::from_fn(t, |i, _| {
        -fixed
            .iter()
            .zip(a_fixed)
            .map(|(&f, a)| u_e[(free[i], f)] * a)
            .sum::<f64>()
    });
    let sol = m.cholesky()?.solve(&rhs);
    sol.iter()
        .all(|v| v.is_finite())
        .then(|| sol.iter().copied().collect())
}

/// Quadratic-programming heuristic: for every choice of `r` fixed targets (in
/// lexicographic order) minimize over the rest, re-quantize, and keep the best.
pub fn embed_bits_qoptim(
    x: &HostVector,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &QoptimConfig,
) -> Result<Embedded> {
    check_inputs(x, params, bits)?;
    let sys = build_projection_system(x, &directions_of(params))?;
    qoptim_with(x, &sys, params, bits, cfg)
}

pub(crate) fn qoptim_with(
    x: &HostVector,
    sys: &ProjectionSystem,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &QoptimConfig,
) -> Result<Embedded> {
    let n = params.len();
    let r = cfg.fixed_for(n);
    if r > n {
        return Err(Error::invalid(format!("cannot fix {r} of {n} targets")));
    }
    let count = binomial(n as u64, r as u64);
    if count > cfg.ceiling as u128 {
        return Err(Error::SearchTooLarge {
            count,
            ceiling: cfg.ceiling,
        });
    }
    let pairs = pairs_of(params);
    let proj = sys.projections();
    let nearest = TargetVector::nearest(proj.as_slice(), bits, &pairs);
    let nearest = nearest.qp();

    let mut best_qp = nearest.to_vec();
    let mut best = f64::INFINITY;
    let mut qp = vec![0.0; n];
    for fixed in Combinations::new(n, r) {
        let free: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
        let a_fixed: Vec<f64> = fixed.iter().map(|&f| nearest[f] - proj[f]).collect();
        for &f in &fixed {
            qp[f] = nearest[f];
        }
        match qoptim_stationary(sys.u_e(), &free, &fixed, &a_fixed) {
            Some(a_free) => {
                for (&o, a) in free.iter().zip(a_free) {
                    qp[o] = nearest_lattice_point(a + proj[o], &pairs[o], bits[o]);
                }
            }
            None => {
                for &o in &free {
                    qp[o] = nearest[o];
                }
            }
        }
        let y = sys.quadratic_distortion(&qp);
        if y < best {
            best = y;
            best_qp.copy_from_slice(&qp);
        }
    }
    if cfg.keep_nearest_candidate && sys.quadratic_distortion(nearest) < best {
        best_qp.copy_from_slice(nearest);
    }
    let targets = TargetVector::from_parts_unchecked(best_qp, bits, &pairs);
    let vector = sys.displace(x, targets.qp())?;
    Ok(Embedded { vector, targets })
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `r`-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, r: usize) -> Self {
        Self {
            n,
            current: (r <= n).then(|| (0..r).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let r = out.len();
        let mut c = out.clone();
        let mut i = r;
        self.current = loop {
            if i == 0 {
                break None;
            }
            i -= 1;
            if c[i] < self.n - r + i {
                c[i] += 1;
                for j in i + 1..r {
                    c[j] = c[j - 1] + 1;
                }
                break Some(c);
            }
        };
        Some(out)
    }
}

/// Classical Gram–Schmidt in input order, each output rescaled to its input's norm.
pub fn orthogonalize_basis<D: AsRef<[f64]>>(directions: &[D]) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = directions.first() {
        let l = first.as_ref().len();
        if directions.len() > l {
            return Err(Error::InfeasibleRank {
                users: directions.len(),
                length: l,
            });
        }
        if directions.iter().any(|d| d.as_ref().len() != l) {
            return Err(Error::invalid("directions must share one length"));
        }
    }
    let frame = orthonormal_frame(directions)?;
    directions
        .iter()
        .enumerate()
        .map(|(j, u)| {
            orthogonal_component(u.as_ref(), &frame[..j]).map_err(|_| Error::DegenerateBasis)
        })
        .collect()
}

/// Nearest-point embedding along the orthogonalized directions.
pub fn embed_bits_uorth(x: &HostVector, params: &[EmbedParams], bits: &[bool]) -> Result<Embedded> {
    check_inputs(x, params, bits)?;
    let orth = orthogonalize_basis(&directions_of(params))?;
    let params: Vec<EmbedParams> = params
        .iter()
        .zip(orth)
        .map(|(p, u)| p.with_direction(u))
        .collect();
    let sys = build_projection_system(x, &directions_of(&params))?;
    embed_plain_with(x, &sys, &params, bits)
}

/// The four embedding strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Plain,
    Poptim,
    Qoptim,
    Uorth,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Plain, Method::Poptim, Method::Qoptim, Method::Uorth];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Poptim => "poptim",
            Method::Qoptim => "qoptim",
            Method::Uorth => "uorth",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "no-optim" => Ok(Method::Plain),
            "poptim" => Ok(Method::Poptim),
            "qoptim" => Ok(Method::Qoptim),
            "uorth" => Ok(Method::Uorth),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerConfig {
    pub poptim: PoptimConfig,
    pub qoptim: QoptimConfig,
}

/// Embeds with the given strategy. For [`Method::Uorth`] the directions are
/// orthogonalized here, in parameter order.
pub fn embed_bits(
    method: Method,
    x: &HostVector,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &OptimizerConfig,
) -> Result<Embedded> {
    match method {
        Method::Plain => crate::multiwm::embed_bits_plain(x, params, bits),
        Method::Poptim => embed_bits_poptim(x, params, bits, &cfg.poptim),
        Method::Qoptim => embed_bits_qoptim(x, params, bits, &cfg.qoptim),
        Method::Uorth => embed_bits_uorth(x, params, bits),
    }
}

/// Like [`embed_bits`], but the directions in `params` are used as given.
pub(crate) fn embed_bits_prepared(
    method: Method,
    x: &HostVector,
    params: &[EmbedParams],
    bits: &[bool],
    cfg: &OptimizerConfig,
) -> Result<Embedded> {
    check_inputs(x, params, bits)?;
    let sys = build_projection_system(x, &directions_of(params))?;
    match method {
        Method::Plain | Method::Uorth => embed_plain_with(x, &sys, params, bits),
        Method::Poptim => poptim_with(x, &sys, params, bits, &cfg.poptim),
        Method::Qoptim => qoptim_with(x, &sys, params, bits, &cfg.qoptim),
    }
}
