//! Embedding one bit per user into a single host vector.
//!
//! With `n` directions `u_j` stacked as the columns of `U`, the watermarked
//! vector is `g = x + U·K`. Requiring `proj(g, u_j) = Qp_j` for every `j`
//! gives the linear system `U_I·K = Qp − P` with `U_I = Λ_U·UᵀU`, where
//! `Λ_U = diag(1/‖u_j‖)` and `P_j = proj(x, u_j)`. The resulting distortion is
//! `‖g − x‖² = (Qp − P)ᵀ·U_e·(Qp − P)` with `U_e = Λ_U⁻¹(UᵀU)⁻¹Λ_U⁻¹`.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::keys::EmbedParams;
use crate::quantizer::{dm_quantize, is_lattice_member, DitherPair};
use crate::stdm::{dot, norm, project, stdm_detect_bit, HostVector};

/// Condition numbers of `U_I` above this are rejected.
pub const MAX_CONDITION: f64 = 1e8;

/// Linear system relating lattice targets to the embedding displacement.
#[derive(Debug, Clone)]
pub struct ProjectionSystem {
    basis: DMatrix<f64>,
    inv_norms: DVector<f64>,
    u_i: DMatrix<f64>,
    u_e: DMatrix<f64>,
    projections: DVector<f64>,
    cond: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl ProjectionSystem {
    /// Number of directions `n`.
    pub fn users(&self) -> usize {
        self.basis.ncols()
    }

    /// Host vector length `L`.
    pub fn length(&self) -> usize {
        self.basis.nrows()
    }

    /// `U`, one direction per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Diagonal of `Λ_U`.
    pub fn inv_norms(&self) -> &DVector<f64> {
        &self.inv_norms
    }

    pub fn u_i(&self) -> &DMatrix<f64> {
        &self.u_i
    }

    pub fn u_e(&self) -> &DMatrix<f64> {
        &self.u_e
    }

    /// `P`, the projections of the host vector.
    pub fn projections(&self) -> &DVector<f64> {
        &self.projections
    }

    /// Ratio of extreme singular values of `U_I`.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// `(Qp − P)ᵀ·U_e·(Qp − P)` without building `g`.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn quadratic_distortion(&self, qp: &[f64]) -> f64 {
        let n = self.users();
        let mut total = 0.0;
        for i in 0..n {
            let ai = qp[i] - self.projections[i];
            let mut row = 0.0;
            for j in 0..n {
                row += self.u_e[(i, j)] * (qp[j] - self.projections[j]);
            }
            total += ai * row;
        }
        total.max(0.0)
    }

    /// `x + U·U_I⁻¹·(qp − P)`.
    pub(crate) fn displace(&self, x: &HostVector, qp: &[f64]) -> Result<HostVector> {
        let rhs = DVector::from_iterator(
            self.users(),
            qp.iter().zip(self.projections.iter()).map(|(q, p)| q - p),
        );
        let k = self.lu.solve(&rhs).ok_or(Error::IllConditionedBasis {
            cond: f64::INFINITY,
        })?;
        let delta = &self.basis * k;
        Ok(HostVector::from_vec_unchecked(
            x.as_slice()
                .iter()
                .zip(delta.iter())
                .map(|(a, d)| a + d)
                .collect(),
        ))
    }
}

/// Builds `U`, `Λ_U`, `U_I`, `U_e` and `P` for one host vector.
pub fn build_projection_system<D: AsRef<[f64]>>(
    x: &HostVector,
    directions: &[D],
) -> Result<ProjectionSystem> {
    let n = directions.len();
    let l = x.len();
    if n == 0 {
        return Err(Error::invalid("at least one direction is required"));
    }
    if n > l {
        return Err(Error::InfeasibleRank {
            users: n,
            length: l,
        });
    }
    let mut norms = Vec::with_capacity(n);
    let mut projections = Vec::with_capacity(n);
    for d in directions {
        let d = d.as_ref();
        if d.len() != l {
            return Err(Error::invalid(format!(
                "direction length {} does not match host length {l}",
                d.len()
            )));
        }
        projections.push(project(x.as_slice(), d)?);
        norms.push(norm(d));
    }

    let basis = DMatrix::from_fn(l, n, |r, c| directions[c].as_ref()[r]);
    let gram = DMatrix::from_fn(n, n, |i, j| {
        dot(directions[i].as_ref(), directions[j].as_ref())
    });
    let inv_norms = DVector::from_iterator(n, norms.iter().map(|v| 1.0 / v));
    let u_i = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] * inv_norms[i]);

    let sv = u_i.clone().singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditionedBasis { cond });
    }

    let gram_inv = gram
        .cholesky()
        .ok_or(Error::IllConditionedBasis { cond })?
        .inverse();
    let mut u_e = DMatrix::from_fn(n, n, |i, j| norms[i] * gram_inv[(i, j)] * norms[j]);
    // symmetrize away rounding noise
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (u_e[(i, j)] + u_e[(j, i)]);
            u_e[(i, j)] = v;
            u_e[(j, i)] = v;
        }
    }

    let lu = u_i.clone().lu();
    Ok(ProjectionSystem {
        basis,
        inv_norms,
        u_i,
        u_e,
        projections: DVector::from_vec(projections),
        cond,
        lu,
    })
}

/// One chosen lattice point per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    qp: Vec<f64>,
    bits: Vec<bool>,
    pairs: Vec<DitherPair>,
}

impl TargetVector {
    /// Checks that every target lies on the lattice of its bit.
    pub fn new(qp: Vec<f64>, bits: Vec<bool>, pairs: Vec<DitherPair>) -> Result<Self> {
        if qp.len() != bits.len() || qp.len() != pairs.len() {
            return Err(Error::invalid("target, bit and dither counts differ"));
        }
        for (j, ((q, b), p)) in qp.iter().zip(&bits).zip(&pairs).enumerate() {
            if !is_lattice_member(*q, p, *b) {
                return Err(Error::invalid(format!(
                    "target {j} ({q}) is not on its bit lattice"
                )));
            }
        }
        Ok(Self { qp, bits, pairs })
    }

    /// Nearest lattice point to each projection.
    pub fn nearest(projections: &[f64], bits: &[bool], pairs: &[DitherPair]) -> Self {
        Self {
            qp: projections
                .iter()
                .zip(bits.iter().zip(pairs))
                .map(|(p, (b, pair))| dm_quantize(*p, pair, *b))
                .collect(),
            bits: bits.to_vec(),
            pairs: pairs.to_vec(),
        }
    }

    pub fn qp(&self) -> &[f64] {
        &self.qp
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn pairs(&self) -> &[DitherPair] {
        &self.pairs
    }

    pub(crate) fn from_parts_unchecked(qp: Vec<f64>, bits: &[bool], pairs: &[DitherPair]) -> Self {
        Self {
            qp,
            bits: bits.to_vec(),
            pairs: pairs.to_vec(),
        }
    }
}

/// Watermarked host vector together with the targets that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub vector: HostVector,
    pub targets: TargetVector,
}

/// `g = x + U·U_I⁻¹·(Qp − P)`.
pub fn solve_embedding(
    x: &HostVector,
    sys: &ProjectionSystem,
    target: &TargetVector,
) -> Result<HostVector> {
    if target.qp.len() != sys.users() {
        return Err(Error::invalid(
            "target count does not match the projection system",
        ));
    }
    sys.displace(x, &target.qp)
}

pub(crate) fn check_inputs(x: &HostVector, params: &[EmbedParams], bits: &[bool]) -> Result<()> {
    if params.is_empty() {
        return Err(Error::invalid("at least one user is required"));
    }
    if params.len() != bits.len() {
        return Err(Error::invalid(format!(
            "{} parameter sets for {} bits",
            params.len(),
            bits.len()
        )));
    }
    if params.len() > x.len() {
        return Err(Error::InfeasibleRank {
            users: params.len(),
            length: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn pairs_of(params: &[EmbedParams]) -> Vec<DitherPair> {
    params.iter().map(|p| p.dither).collect()
}

pub(crate) fn directions_of(params: &[EmbedParams]) -> Vec<&[f64]> {
    params.iter().map(|p| p.direction.as_slice()).collect()
}

/// Embeds with every target at the lattice point nearest its projection.
pub fn embed_bits_plain(x: &HostVector, params: &[EmbedParams], bits: &[bool]) -> Result<Embedded> {
    check_inputs(x, params, bits)?;
    let sys = build_projection_system(x, &directions_of(params))?;
    embed_plain_with(x, &sys, params, bits)
}

pub(crate) fn embed_plain_with(
    x: &HostVector,
    sys: &ProjectionSystem,
    params: &[EmbedParams],
    bits: &[bool],
) -> Result<Embedded> {
    let targets = TargetVector::nearest(sys.projections().as_slice(), bits, &pairs_of(params));
    let vector = solve_embedding(x, sys, &targets)?;
    Ok(Embedded { vector, targets })
}

/// Blind detection of one user's bit. Needs nothing but that user's parameters.
pub fn detect_bit(g: &HostVector, params: &EmbedParams) -> Result<bool> {
    stdm_detect_bit(g, &params.direction, &params.dither)
}
