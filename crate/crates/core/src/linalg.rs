//! Gram–Schmidt helpers shared by the orthogonalized embedder and sequential embedding.

use crate::error::{Error, Result};
use crate::stdm::{dot, norm};

/// Relative residual below which a vector counts as lying in the span of its predecessors.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-9;

/// `u − Σ ⟨u, e⟩·e` over an orthonormal frame, with all coefficients taken from `u` itself.
pub(crate) fn remove_span(u: &[f64], frame: &[Vec<f64>]) -> Vec<f64> {
    let mut r = u.to_vec();
    for e in frame {
        let c = dot(u, e);
        for (ri, ei) in r.iter_mut().zip(e) {
            *ri -= c * ei;
        }
    }
    r
}

/// Orthonormal frame spanning `vectors`, built in order by classical Gram–Schmidt.
pub(crate) fn orthonormal_frame<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<Vec<f64>>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let v = v.as_ref();
        let r = remove_span(v, &frame);
        let rn = norm(&r);
        if !(rn >= DEPENDENCE_TOLERANCE * norm(v)) || rn == 0.0 {
            return Err(Error::DegenerateBasis);
        }
        frame.push(r.into_iter().map(|x| x / rn).collect());
    }
    Ok(frame)
}

/// Component of `u` orthogonal to the frame, rescaled to `‖u‖`.
pub(crate) fn orthogonal_component(u: &[f64], frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    let un = norm(u);
    let r = remove_span(u, frame);
    let rn = norm(&r);
    if !(rn >= DEPENDENCE_TOLERANCE * un) || rn == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let scale = un / rn;
    Ok(r.into_iter().map(|x| x * scale).collect())
}
